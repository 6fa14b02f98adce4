//! kNN graph of a point cloud, its normalized Laplacian, and the largest
//! eigenvalue by power iteration checked against a dense Jacobi solve.

use fgrnn::data::{generate_synthetic, BaseShape, SyntheticConfig};
use fgrnn::graph::build_laplacians;
use fgrnn::linalg::dense_eig_sym;

pub fn run_example() -> fgrnn::Result<()> {
    let (seq, graph) = generate_synthetic(&SyntheticConfig {
        n_nodes: 48,
        n_frames: 1,
        base_shape: BaseShape::Cylinder,
        ..SyntheticConfig::default()
    })?;
    let lap = build_laplacians(&graph, 1e-12)?;
    let (eigs, _) = dense_eig_sym(&lap.laplacian.to_dense())?;

    let degrees = graph.degrees();
    println!(
        "{} nodes, {} edges, degree {}..={}",
        seq.n_nodes(),
        graph.n_edges(),
        degrees.iter().min().unwrap(),
        degrees.iter().max().unwrap()
    );
    println!(
        "lambda_max: power iteration {:.12}, jacobi {:.12}",
        lap.lambda_max,
        eigs.last().unwrap()
    );
    println!("smallest eigenvalues: {:?}", &eigs[..3]);

    let first = lap.first_order.to_dense();
    let mut sum = lap.laplacian.to_dense();
    sum.axpy(1.0, &first)?;
    let two_i = fgrnn::linalg::DenseMatrix::identity(seq.n_nodes()).scale(2.0);
    println!("max |L1 + L - 2I| = {:e}", sum.max_abs_diff(&two_i)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> fgrnn::Result<()> {
    run_example()
}
