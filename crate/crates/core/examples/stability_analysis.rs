//! Growth of the hidden-state Jacobian product with window length, and how
//! the residual weights (alpha, beta) keep it well conditioned.

use fgrnn::cells::{Activation, Propagation};
use fgrnn::data::{generate_synthetic, SyntheticConfig};
use fgrnn::graph::build_laplacians;
use fgrnn::linalg::dense_eig_sym;
use fgrnn::stability::{jacobian_product, scalar_recurrence_params, synthetic_window};

pub fn run_example() -> fgrnn::Result<()> {
    let (_, graph) = generate_synthetic(&SyntheticConfig {
        n_nodes: 32,
        n_frames: 1,
        ..SyntheticConfig::default()
    })?;
    let lap = build_laplacians(&graph, 1e-12)?;
    let n = graph.n_nodes();
    let (eigs, _) = dense_eig_sym(&lap.first_order.to_dense())?;
    let lam = *eigs.last().unwrap();
    let u = 0.8;

    // relu with a positive bias keeps every unit active, so D_t = I
    let mut plain =
        scalar_recurrence_params(n, 1, u, 1.0, 0.0, Activation::Relu, Propagation::FirstOrder);
    plain.bias = vec![1.0; n];
    let window = synthetic_window(n, 1, 16, 1)
        .into_iter()
        .map(|f| f.map(f64::abs))
        .collect::<Vec<_>>();

    println!("alpha=1 beta=0, u={u}: sigma_max vs (u*lambda_max)^(T-2)");
    for t in [4, 8, 12, 16] {
        let r = jacobian_product(&plain, &lap, &window, t)?;
        println!(
            "  T={t:<2} {:>12.4e} {:>12.4e}",
            r.sigma_max,
            (u * lam).powi(t as i32 - 2)
        );
    }

    println!("residual cell, u=0.1: condition number and its bound");
    for (alpha, beta) in [(0.0, 1.0), (0.3, 0.7), (0.5, 0.5)] {
        let mut p = scalar_recurrence_params(
            n,
            1,
            0.1,
            alpha,
            beta,
            Activation::Tanh,
            Propagation::FirstOrder,
        );
        p.bias = vec![0.2; n];
        let r = jacobian_product(&p, &lap, &window, 12)?;
        let bound = r
            .bound_m
            .map_or("vacuous".to_string(), |b| format!("{b:.4e}"));
        println!(
            "  alpha={alpha} beta={beta}: cond {:.4e}, bound {bound}",
            r.condition_number
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> fgrnn::Result<()> {
    run_example()
}
