//! A K-tap Chebyshev graph filter applied by recurrence and by explicit
//! eigendecomposition.

use fgrnn::gconv::{cheb_conv, chebyshev_series, spectral_conv_oracle, ChebFilter};
use fgrnn::graph::{build_laplacians, Graph};
use fgrnn::linalg::DenseMatrix;

pub fn run_example() -> fgrnn::Result<()> {
    // ring of 12 nodes with a chord
    let n = 12;
    let edges = (0..n).map(|i| (i, (i + 1) % n, 1.0)).chain([(0, 6, 0.5)]);
    let lap = build_laplacians(&Graph::new(n, edges)?, 1e-14)?;

    let filter = ChebFilter::new(vec![0.5, -0.3, 0.2, 0.1])?;
    let x = DenseMatrix::from_fn(n, 2, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);

    let fast = cheb_conv(&lap, &x, &filter)?;
    let exact = spectral_conv_oracle(&lap, &x, &filter)?;
    println!(
        "recurrence vs spectral: max diff {:e}",
        fast.max_abs_diff(&exact)?
    );

    println!("frequency response g(lambda) on the scaled spectrum:");
    for k in 0..=4 {
        let lam = -1.0 + 0.5 * k as f64;
        println!(
            "  {lam:+.1}  {:+.4}",
            chebyshev_series(filter.coeffs(), lam)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> fgrnn::Result<()> {
    run_example()
}
