//! BPTT gradients against central finite differences for both graph
//! convolution families.

use fgrnn::cells::{Activation, ConvFamily, ModelParams, ModelShape, Propagation};
use fgrnn::graph::{build_knn_graph, build_laplacians};
use fgrnn::linalg::DenseMatrix;
use fgrnn::rng::seeded;
use fgrnn::training::{finite_difference_check, LossKind};
use rand::Rng;

pub fn run_example() -> fgrnn::Result<()> {
    let mut rng = seeded(11);
    let n = 12;
    let points = DenseMatrix::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0));
    let lap = build_laplacians(&build_knn_graph(&points, 3)?, 1e-14)?;
    let window: Vec<DenseMatrix> = (0..6)
        .map(|_| DenseMatrix::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0)))
        .collect();

    for family in [ConvFamily::Chebyshev, ConvFamily::FirstOrder] {
        for activation in [Activation::Tanh, Activation::Relu] {
            let shape = ModelShape {
                family,
                n_nodes: n,
                n_features: 3,
                hidden: 3,
                order: 3,
            };
            let mut p =
                ModelParams::init(shape, activation, Propagation::FirstOrder, 0.3, &mut rng)?;
            p.bias
                .iter_mut()
                .for_each(|b| *b = rng.random_range(-0.5..0.5));
            for kind in [
                LossKind::Prediction,
                LossKind::GraphRegularized { lambda: 0.1 },
            ] {
                let err = finite_difference_check(&p, &lap, &window, kind, 1e-5)?;
                println!(
                    "{family:<11} {:<7} {kind:?}: max relative error {err:.2e}",
                    activation.name()
                );
            }
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> fgrnn::Result<()> {
    run_example()
}
