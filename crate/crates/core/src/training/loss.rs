use crate::error::{ensure, Result};
use crate::graph::LaplacianSet;
use crate::linalg::DenseMatrix;

/// Which per-step objective to minimise.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum LossKind {
    /// `‖x − x̂‖²_F`
    #[default]
    Prediction,
    /// `‖x − x̂‖²_F + λ·tr(x̂ᵀ L x̂)`
    GraphRegularized { lambda: f64 },
}

impl LossKind {
    pub fn from_lambda(lambda: f64) -> Self {
        if lambda == 0.0 {
            LossKind::Prediction
        } else {
            LossKind::GraphRegularized { lambda }
        }
    }
}

/// Squared Frobenius norm of `x_hat − x`.
pub fn prediction_loss(x_hat: &DenseMatrix, x: &DenseMatrix) -> Result<f64> {
    ensure(x_hat.shape() == x.shape(), || {
        format!(
            "prediction is {}x{}, target is {}x{}",
            x_hat.n_rows(),
            x_hat.n_cols(),
            x.n_rows(),
            x.n_cols()
        )
    })?;
    Ok(x_hat
        .as_slice()
        .iter()
        .zip(x.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// Prediction loss plus the graph smoothness penalty `λ·tr(x̂ᵀ L x̂)` on the
/// prediction.
pub fn graph_regularized_loss(
    x_hat: &DenseMatrix,
    x: &DenseMatrix,
    lap: &LaplacianSet,
    lambda_reg: f64,
) -> Result<f64> {
    ensure(lambda_reg >= 0.0, || {
        format!("regularisation weight must be non-negative, got {lambda_reg}")
    })?;
    let base = prediction_loss(x_hat, x)?;
    if lambda_reg == 0.0 {
        return Ok(base);
    }
    let lx = lap.laplacian.spmm(x_hat)?;
    Ok(base + lambda_reg * x_hat.frobenius_dot(&lx)?)
}

/// Loss value and its gradient with respect to `x_hat`.
pub(crate) fn loss_and_grad(
    kind: LossKind,
    x_hat: &DenseMatrix,
    x: &DenseMatrix,
    lap: Option<&LaplacianSet>,
) -> Result<(f64, DenseMatrix)> {
    let diff = x_hat.sub(x)?;
    let mut value = diff.frobenius_dot(&diff)?;
    let mut grad = diff.scale(2.0);
    if let LossKind::GraphRegularized { lambda } = kind {
        if lambda != 0.0 {
            let lap = lap.ok_or_else(|| {
                crate::Error::contract("graph-regularised loss needs a Laplacian set")
            })?;
            let lx = lap.laplacian.spmm(x_hat)?;
            value += lambda * x_hat.frobenius_dot(&lx)?;
            grad.axpy(2.0 * lambda, &lx)?;
        }
    }
    Ok((value, grad))
}
