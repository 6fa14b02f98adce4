//! Graph convolutions: the Chebyshev polynomial filter on `L̃` and the
//! first-order filter `L̃₁·X·W`, each with its reverse-mode pass.

use crate::error::{ensure, Error, Result};
use crate::graph::LaplacianSet;
use crate::linalg::{dense_eig_sym, DenseMatrix, SparseMatrix, JACOBI_MAX_DIM};

/// Chebyshev coefficients `θ₀ … θ_{K−1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChebFilter {
    coeffs: Vec<f64>,
}

impl ChebFilter {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        ensure(!coeffs.is_empty(), || {
            "a Chebyshev filter needs at least one coefficient".into()
        })?;
        ensure(coeffs.iter().all(|c| c.is_finite()), || {
            "Chebyshev coefficients must be finite".into()
        })?;
        Ok(Self { coeffs })
    }

    /// Filter order `K`.
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }
}

/// Feature-mixing weights `W` (`F_in × F_out`) of the first-order filter.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTransform {
    pub weights: DenseMatrix,
}

impl FeatureTransform {
    pub fn new(weights: DenseMatrix) -> Result<Self> {
        ensure(weights.is_finite(), || {
            "feature transform weights must be finite".into()
        })?;
        Ok(Self { weights })
    }

    pub fn in_features(&self) -> usize {
        self.weights.n_rows()
    }

    pub fn out_features(&self) -> usize {
        self.weights.n_cols()
    }
}

fn check_rows(op: &SparseMatrix, x: &DenseMatrix, what: &str) -> Result<()> {
    ensure(x.n_rows() == op.n_cols(), || {
        format!(
            "{what}: signal has {} rows, graph has {} nodes",
            x.n_rows(),
            op.n_cols()
        )
    })
}

/// `Σ_k θ_k T_k(L̃) X` via the three-term recurrence; `T_k(L̃)` is never
/// formed.
pub fn cheb_conv(lap: &LaplacianSet, x: &DenseMatrix, f: &ChebFilter) -> Result<DenseMatrix> {
    let op = &lap.scaled;
    check_rows(op, x, "cheb_conv")?;
    let theta = f.coeffs();
    let mut out = x.scale(theta[0]);
    if theta.len() == 1 {
        return Ok(out);
    }
    let mut prev = x.clone();
    let mut cur = op.spmm(x)?;
    out.axpy(theta[1], &cur)?;
    for &t in &theta[2..] {
        let next = chebyshev_next(op, &cur, &prev)?;
        out.axpy(t, &next)?;
        prev = std::mem::replace(&mut cur, next);
    }
    Ok(out)
}

/// `2·L̃·cur − prev`
fn chebyshev_next(op: &SparseMatrix, cur: &DenseMatrix, prev: &DenseMatrix) -> Result<DenseMatrix> {
    let mut next = op.spmm(cur)?.scale(2.0);
    next.axpy(-1.0, prev)?;
    Ok(next)
}

/// Reverse mode of [`cheb_conv`].
///
/// Returns `(∂/∂X, ∂/∂θ)` for upstream gradient `upstream`. Because `L̃` is
/// symmetric, `∂/∂X = Σ_k θ_k T_k(L̃)·upstream`.
pub fn cheb_conv_backward(
    lap: &LaplacianSet,
    x: &DenseMatrix,
    f: &ChebFilter,
    upstream: &DenseMatrix,
) -> Result<(DenseMatrix, Vec<f64>)> {
    let op = &lap.scaled;
    check_rows(op, x, "cheb_conv_backward")?;
    ensure(upstream.shape() == x.shape(), || {
        format!(
            "upstream gradient is {}x{}, forward output is {}x{}",
            upstream.n_rows(),
            upstream.n_cols(),
            x.n_rows(),
            x.n_cols()
        )
    })?;
    let theta = f.coeffs();
    let mut grad_coeffs = Vec::with_capacity(theta.len());
    grad_coeffs.push(x.frobenius_dot(upstream)?);
    let mut grad_x = upstream.scale(theta[0]);
    if theta.len() == 1 {
        return Ok((grad_x, grad_coeffs));
    }

    // Forward basis T_k(L̃)·X and adjoint basis T_k(L̃)·upstream.
    let (mut xp, mut xc) = (x.clone(), op.spmm(x)?);
    let (mut up, mut uc) = (upstream.clone(), op.spmm(upstream)?);
    grad_coeffs.push(xc.frobenius_dot(upstream)?);
    grad_x.axpy(theta[1], &uc)?;
    for &t in &theta[2..] {
        let xn = chebyshev_next(op, &xc, &xp)?;
        let un = chebyshev_next(op, &uc, &up)?;
        grad_coeffs.push(xn.frobenius_dot(upstream)?);
        grad_x.axpy(t, &un)?;
        xp = std::mem::replace(&mut xc, xn);
        up = std::mem::replace(&mut uc, un);
    }
    Ok((grad_x, grad_coeffs))
}

/// `L̃₁·X·W`.
pub fn first_order_conv(
    lap: &LaplacianSet,
    x: &DenseMatrix,
    t: &FeatureTransform,
) -> Result<DenseMatrix> {
    propagate_conv(&lap.first_order, x, t)
}

/// Reverse mode of [`first_order_conv`]; returns `(∂/∂X, ∂/∂W)`.
pub fn first_order_conv_backward(
    lap: &LaplacianSet,
    x: &DenseMatrix,
    t: &FeatureTransform,
    upstream: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix)> {
    propagate_conv_backward(&lap.first_order, x, t, upstream)
}

/// `S·X·W` for an arbitrary symmetric node operator `S`.
pub fn propagate_conv(
    op: &SparseMatrix,
    x: &DenseMatrix,
    t: &FeatureTransform,
) -> Result<DenseMatrix> {
    check_rows(op, x, "first_order_conv")?;
    ensure(t.in_features() == x.n_cols(), || {
        format!(
            "feature transform expects {} input features, signal has {}",
            t.in_features(),
            x.n_cols()
        )
    })?;
    // Mix features first: cheaper when F_out <= F_in, identical result.
    op.spmm(&x.matmul(&t.weights)?)
}

/// Reverse mode of [`propagate_conv`]; requires `op` symmetric.
pub fn propagate_conv_backward(
    op: &SparseMatrix,
    x: &DenseMatrix,
    t: &FeatureTransform,
    upstream: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix)> {
    check_rows(op, x, "first_order_conv_backward")?;
    ensure(
        t.in_features() == x.n_cols()
            && upstream.n_rows() == x.n_rows()
            && upstream.n_cols() == t.out_features(),
        || "first_order_conv_backward dimension mismatch".into(),
    )?;
    let prop_up = op.spmm(upstream)?;
    let grad_w = x.t_matmul(&prop_up)?;
    let grad_x = prop_up.matmul_t(&t.weights)?;
    Ok((grad_x, grad_w))
}

/// Frequency-domain evaluation of the Chebyshev filter:
/// `V·diag(Σ_k θ_k T_k(λ̃))·Vᵀ·X` with `(λ̃, V)` the eigenpairs of `L̃`.
///
/// Dense and `O(N³)`; a reference for small graphs only.
pub fn spectral_conv_oracle(
    lap: &LaplacianSet,
    x: &DenseMatrix,
    f: &ChebFilter,
) -> Result<DenseMatrix> {
    let n = lap.n_nodes();
    if n > JACOBI_MAX_DIM {
        return Err(Error::contract(format!(
            "spectral oracle is limited to N <= {JACOBI_MAX_DIM}, got {n}"
        )));
    }
    check_rows(&lap.scaled, x, "spectral_conv_oracle")?;
    let mut scaled = lap.scaled.to_dense();
    // symmetrise away rounding noise from the 2/λ_max scaling
    let st = scaled.transpose();
    scaled = scaled.add(&st)?.scale(0.5);
    let (lambdas, v) = dense_eig_sym(&scaled)?;
    let response: Vec<f64> = lambdas
        .iter()
        .map(|&l| chebyshev_series(f.coeffs(), l))
        .collect();
    let spectrum = v.t_matmul(x)?;
    let mut filtered = spectrum;
    for (k, &g) in response.iter().enumerate() {
        for val in filtered.row_mut(k) {
            *val *= g;
        }
    }
    v.matmul(&filtered)
}

/// Scalar Chebyshev series `Σ_k θ_k T_k(x)` by the same recurrence.
pub fn chebyshev_series(theta: &[f64], x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    let mut sum = theta[0];
    if let Some(&t1) = theta.get(1) {
        sum += t1 * x;
    }
    for &t in theta.iter().skip(2) {
        let next = 2.0 * x * cur - prev;
        sum += t * next;
        prev = cur;
        cur = next;
    }
    sum
}
