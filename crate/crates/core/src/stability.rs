//! Step Jacobians `∂h_t/∂h_{t−1}` of the scalar-recurrence cell, their
//! products over a window, and the condition-number bound on that product.
//!
//! Everything here assumes the first-order family with one hidden feature,
//! so the recurrent filter is a scalar `u` and each Jacobian is `N × N`:
//! `J_t = α·D_t·u·S + β·I`, where `S` is the propagation operator and
//! `D_t = diag(σ′(a_t))`.

use rand::Rng;

use crate::cells::{
    step_with, Activation, ConvFamily, Filter, HiddenState, ModelParams, Propagation,
};
use crate::error::{ensure, Error, Result};
use crate::gconv::FeatureTransform;
use crate::graph::{build_laplacians, Graph, LaplacianSet};
use crate::linalg::{power_iterate, DenseMatrix, SparseMatrix};
use crate::rng::seeded;
use crate::training::LAPLACIAN_TOL;

/// Largest graph for which dense Jacobians are formed.
pub const MAX_STABILITY_NODES: usize = 2048;

const SVD_TOL: f64 = 1e-15;
const SVD_MAX_ITER: usize = 100_000;
const SVD_SEED: u64 = 0x51_9e;

/// Diagnostics for one Jacobian product.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub alpha: f64,
    pub beta: f64,
    pub t: usize,
    /// Spectral norm of each factor, in time order `t = 3..=T`.
    pub per_step_jacobian_norm: Vec<f64>,
    pub sigma_max: f64,
    /// Zero when the product is numerically singular.
    pub sigma_min: f64,
    /// `σ_max / σ_min`; infinite when `σ_min = 0`.
    pub condition_number: f64,
    /// Upper bound on the condition number, `None` when the bound is
    /// vacuous or undefined.
    pub bound_m: Option<f64>,
    /// `σ′(a_t)` per node for each factor of the product.
    pub recorded_derivatives: Vec<Vec<f64>>,
    /// `false` if any singular-value iteration hit its cap.
    pub converged: bool,
}

impl StabilityReport {
    pub fn is_singular(&self) -> bool {
        self.condition_number.is_infinite()
    }
}

/// First-order parameters with one hidden feature: `W = 0` (`F × 1`),
/// `U = [u]`, `V = 0` (`1 × F`), zero biases.
pub fn scalar_recurrence_params(
    n_nodes: usize,
    n_features: usize,
    u: f64,
    alpha: f64,
    beta: f64,
    activation: Activation,
    propagation: Propagation,
) -> ModelParams {
    let ft = |r, c| {
        Filter::FirstOrder(FeatureTransform {
            weights: DenseMatrix::zeros(r, c),
        })
    };
    ModelParams {
        activation,
        propagation,
        input_filter: ft(n_features, 1),
        recurrent_filter: Filter::FirstOrder(FeatureTransform {
            weights: DenseMatrix::filled(1, 1, u),
        }),
        readout_filter: ft(1, n_features),
        alpha,
        beta,
        bias: vec![0.0; n_nodes],
        readout_bias: vec![0.0; n_nodes],
    }
}

/// The scalar recurrent weight, after checking the model has the required
/// shape.
fn scalar_u(p: &ModelParams, lap: &LaplacianSet) -> Result<f64> {
    ensure(p.family() == ConvFamily::FirstOrder, || {
        format!(
            "stability diagnostics need the first_order family, got {}",
            p.family()
        )
    })?;
    let u = match &p.recurrent_filter {
        Filter::FirstOrder(t) if t.weights.shape() == (1, 1) => t.weights[(0, 0)],
        _ => {
            return Err(Error::contract(
                "stability diagnostics need one hidden feature (P = 1)",
            ))
        }
    };
    ensure(p.n_nodes() == lap.n_nodes(), || {
        format!(
            "model has {} nodes, graph has {}",
            p.n_nodes(),
            lap.n_nodes()
        )
    })?;
    ensure(lap.n_nodes() <= MAX_STABILITY_NODES, || {
        format!("dense Jacobians are limited to {MAX_STABILITY_NODES} nodes")
    })?;
    Ok(u)
}

/// `α·diag(d)·u·S·m + β·m`
fn apply_factor(
    op: &SparseMatrix,
    d: &[f64],
    u: f64,
    alpha: f64,
    beta: f64,
    m: &DenseMatrix,
) -> Result<DenseMatrix> {
    let mut out = op.spmm(m)?;
    for (i, di) in d.iter().enumerate() {
        let s = alpha * di * u;
        out.row_mut(i).iter_mut().for_each(|v| *v *= s);
    }
    out.axpy(beta, m)?;
    Ok(out)
}

fn derivatives(act: Activation, pre: &DenseMatrix) -> Vec<f64> {
    pre.as_slice().iter().map(|&a| act.derivative(a)).collect()
}

/// Dense `∂h_t/∂h_{t−1}` for one step of the cell.
pub fn step_jacobian(
    p: &ModelParams,
    lap: &LaplacianSet,
    h_prev: &HiddenState,
    x: &DenseMatrix,
) -> Result<DenseMatrix> {
    let u = scalar_u(p, lap)?;
    let step = step_with(p, p.conv(Some(lap)), h_prev, x)?;
    let d = derivatives(p.activation, &step.pre_activation);
    let n = lap.n_nodes();
    apply_factor(
        p.propagation.operator(lap),
        &d,
        u,
        p.alpha,
        p.beta,
        &DenseMatrix::identity(n),
    )
}

/// Runs the cell over `window[..t]` from `h₀ = 0` and forms
/// `∂h_T/∂h_2 = J_T·J_{T−1}···J_3`.
pub fn jacobian_product(
    p: &ModelParams,
    lap: &LaplacianSet,
    window: &[DenseMatrix],
    t: usize,
) -> Result<StabilityReport> {
    let u = scalar_u(p, lap)?;
    ensure(t >= 2, || format!("product length T must be >= 2, got {t}"))?;
    ensure(window.len() >= t, || {
        format!("window has {} frames, T = {t} needs {t}", window.len())
    })?;
    let n = lap.n_nodes();
    let op = p.propagation.operator(lap);
    let conv = p.conv(Some(lap));

    let mut h = DenseMatrix::zeros(n, 1);
    let mut recorded = Vec::with_capacity(t.saturating_sub(2));
    let mut product = DenseMatrix::identity(n);
    let mut norms = Vec::with_capacity(t.saturating_sub(2));
    let mut converged = true;
    let eye = DenseMatrix::identity(n);
    for (step_idx, x) in window[..t].iter().enumerate() {
        let step = step_with(p, conv, &h, x).map_err(|e| e.at_step(step_idx + 1))?;
        if step_idx + 1 >= 3 {
            let d = derivatives(p.activation, &step.pre_activation);
            let j = apply_factor(op, &d, u, p.alpha, p.beta, &eye)?;
            let sv = singular_values(&j);
            converged &= sv.converged;
            norms.push(sv.max);
            product = apply_factor(op, &d, u, p.alpha, p.beta, &product)?;
            recorded.push(d);
        }
        h = step.h;
    }
    if !product.is_finite() {
        return Err(Error::NumericOverflow {
            what: "Jacobian product",
            step: Some(t),
        });
    }

    let sv = singular_values(&product);
    converged &= sv.converged;
    let condition_number = if sv.min > 0.0 {
        sv.max / sv.min
    } else {
        f64::INFINITY
    };
    let bound_m = condition_bound(p, &recorded, lap, t)?;
    Ok(StabilityReport {
        alpha: p.alpha,
        beta: p.beta,
        t,
        per_step_jacobian_norm: norms,
        sigma_max: sv.max,
        sigma_min: sv.min,
        condition_number,
        bound_m,
        recorded_derivatives: recorded,
        converged,
    })
}

/// `((1 + r)/(1 − r))^{T−2}` with `r = |α/β|·max_t ‖D_t·u·S‖²_F`, or `None`
/// when `β = 0` or `r ≥ 1`.
pub fn condition_bound(
    p: &ModelParams,
    recorded: &[Vec<f64>],
    lap: &LaplacianSet,
    t: usize,
) -> Result<Option<f64>> {
    let u = scalar_u(p, lap)?;
    ensure(t >= 2, || format!("product length T must be >= 2, got {t}"))?;
    if p.beta == 0.0 {
        return Ok(None);
    }
    let op = p.propagation.operator(lap);
    let mut worst: f64 = 0.0;
    for d in recorded {
        ensure(d.len() == lap.n_nodes(), || {
            format!(
                "derivative vector has {} entries, expected {}",
                d.len(),
                lap.n_nodes()
            )
        })?;
        let fro2: f64 = (0..op.n_rows())
            .map(|i| {
                let di2 = d[i] * d[i];
                op.row(i).map(|(_, v)| di2 * v * v).sum::<f64>()
            })
            .sum();
        worst = worst.max(u * u * fro2);
    }
    let r = (p.alpha / p.beta).abs() * worst;
    Ok(bound_from_ratio(r, t))
}

/// `((1 + r)/(1 − r))^{T−2}` for `0 ≤ r < 1`, otherwise `None`.
pub fn bound_from_ratio(r: f64, t: usize) -> Option<f64> {
    if !(0.0..1.0).contains(&r) {
        return None;
    }
    let m = ((1.0 + r) / (1.0 - r)).powi(t as i32 - 2);
    m.is_finite().then_some(m)
}

struct SingularPair {
    max: f64,
    min: f64,
    converged: bool,
}

/// Extreme singular values of a square matrix from power iterations on
/// `MᵀM` and on `σ_max²·I − MᵀM`, after scaling `M` to unit Frobenius norm.
fn singular_values(m: &DenseMatrix) -> SingularPair {
    let n = m.n_rows();
    let scale = m.frobenius_norm();
    if scale == 0.0 {
        return SingularPair {
            max: 0.0,
            min: 0.0,
            converged: true,
        };
    }
    let q = m.scale(1.0 / scale);
    let mut tmp = vec![0.0; n];
    let mut gram = |v: &[f64], out: &mut [f64]| {
        for (i, t) in tmp.iter_mut().enumerate() {
            *t = q.row(i).iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &t) in tmp.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(q.row(i)) {
                *o += a * t;
            }
        }
    };
    let top = power_iterate(n, &mut gram, SVD_TOL, SVD_MAX_ITER, SVD_SEED);
    let s = top.value;
    let mut shifted = |v: &[f64], out: &mut [f64]| {
        gram(v, out);
        for (o, vi) in out.iter_mut().zip(v) {
            *o = s * vi - *o;
        }
    };
    let low = power_iterate(n, &mut shifted, SVD_TOL, SVD_MAX_ITER, SVD_SEED);
    // Values within the rounding floor of the shift are indistinguishable
    // from the endpoints of the spectrum.
    let floor = 64.0 * f64::EPSILON * s;
    let gap = s - low.value;
    let min2 = if low.value <= floor {
        s
    } else if gap <= floor {
        0.0
    } else {
        gap
    };
    SingularPair {
        max: scale * s.sqrt(),
        min: scale * min2.sqrt(),
        converged: top.converged && low.converged,
    }
}

/// Spectral norm and smallest singular value of a dense square matrix.
pub fn extreme_singular_values(m: &DenseMatrix) -> Result<(f64, f64)> {
    ensure(m.n_rows() == m.n_cols(), || {
        format!(
            "expected a square matrix, got {}x{}",
            m.n_rows(),
            m.n_cols()
        )
    })?;
    let sv = singular_values(m);
    Ok((sv.max, sv.min))
}

/// Grid of `(α, β, T)` values for [`stability_sweep`].
#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub windows: Vec<usize>,
}

fn sorted_unique(v: &[f64], what: &str) -> Result<Vec<f64>> {
    ensure(!v.is_empty(), || format!("{what} grid is empty"))?;
    ensure(v.iter().all(|x| x.is_finite()), || {
        format!("{what} grid has a non-finite value")
    })?;
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s.dedup();
    Ok(s)
}

/// Seeded input window of `t` frames, entries uniform in `[−1, 1]`.
pub fn synthetic_window(
    n_nodes: usize,
    n_features: usize,
    t: usize,
    seed: u64,
) -> Vec<DenseMatrix> {
    let mut rng = seeded(seed);
    (0..t)
        .map(|_| DenseMatrix::from_fn(n_nodes, n_features, |_, _| rng.random_range(-1.0..=1.0)))
        .collect()
}

/// One report per grid point, ordered lexicographically by `(α, β, T)`,
/// all computed on the same seeded input window.
pub fn stability_sweep(
    graph: &Graph,
    base: &ModelParams,
    grid: &SweepGrid,
    seed: u64,
) -> Result<Vec<StabilityReport>> {
    let alphas = sorted_unique(&grid.alphas, "alpha")?;
    let betas = sorted_unique(&grid.betas, "beta")?;
    ensure(!grid.windows.is_empty(), || "T grid is empty".into())?;
    let mut windows = grid.windows.clone();
    windows.sort_unstable();
    windows.dedup();

    let lap = build_laplacians(graph, LAPLACIAN_TOL)?;
    scalar_u(base, &lap)?;
    let n_features = match &base.input_filter {
        Filter::FirstOrder(t) => t.in_features(),
        _ => unreachable!("checked by scalar_u"),
    };
    let t_max = *windows.last().expect("non-empty");
    let window = synthetic_window(graph.n_nodes(), n_features, t_max, seed);

    let mut rows = Vec::with_capacity(alphas.len() * betas.len() * windows.len());
    for &alpha in &alphas {
        for &beta in &betas {
            let p = ModelParams {
                alpha,
                beta,
                ..base.clone()
            };
            for &t in &windows {
                rows.push(jacobian_product(&p, &lap, &window, t)?);
            }
        }
    }
    Ok(rows)
}

pub const STABILITY_HEADER: &str = "alpha,beta,T,sigma_max,sigma_min,cond,bound_M";

pub fn stability_csv(rows: &[StabilityReport]) -> String {
    let mut s = String::from(STABILITY_HEADER);
    s.push('\n');
    for r in rows {
        let bound = r
            .bound_m
            .map_or_else(|| "undefined".to_string(), |b| format!("{b:e}"));
        s.push_str(&format!(
            "{:e},{:e},{},{:e},{:e},{:e},{}\n",
            r.alpha, r.beta, r.t, r.sigma_max, r.sigma_min, r.condition_number, bound
        ));
    }
    s
}
