//! Recurrent cells and the readout layer.
//!
//! One cell covers every variant:
//!
//! ```text
//! h̃_t = σ(conv(x_t; W) + conv(h_{t−1}; U) + b)
//! h_t  = α·h̃_t + β·h_{t−1}
//! x̂_{t+1} = conv(h_t; V) + z
//! ```
//!
//! `α = 1, β = 0` is the plain (graph) RNN. The convolution family decides
//! what `conv` means: a Chebyshev filter on `L̃`, a first-order filter
//! `S·X·W` (with `S = L̃₁` by default), or a dense matrix product for the
//! regular-domain FRNN baseline.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{ensure, Error, Result};
use crate::gconv::{
    cheb_conv, cheb_conv_backward, propagate_conv, propagate_conv_backward, ChebFilter,
    FeatureTransform,
};
use crate::graph::LaplacianSet;
use crate::linalg::{DenseMatrix, SparseMatrix};
use crate::rng::SeededRng;

/// Per-node hidden features, `N × P` (or `P × F` for the dense baseline).
pub type HiddenState = DenseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConvFamily {
    Chebyshev,
    FirstOrder,
    Dense,
}

impl ConvFamily {
    pub const NAMES: &'static [&'static str] = &["chebyshev", "first_order", "dense"];

    pub fn name(self) -> &'static str {
        match self {
            ConvFamily::Chebyshev => "chebyshev",
            ConvFamily::FirstOrder => "first_order",
            ConvFamily::Dense => "dense",
        }
    }
}

impl FromStr for ConvFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chebyshev" | "cheb" => Ok(ConvFamily::Chebyshev),
            "first_order" | "first-order" => Ok(ConvFamily::FirstOrder),
            "dense" | "frnn" => Ok(ConvFamily::Dense),
            _ => Err(Error::config(format!(
                "unknown convolution family `{s}` (valid: {})",
                Self::NAMES.join(", ")
            ))),
        }
    }
}

impl fmt::Display for ConvFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Node operator used by the first-order family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Propagation {
    /// `L̃₁ = I + D^{-1/2} A D^{-1/2}`
    #[default]
    FirstOrder,
    /// The normalized Laplacian `L` itself.
    Laplacian,
}

impl Propagation {
    pub fn name(self) -> &'static str {
        match self {
            Propagation::FirstOrder => "first_order",
            Propagation::Laplacian => "laplacian",
        }
    }

    pub fn operator(self, lap: &LaplacianSet) -> &SparseMatrix {
        match self {
            Propagation::FirstOrder => &lap.first_order,
            Propagation::Laplacian => &lap.laplacian,
        }
    }
}

impl FromStr for Propagation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first_order" | "first-order" => Ok(Propagation::FirstOrder),
            "laplacian" => Ok(Propagation::Laplacian),
            _ => Err(Error::config(format!(
                "unknown propagation operator `{s}` (valid: first_order, laplacian)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
        }
    }

    #[inline]
    pub fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => a.tanh(),
            Activation::Relu => a.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-a).exp()),
        }
    }

    /// `σ′(a)`, evaluated at the pre-activation. `relu′(0) = 0`.
    #[inline]
    pub fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = a.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-a).exp());
                s * (1.0 - s)
            }
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            _ => Err(Error::config(format!(
                "unknown activation `{s}` (valid: tanh, relu, sigmoid)"
            ))),
        }
    }
}

/// A filter of one of the three families.
#[derive(Clone, Debug, PartialEq)]
pub enum Filter {
    Chebyshev(ChebFilter),
    FirstOrder(FeatureTransform),
    /// `out × in` matrix applied on the left.
    Dense(DenseMatrix),
}

impl Filter {
    pub fn family(&self) -> ConvFamily {
        match self {
            Filter::Chebyshev(_) => ConvFamily::Chebyshev,
            Filter::FirstOrder(_) => ConvFamily::FirstOrder,
            Filter::Dense(_) => ConvFamily::Dense,
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            Filter::Chebyshev(c) => c.coeffs(),
            Filter::FirstOrder(t) => t.weights.as_slice(),
            Filter::Dense(m) => m.as_slice(),
        }
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        match self {
            Filter::Chebyshev(c) => c.coeffs_mut(),
            Filter::FirstOrder(t) => t.weights.as_mut_slice(),
            Filter::Dense(m) => m.as_mut_slice(),
        }
    }

    pub fn len(&self) -> usize {
        self.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.values().is_empty()
    }

    /// Same shape, all zeros.
    pub fn zeros_like(&self) -> Filter {
        let mut f = self.clone();
        f.values_mut().iter_mut().for_each(|v| *v = 0.0);
        f
    }

    /// Dense view of the parameter values (`1 × K` for Chebyshev).
    pub fn as_matrix(&self) -> DenseMatrix {
        match self {
            Filter::Chebyshev(c) => {
                DenseMatrix::from_vec(1, c.order(), c.coeffs().to_vec()).expect("1xK")
            }
            Filter::FirstOrder(t) => t.weights.clone(),
            Filter::Dense(m) => m.clone(),
        }
    }

    fn add_assign(&mut self, other: &Filter) {
        for (a, b) in self.values_mut().iter_mut().zip(other.values()) {
            *a += b;
        }
    }
}

/// Resolves filter applications against a graph (or none, for dense).
#[derive(Clone, Copy)]
pub(crate) struct Conv<'a> {
    lap: Option<&'a LaplacianSet>,
    propagation: Propagation,
}

impl<'a> Conv<'a> {
    pub(crate) fn new(lap: Option<&'a LaplacianSet>, propagation: Propagation) -> Self {
        Self { lap, propagation }
    }

    fn lap(&self) -> Result<&'a LaplacianSet> {
        self.lap
            .ok_or_else(|| Error::contract("graph filters need a Laplacian set"))
    }

    pub(crate) fn apply(&self, filter: &Filter, x: &DenseMatrix) -> Result<DenseMatrix> {
        match filter {
            Filter::Chebyshev(c) => cheb_conv(self.lap()?, x, c),
            Filter::FirstOrder(t) => propagate_conv(self.propagation.operator(self.lap()?), x, t),
            Filter::Dense(w) => w.matmul(x),
        }
    }

    /// Returns `(∂/∂x, ∂/∂filter)`.
    pub(crate) fn backward(
        &self,
        filter: &Filter,
        x: &DenseMatrix,
        upstream: &DenseMatrix,
    ) -> Result<(DenseMatrix, Filter)> {
        match filter {
            Filter::Chebyshev(c) => {
                let (gx, gc) = cheb_conv_backward(self.lap()?, x, c, upstream)?;
                Ok((gx, Filter::Chebyshev(ChebFilter::new(gc)?)))
            }
            Filter::FirstOrder(t) => {
                let op = self.propagation.operator(self.lap()?);
                let (gx, gw) = propagate_conv_backward(op, x, t, upstream)?;
                Ok((gx, Filter::FirstOrder(FeatureTransform { weights: gw })))
            }
            Filter::Dense(w) => {
                ensure(upstream.n_rows() == w.n_rows(), || {
                    "dense filter backward dimension mismatch".into()
                })?;
                Ok((w.t_matmul(upstream)?, Filter::Dense(upstream.matmul_t(x)?)))
            }
        }
    }
}

/// Dimensions of a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelShape {
    pub family: ConvFamily,
    /// `N`
    pub n_nodes: usize,
    /// `F`, features per node in the data.
    pub n_features: usize,
    /// `P`, hidden features. Forced to `F` for Chebyshev.
    pub hidden: usize,
    /// `K`, Chebyshev order. Ignored by other families.
    pub order: usize,
}

/// The trainable set `Θ = {W, U, V, α, β, b, z}` plus the fixed choices
/// that define the cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub activation: Activation,
    pub propagation: Propagation,
    /// `W`
    pub input_filter: Filter,
    /// `U`
    pub recurrent_filter: Filter,
    /// `V`
    pub readout_filter: Filter,
    pub alpha: f64,
    pub beta: f64,
    /// `b`, one entry per row of the hidden state.
    pub bias: Vec<f64>,
    /// `z`, one entry per node.
    pub readout_bias: Vec<f64>,
}

impl ModelParams {
    /// Filters uniform in `[−init_scale, init_scale]`, `α = β = 0.5`,
    /// biases zero.
    pub fn init(
        shape: ModelShape,
        activation: Activation,
        propagation: Propagation,
        init_scale: f64,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let ModelShape {
            family,
            n_nodes: n,
            n_features: f,
            hidden: p,
            order: k,
        } = shape;
        ensure(n >= 1 && f >= 1, || "model needs N >= 1 and F >= 1".into())?;
        let mut draw = |len: usize| -> Vec<f64> {
            (0..len)
                .map(|_| {
                    if init_scale > 0.0 {
                        rng.random_range(-init_scale..=init_scale)
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        let (w, u, v, bias_len) = match family {
            ConvFamily::Chebyshev => {
                ensure(k >= 1, || "Chebyshev order K must be >= 1".into())?;
                let mk = |vals| Filter::Chebyshev(ChebFilter::new(vals).expect("finite"));
                (mk(draw(k)), mk(draw(k)), mk(draw(k)), n)
            }
            ConvFamily::FirstOrder => {
                ensure(p >= 1, || "hidden size P must be >= 1".into())?;
                let mk = |r, c, vals| {
                    Filter::FirstOrder(FeatureTransform {
                        weights: DenseMatrix::from_vec(r, c, vals).expect("sized"),
                    })
                };
                (
                    mk(f, p, draw(f * p)),
                    mk(p, p, draw(p * p)),
                    mk(p, f, draw(p * f)),
                    n,
                )
            }
            ConvFamily::Dense => {
                ensure(p >= 1, || "hidden size P must be >= 1".into())?;
                let mk =
                    |r, c, vals| Filter::Dense(DenseMatrix::from_vec(r, c, vals).expect("sized"));
                (
                    mk(p, n, draw(p * n)),
                    mk(p, p, draw(p * p)),
                    mk(n, p, draw(n * p)),
                    p,
                )
            }
        };
        let params = ModelParams {
            activation,
            propagation,
            input_filter: w,
            recurrent_filter: u,
            readout_filter: v,
            alpha: 0.5,
            beta: 0.5,
            bias: vec![0.0; bias_len],
            readout_bias: vec![0.0; n],
        };
        params.validate()?;
        Ok(params)
    }

    pub fn family(&self) -> ConvFamily {
        self.input_filter.family()
    }

    pub fn n_nodes(&self) -> usize {
        self.readout_bias.len()
    }

    /// Rows of the hidden state (`N`, or `P` for the dense baseline).
    pub fn hidden_rows(&self) -> usize {
        self.bias.len()
    }

    /// Columns of the hidden state for an input with `n_features` columns.
    pub fn hidden_cols(&self, n_features: usize) -> usize {
        match &self.recurrent_filter {
            Filter::FirstOrder(t) => t.out_features(),
            _ => n_features,
        }
    }

    /// Chebyshev order `K` when applicable.
    pub fn order(&self) -> Option<usize> {
        match &self.input_filter {
            Filter::Chebyshev(c) => Some(c.order()),
            _ => None,
        }
    }

    /// Checks family consistency and dimensions.
    pub fn validate(&self) -> Result<()> {
        let fam = self.family();
        ensure(
            self.recurrent_filter.family() == fam && self.readout_filter.family() == fam,
            || "all three filters must share one convolution family".into(),
        )?;
        ensure(
            self.alpha.is_finite()
                && self.beta.is_finite()
                && self.flat_values().all(|v| v.is_finite()),
            || "model parameters must be finite".into(),
        )?;
        match (
            &self.input_filter,
            &self.recurrent_filter,
            &self.readout_filter,
        ) {
            (Filter::Chebyshev(_), Filter::Chebyshev(_), Filter::Chebyshev(_)) => {
                ensure(self.bias.len() == self.readout_bias.len(), || {
                    "b and z must both have one entry per node".into()
                })
            }
            (Filter::FirstOrder(w), Filter::FirstOrder(u), Filter::FirstOrder(v)) => {
                let p = u.in_features();
                ensure(
                    u.out_features() == p
                        && w.out_features() == p
                        && v.in_features() == p
                        && v.out_features() == w.in_features(),
                    || {
                        format!(
                            "first-order shapes inconsistent: W {}x{}, U {}x{}, V {}x{}",
                            w.in_features(),
                            w.out_features(),
                            u.in_features(),
                            u.out_features(),
                            v.in_features(),
                            v.out_features()
                        )
                    },
                )?;
                ensure(self.bias.len() == self.readout_bias.len(), || {
                    "b and z must both have one entry per node".into()
                })
            }
            (Filter::Dense(w), Filter::Dense(u), Filter::Dense(v)) => {
                let p = u.n_rows();
                let n = self.readout_bias.len();
                ensure(
                    u.n_cols() == p
                        && w.n_rows() == p
                        && w.n_cols() == n
                        && v.n_rows() == n
                        && v.n_cols() == p
                        && self.bias.len() == p,
                    || "dense FRNN shapes inconsistent (W: PxN, U: PxP, V: NxP, b: P, z: N)".into(),
                )
            }
            _ => unreachable!("families checked above"),
        }
    }

    /// Number of trainable scalars.
    pub fn n_scalars(&self) -> usize {
        self.input_filter.len()
            + self.recurrent_filter.len()
            + self.readout_filter.len()
            + 2
            + self.bias.len()
            + self.readout_bias.len()
    }

    fn flat_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.input_filter
            .values()
            .iter()
            .chain(self.recurrent_filter.values())
            .chain(self.readout_filter.values())
            .chain([&self.alpha, &self.beta])
            .chain(&self.bias)
            .chain(&self.readout_bias)
            .copied()
    }

    /// All trainable scalars in the fixed order `W, U, V, α, β, b, z`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.flat_values().collect()
    }

    /// Inverse of [`ModelParams::to_flat`].
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        ensure(flat.len() == self.n_scalars(), || {
            format!(
                "flat parameter vector has {} entries, model has {}",
                flat.len(),
                self.n_scalars()
            )
        })?;
        let mut rest = flat;
        for slot in [
            self.input_filter.values_mut(),
            self.recurrent_filter.values_mut(),
            self.readout_filter.values_mut(),
        ] {
            let (head, tail) = rest.split_at(slot.len());
            slot.copy_from_slice(head);
            rest = tail;
        }
        self.alpha = rest[0];
        self.beta = rest[1];
        rest = &rest[2..];
        let (b, z) = rest.split_at(self.bias.len());
        self.bias.copy_from_slice(b);
        self.readout_bias.copy_from_slice(z);
        Ok(())
    }

    pub(crate) fn conv<'a>(&self, lap: Option<&'a LaplacianSet>) -> Conv<'a> {
        Conv::new(lap, self.propagation)
    }
}

/// Gradients of a scalar loss with respect to every entry of `Θ`, shaped
/// like [`ModelParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    pub input_filter: Filter,
    pub recurrent_filter: Filter,
    pub readout_filter: Filter,
    pub alpha: f64,
    pub beta: f64,
    pub bias: Vec<f64>,
    pub readout_bias: Vec<f64>,
}

impl GradientSet {
    pub fn zeros_like(p: &ModelParams) -> Self {
        Self {
            input_filter: p.input_filter.zeros_like(),
            recurrent_filter: p.recurrent_filter.zeros_like(),
            readout_filter: p.readout_filter.zeros_like(),
            alpha: 0.0,
            beta: 0.0,
            bias: vec![0.0; p.bias.len()],
            readout_bias: vec![0.0; p.readout_bias.len()],
        }
    }

    /// Same ordering as [`ModelParams::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        self.input_filter
            .values()
            .iter()
            .chain(self.recurrent_filter.values())
            .chain(self.readout_filter.values())
            .chain([&self.alpha, &self.beta])
            .chain(&self.bias)
            .chain(&self.readout_bias)
            .copied()
            .collect()
    }

    pub(crate) fn add_input(&mut self, g: &Filter) {
        self.input_filter.add_assign(g);
    }

    pub(crate) fn add_recurrent(&mut self, g: &Filter) {
        self.recurrent_filter.add_assign(g);
    }

    pub(crate) fn add_readout(&mut self, g: &Filter) {
        self.readout_filter.add_assign(g);
    }
}

/// Intermediate values of one recurrent step.
#[derive(Clone, Debug, PartialEq)]
pub struct CellStep {
    /// `conv(x; W) + conv(h_prev; U) + b`
    pub pre_activation: DenseMatrix,
    pub h_tilde: HiddenState,
    pub h: HiddenState,
}

pub(crate) fn step_with(
    p: &ModelParams,
    conv: Conv<'_>,
    h_prev: &HiddenState,
    x: &DenseMatrix,
) -> Result<CellStep> {
    let mut pre = conv.apply(&p.input_filter, x)?;
    let rec = conv.apply(&p.recurrent_filter, h_prev)?;
    ensure(pre.shape() == rec.shape(), || {
        format!(
            "input path gives {}x{} but recurrent path gives {}x{}",
            pre.n_rows(),
            pre.n_cols(),
            rec.n_rows(),
            rec.n_cols()
        )
    })?;
    ensure(h_prev.shape() == rec.shape(), || {
        format!(
            "hidden state is {}x{}, cell produces {}x{}",
            h_prev.n_rows(),
            h_prev.n_cols(),
            rec.n_rows(),
            rec.n_cols()
        )
    })?;
    pre.axpy(1.0, &rec)?;
    pre.add_row_bias(&p.bias)?;
    if !pre.is_finite() {
        return Err(Error::NumericOverflow {
            what: "pre-activation",
            step: None,
        });
    }
    let act = p.activation;
    let h_tilde = pre.map(|a| act.apply(a));
    let mut h = h_tilde.scale(p.alpha);
    h.axpy(p.beta, h_prev)?;
    if !h.is_finite() {
        return Err(Error::NumericOverflow {
            what: "hidden state",
            step: None,
        });
    }
    Ok(CellStep {
        pre_activation: pre,
        h_tilde,
        h,
    })
}

/// One FGRNN step on a graph signal `x` (`N × F`).
pub fn fgrnn_step(
    p: &ModelParams,
    lap: &LaplacianSet,
    h_prev: &HiddenState,
    x: &DenseMatrix,
) -> Result<CellStep> {
    ensure(
        x.n_rows() == lap.n_nodes() || p.family() == ConvFamily::Dense,
        || {
            format!(
                "signal has {} rows, graph has {} nodes",
                x.n_rows(),
                lap.n_nodes()
            )
        },
    )?;
    step_with(p, p.conv(Some(lap)), h_prev, x)
}

/// One step of the regular-domain FRNN: `W·x`, `U·h` are dense products.
pub fn frnn_step(p: &ModelParams, h_prev: &HiddenState, x: &DenseMatrix) -> Result<CellStep> {
    ensure(p.family() == ConvFamily::Dense, || {
        format!("frnn_step needs the dense family, got {}", p.family())
    })?;
    step_with(p, p.conv(None), h_prev, x)
}

pub(crate) fn readout_with(
    p: &ModelParams,
    conv: Conv<'_>,
    h: &HiddenState,
) -> Result<DenseMatrix> {
    let mut out = conv.apply(&p.readout_filter, h)?;
    out.add_row_bias(&p.readout_bias)?;
    Ok(out)
}

/// `x̂ = conv(h; V) + z`.
pub fn readout(p: &ModelParams, lap: &LaplacianSet, h: &HiddenState) -> Result<DenseMatrix> {
    readout_with(p, p.conv(Some(lap)), h)
}

/// Zero hidden state sized for inputs with `n_features` columns.
pub fn initial_state(p: &ModelParams, n_features: usize) -> HiddenState {
    DenseMatrix::zeros(p.hidden_rows(), p.hidden_cols(n_features))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_laplacians, Graph};
    use crate::rng::seeded;

    fn ring_lap(n: usize) -> LaplacianSet {
        let g = Graph::new(n, (0..n).map(|i| (i, (i + 1) % n, 1.0))).unwrap();
        build_laplacians(&g, 1e-14).unwrap()
    }

    fn shape(family: ConvFamily, n: usize, f: usize, p: usize, k: usize) -> ModelShape {
        ModelShape {
            family,
            n_nodes: n,
            n_features: f,
            hidden: p,
            order: k,
        }
    }

    fn random_params(family: ConvFamily, seed: u64) -> ModelParams {
        let mut rng = seeded(seed);
        let mut p = ModelParams::init(
            shape(family, 6, 2, 2, 3),
            Activation::Tanh,
            Propagation::FirstOrder,
            0.5,
            &mut rng,
        )
        .unwrap();
        p.bias
            .iter_mut()
            .enumerate()
            .for_each(|(i, b)| *b = 0.1 * i as f64);
        p
    }

    fn signal(n: usize, f: usize, s: f64) -> DenseMatrix {
        DenseMatrix::from_fn(n, f, |i, j| ((i * 3 + j) as f64 * s).sin())
    }

    #[test]
    fn alpha_one_beta_zero_is_standard_rnn() {
        let lap = ring_lap(6);
        for fam in [ConvFamily::Chebyshev, ConvFamily::FirstOrder] {
            let mut p = random_params(fam, 3);
            p.alpha = 1.0;
            p.beta = 0.0;
            let h_prev = signal(6, 2, 0.7);
            let x = signal(6, 2, 1.3);
            let step = fgrnn_step(&p, &lap, &h_prev, &x).unwrap();
            assert_eq!(step.h, step.h_tilde);

            let conv = p.conv(Some(&lap));
            let mut pre = conv.apply(&p.input_filter, &x).unwrap();
            pre.axpy(1.0, &conv.apply(&p.recurrent_filter, &h_prev).unwrap())
                .unwrap();
            pre.add_row_bias(&p.bias).unwrap();
            assert_eq!(step.h, pre.map(f64::tanh));
        }
    }

    #[test]
    fn pure_residual_ignores_input() {
        let lap = ring_lap(6);
        let mut p = random_params(ConvFamily::Chebyshev, 4);
        p.alpha = 0.0;
        p.beta = 1.0;
        let h_prev = signal(6, 2, 0.4);
        for s in [0.1, 5.0] {
            let step = fgrnn_step(&p, &lap, &h_prev, &signal(6, 2, s)).unwrap();
            assert_eq!(step.h, h_prev);
        }
    }

    #[test]
    fn zero_filters_on_edgeless_graph() {
        let lap = build_laplacians(&Graph::new(4, []).unwrap(), 1e-12).unwrap();
        let mut rng = seeded(0);
        let mut p = ModelParams::init(
            shape(ConvFamily::FirstOrder, 4, 3, 3, 1),
            Activation::Tanh,
            Propagation::FirstOrder,
            0.0,
            &mut rng,
        )
        .unwrap();
        p.beta = 0.3;
        let h_prev = signal(4, 3, 0.9);
        let step = fgrnn_step(&p, &lap, &h_prev, &signal(4, 3, 2.0)).unwrap();
        assert_eq!(step.h_tilde, DenseMatrix::zeros(4, 3));
        assert_eq!(step.h, h_prev.scale(0.3));
    }

    #[test]
    fn relu_positive_regime_is_linear() {
        let lap = ring_lap(6);
        let mut p = random_params(ConvFamily::FirstOrder, 5);
        p.activation = Activation::Relu;
        p.bias = vec![10.0; 6];
        let step = fgrnn_step(&p, &lap, &signal(6, 2, 0.3), &signal(6, 2, 0.8)).unwrap();
        assert!(step.pre_activation.as_slice().iter().all(|&a| a > 0.0));
        assert_eq!(step.h_tilde, step.pre_activation);
    }

    #[test]
    fn frnn_reductions() {
        let mut rng = seeded(1);
        let mut p = ModelParams::init(
            shape(ConvFamily::Dense, 3, 1, 3, 1),
            Activation::Tanh,
            Propagation::FirstOrder,
            0.0,
            &mut rng,
        )
        .unwrap();
        p.beta = 0.25;
        let h_prev = signal(3, 1, 0.5);
        let step = frnn_step(&p, &h_prev, &signal(3, 1, 1.0)).unwrap();
        assert_eq!(step.h, h_prev.scale(0.25));

        // scalar fixed point at the origin
        let mut rng = seeded(2);
        let mut p = ModelParams::init(
            shape(ConvFamily::Dense, 1, 1, 1, 1),
            Activation::Tanh,
            Propagation::FirstOrder,
            0.0,
            &mut rng,
        )
        .unwrap();
        p.input_filter = Filter::Dense(DenseMatrix::identity(1));
        p.recurrent_filter = Filter::Dense(DenseMatrix::identity(1));
        let step = frnn_step(&p, &DenseMatrix::zeros(1, 1), &DenseMatrix::zeros(1, 1)).unwrap();
        assert_eq!(step.h, DenseMatrix::zeros(1, 1));

        // α=1, β=0 gives tanh(Wx + Uh + b)
        let mut p = random_params(ConvFamily::Dense, 9);
        p.alpha = 1.0;
        p.beta = 0.0;
        let x = signal(6, 2, 0.2);
        let h = DenseMatrix::filled(2, 2, 0.1);
        let step = frnn_step(&p, &h, &x).unwrap();
        let (Filter::Dense(w), Filter::Dense(u)) = (&p.input_filter, &p.recurrent_filter) else {
            unreachable!()
        };
        let mut pre = w.matmul(&x).unwrap().add(&u.matmul(&h).unwrap()).unwrap();
        pre.add_row_bias(&p.bias).unwrap();
        assert_eq!(step.h, pre.map(f64::tanh));
    }

    #[test]
    fn frnn_step_rejects_graph_family() {
        let p = random_params(ConvFamily::Chebyshev, 1);
        assert!(frnn_step(&p, &DenseMatrix::zeros(6, 2), &DenseMatrix::zeros(6, 2)).is_err());
    }

    #[test]
    fn readout_cases() {
        let lap = ring_lap(6);
        let mut p = random_params(ConvFamily::Chebyshev, 6);
        p.readout_filter = Filter::Chebyshev(ChebFilter::new(vec![0.0, 0.0, 0.0]).unwrap());
        p.readout_bias = (0..6).map(|i| i as f64).collect();
        let out = readout(&p, &lap, &signal(6, 2, 1.1)).unwrap();
        for i in 0..6 {
            assert_eq!(out.row(i), &[i as f64, i as f64]);
        }

        p.readout_filter = Filter::Chebyshev(ChebFilter::new(vec![1.5]).unwrap());
        p.readout_bias = vec![0.0; 6];
        let h = signal(6, 2, 0.6);
        assert_eq!(readout(&p, &lap, &h).unwrap(), h.scale(1.5));

        let edgeless = build_laplacians(&Graph::new(6, []).unwrap(), 1e-12).unwrap();
        let mut p = random_params(ConvFamily::FirstOrder, 7);
        p.readout_filter = Filter::FirstOrder(FeatureTransform {
            weights: DenseMatrix::identity(2),
        });
        p.readout_bias = vec![0.0; 6];
        assert_eq!(readout(&p, &edgeless, &h).unwrap(), h);
    }

    #[test]
    fn non_finite_pre_activation_is_reported() {
        let lap = ring_lap(6);
        let p = random_params(ConvFamily::Chebyshev, 8);
        let mut x = signal(6, 2, 1.0);
        x[(0, 0)] = f64::INFINITY;
        let err = fgrnn_step(&p, &lap, &DenseMatrix::zeros(6, 2), &x).unwrap_err();
        assert!(matches!(err, Error::NumericOverflow { .. }));
    }

    #[test]
    fn flat_round_trip_and_counts() {
        let mut p = random_params(ConvFamily::FirstOrder, 11);
        let flat = p.to_flat();
        assert_eq!(flat.len(), p.n_scalars());
        let shifted: Vec<f64> = flat.iter().map(|v| v + 1.0).collect();
        p.assign_flat(&shifted).unwrap();
        assert_eq!(p.to_flat(), shifted);
        assert!(p.assign_flat(&flat[1..]).is_err());
        assert_eq!(GradientSet::zeros_like(&p).to_flat().len(), p.n_scalars());
    }

    #[test]
    fn mixed_families_are_rejected() {
        let mut p = random_params(ConvFamily::Chebyshev, 12);
        p.readout_filter = Filter::FirstOrder(FeatureTransform {
            weights: DenseMatrix::identity(2),
        });
        assert!(p.validate().is_err());
    }

    #[test]
    fn activation_derivatives_match_differences() {
        for act in [Activation::Tanh, Activation::Sigmoid, Activation::Relu] {
            for &a in &[-1.3, -0.2, 0.4, 2.0] {
                let h = 1e-6;
                let fd = (act.apply(a + h) - act.apply(a - h)) / (2.0 * h);
                assert!((fd - act.derivative(a)).abs() < 1e-8, "{act:?} at {a}");
            }
        }
        assert_eq!(Activation::Tanh.derivative(0.0), 1.0);
    }
}
