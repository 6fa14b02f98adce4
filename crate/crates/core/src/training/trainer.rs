use crate::cells::{
    initial_state, readout_with, step_with, Activation, ConvFamily, ModelParams, ModelShape,
    Propagation,
};
use crate::data::{copy_last_loss, split_index, FrameSequence, GraphSource};
use crate::error::{ensure, Error, Result};
use crate::graph::{build_laplacians, Graph, LaplacianSet};
use crate::linalg::DenseMatrix;
use crate::rng::seeded;

use super::adam::{adam_step, AdamState};
use super::bptt::bptt;
use super::loss::{prediction_loss, LossKind};

/// Power-iteration tolerance used when training builds its Laplacians.
pub const LAPLACIAN_TOL: f64 = 1e-12;

/// Everything that controls a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub family: ConvFamily,
    /// Chebyshev order `K`.
    pub order: usize,
    /// Hidden features `P` (first-order and dense families).
    pub hidden: usize,
    /// Unrolled steps per window, `T_w`.
    pub window: usize,
    /// Offset between consecutive windows; `None` means `window`.
    pub stride: Option<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub split: f64,
    pub activation: Activation,
    pub propagation: Propagation,
    pub lambda_reg: f64,
    pub seed: u64,
    pub init_scale: f64,
    pub k_neighbors: usize,
    pub graph_source: GraphSource,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            family: ConvFamily::Chebyshev,
            order: 3,
            hidden: 3,
            window: 10,
            stride: None,
            epochs: 10,
            lr: 1e-2,
            lr_decay: 0.9,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            split: 0.8,
            activation: Activation::Tanh,
            propagation: Propagation::FirstOrder,
            lambda_reg: 0.0,
            seed: 0,
            init_scale: 0.1,
            k_neighbors: 6,
            graph_source: GraphSource::FirstFrame,
        }
    }
}

impl TrainConfig {
    pub fn stride(&self) -> usize {
        self.stride.unwrap_or(self.window)
    }

    pub fn loss_kind(&self) -> LossKind {
        LossKind::from_lambda(self.lambda_reg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config(m));
        if self.window < 1 {
            return bad("window length T_w must be >= 1".into());
        }
        if self.stride() < 1 {
            return bad("stride must be >= 1".into());
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return bad(format!("split must lie in (0, 1), got {}", self.split));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay.is_finite()) {
            return bad(format!("lr_decay must be positive, got {}", self.lr_decay));
        }
        if self.lambda_reg < 0.0 {
            return bad(format!("lambda_reg must be >= 0, got {}", self.lambda_reg));
        }
        if self.family == ConvFamily::Chebyshev && self.order < 1 {
            return bad("K must be >= 1".into());
        }
        if self.family != ConvFamily::Chebyshev && self.hidden < 1 {
            return bad("P must be >= 1".into());
        }
        Ok(())
    }

    pub fn model_shape(&self, n_nodes: usize, n_features: usize) -> ModelShape {
        ModelShape {
            family: self.family,
            n_nodes,
            n_features,
            hidden: match self.family {
                ConvFamily::Chebyshev => n_features,
                _ => self.hidden,
            },
            order: self.order,
        }
    }

    pub fn new_optimizer(&self, n_params: usize) -> AdamState {
        let mut s = AdamState::new(n_params, self.lr, self.lr_decay);
        s.beta1 = self.adam_beta1;
        s.beta2 = self.adam_beta2;
        s.epsilon = self.adam_epsilon;
        s
    }

    /// Seeded initial parameters for a dataset shape.
    pub fn init_params(&self, n_nodes: usize, n_features: usize) -> Result<ModelParams> {
        let mut rng = seeded(self.seed);
        ModelParams::init(
            self.model_shape(n_nodes, n_features),
            self.activation,
            self.propagation,
            self.init_scale,
            &mut rng,
        )
    }
}

/// One row of the training history.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based, continues across resumed runs.
    pub epoch: usize,
    /// Mean `J_t` over the epoch's training windows.
    pub train_loss: f64,
    /// Mean `J_t` over test transitions, warm-started from the training
    /// partition.
    pub test_loss: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Learning rate used during the epoch.
    pub lr: f64,
}

/// Model and optimiser state sufficient to continue training.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub params: ModelParams,
    pub optimizer: AdamState,
    pub epochs_done: usize,
}

/// Outcome of [`train`]. When a numeric failure aborts training,
/// `failure` holds it and `history` the epochs completed before it.
#[derive(Debug)]
pub struct TrainRun {
    pub config: TrainConfig,
    pub history: Vec<EpochRecord>,
    pub state: TrainState,
    /// Copy-last-frame loss over the same test transitions.
    pub test_baseline: f64,
    pub failure: Option<Error>,
}

impl TrainRun {
    pub fn final_params(&self) -> &ModelParams {
        &self.state.params
    }

    pub fn alpha_history(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.alpha).collect()
    }

    pub fn beta_history(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.beta).collect()
    }

    pub fn epoch_losses(&self) -> Vec<(f64, f64)> {
        self.history
            .iter()
            .map(|r| (r.train_loss, r.test_loss))
            .collect()
    }

    pub fn history_csv(&self) -> String {
        history_csv(&self.history)
    }
}

pub const HISTORY_HEADER: &str = "epoch,train_loss,test_loss,alpha,beta,lr";

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from(HISTORY_HEADER);
    s.push('\n');
    for r in history {
        s.push_str(&format!(
            "{},{:e},{:e},{:e},{:e},{:e}\n",
            r.epoch, r.train_loss, r.test_loss, r.alpha, r.beta, r.lr
        ));
    }
    s
}

/// Start indices of the training windows (each `window + 1` frames long).
pub fn window_starts(n_frames: usize, window: usize, stride: usize) -> Vec<usize> {
    if n_frames < window + 1 || stride == 0 {
        return Vec::new();
    }
    (0..=n_frames - window - 1).step_by(stride).collect()
}

/// Teacher-forced one-step predictions over a sequence from `h₀ = 0`:
/// element `t` is the prediction of frame `t + 1` after consuming frames
/// `0..=t`.
pub fn one_step_predictions(
    p: &ModelParams,
    lap: &LaplacianSet,
    frames: &[DenseMatrix],
) -> Result<Vec<DenseMatrix>> {
    let conv = p.conv(Some(lap));
    let Some(first) = frames.first() else {
        return Ok(Vec::new());
    };
    let mut h = initial_state(p, first.n_cols());
    let mut out = Vec::with_capacity(frames.len());
    for (t, x) in frames.iter().enumerate() {
        let step = step_with(p, conv, &h, x).map_err(|e| e.at_step(t + 1))?;
        out.push(readout_with(p, conv, &step.h)?);
        h = step.h;
    }
    Ok(out)
}

/// Warms the hidden state up on `context` (teacher forcing), then predicts
/// `horizon` further frames, feeding each prediction back as the next input.
pub fn rollout(
    p: &ModelParams,
    lap: &LaplacianSet,
    context: &[DenseMatrix],
    horizon: usize,
) -> Result<Vec<DenseMatrix>> {
    ensure(!context.is_empty(), || {
        "rollout needs at least one context frame".into()
    })?;
    if horizon == 0 {
        return Ok(Vec::new());
    }
    let conv = p.conv(Some(lap));
    let mut h = initial_state(p, context[0].n_cols());
    let mut x_hat = None;
    for (t, x) in context.iter().enumerate() {
        let step = step_with(p, conv, &h, x).map_err(|e| e.at_step(t + 1))?;
        h = step.h;
        if t + 1 == context.len() {
            x_hat = Some(readout_with(p, conv, &h)?);
        }
    }
    let mut out = vec![x_hat.expect("non-empty context")];
    while out.len() < horizon {
        let t = context.len() + out.len();
        let step =
            step_with(p, conv, &h, out.last().expect("non-empty")).map_err(|e| e.at_step(t))?;
        h = step.h;
        out.push(readout_with(p, conv, &h)?);
    }
    if out.iter().any(|f| !f.is_finite()) {
        return Err(Error::NumericOverflow {
            what: "rollout prediction",
            step: None,
        });
    }
    Ok(out)
}

/// Per-transition losses `J_t = ‖x_{t+1} − x̂_{t+1}‖²` for every transition
/// of `frames`, teacher-forced from `h₀ = 0`.
pub fn transition_losses(
    p: &ModelParams,
    lap: &LaplacianSet,
    frames: &[DenseMatrix],
) -> Result<Vec<f64>> {
    if frames.len() < 2 {
        return Ok(Vec::new());
    }
    let preds = one_step_predictions(p, lap, &frames[..frames.len() - 1])?;
    preds
        .iter()
        .zip(&frames[1..])
        .map(|(xh, x)| prediction_loss(xh, x))
        .collect()
}

/// Mean `J_t` over the transitions into frames `first_target..`, with the
/// hidden state warmed up on everything before.
fn mean_loss_from(
    p: &ModelParams,
    lap: &LaplacianSet,
    frames: &[DenseMatrix],
    first_target: usize,
) -> Result<f64> {
    let losses = transition_losses(p, lap, frames)?;
    let tail = &losses[first_target - 1..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    if !mean.is_finite() {
        return Err(Error::NumericOverflow {
            what: "test loss",
            step: None,
        });
    }
    Ok(mean)
}

/// Trains from a fresh seeded initialisation.
pub fn train(config: &TrainConfig, dataset: &FrameSequence, graph: &Graph) -> Result<TrainRun> {
    config.validate()?;
    let params = config.init_params(dataset.n_nodes(), dataset.n_features())?;
    let optimizer = config.new_optimizer(params.n_scalars());
    resume(
        config,
        dataset,
        graph,
        TrainState {
            params,
            optimizer,
            epochs_done: 0,
        },
    )
}

/// Runs `config.epochs` further epochs from a saved state.
pub fn resume(
    config: &TrainConfig,
    dataset: &FrameSequence,
    graph: &Graph,
    mut state: TrainState,
) -> Result<TrainRun> {
    config.validate()?;
    ensure(graph.n_nodes() == dataset.n_nodes(), || {
        format!(
            "graph has {} nodes but frames have {}",
            graph.n_nodes(),
            dataset.n_nodes()
        )
    })
    .map_err(|e| Error::config(e.to_string()))?;
    state.params.validate()?;
    ensure(state.params.n_nodes() == dataset.n_nodes(), || {
        "model and dataset disagree on the node count".into()
    })?;

    let t = dataset.n_frames();
    ensure(t as f64 >= 2.0 / (1.0 - config.split), || {
        format!("{t} frames are too few for a {} split", config.split)
    })?;
    let cut = split_index(t, config.split);
    ensure(cut >= 1 && cut < t, || {
        "split leaves an empty partition".into()
    })?;
    let frames = dataset.frames();
    let train_frames = &frames[..cut];
    let starts = window_starts(cut, config.window, config.stride());
    ensure(!starts.is_empty(), || {
        format!(
            "training partition has {cut} frames, fewer than one window of {}",
            config.window + 1
        )
    })?;

    let lap = build_laplacians(graph, LAPLACIAN_TOL)?;
    let kind = config.loss_kind();
    let test_baseline = copy_last_loss(&frames[cut - 1..]);

    let mut history = Vec::with_capacity(config.epochs);
    let mut failure = None;
    for _ in 0..config.epochs {
        match run_epoch(&mut state, &lap, train_frames, &starts, config.window, kind) {
            Ok(train_loss) => {
                let lr = state.optimizer.learning_rate;
                state.optimizer.end_epoch();
                state.epochs_done += 1;
                let test_loss = match mean_loss_from(&state.params, &lap, frames, cut) {
                    Ok(v) => v,
                    Err(e) => {
                        failure = Some(e);
                        break;
                    }
                };
                history.push(EpochRecord {
                    epoch: state.epochs_done,
                    train_loss,
                    test_loss,
                    alpha: state.params.alpha,
                    beta: state.params.beta,
                    lr,
                });
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }

    Ok(TrainRun {
        config: config.clone(),
        history,
        state,
        test_baseline,
        failure,
    })
}

fn run_epoch(
    state: &mut TrainState,
    lap: &LaplacianSet,
    frames: &[DenseMatrix],
    starts: &[usize],
    window: usize,
    kind: LossKind,
) -> Result<f64> {
    let mut total = 0.0;
    for &s in starts {
        let (loss, grads) = bptt(&state.params, lap, &frames[s..s + window + 1], kind)?;
        adam_step(&mut state.optimizer, &mut state.params, &grads)?;
        if !state.params.to_flat().iter().all(|v| v.is_finite()) {
            return Err(Error::NumericOverflow {
                what: "parameter update",
                step: None,
            });
        }
        total += loss;
    }
    Ok(total / (starts.len() * window) as f64)
}

/// One row of a window-length sweep.
#[derive(Debug)]
pub struct SweepRow {
    pub window: usize,
    pub alpha: f64,
    pub beta: f64,
    pub test_loss: f64,
    /// Set when training for this window length failed.
    pub error: Option<String>,
}

pub const SWEEP_T_HEADER: &str = "T,final_alpha,final_beta,test_loss,error";

/// Trains one model per window length `T_w` on the same data and reports the
/// learned `(α, β)` and final test loss.
pub fn sweep_window_lengths(
    config: &TrainConfig,
    dataset: &FrameSequence,
    graph: &Graph,
    windows: &[usize],
) -> Result<Vec<SweepRow>> {
    ensure(!windows.is_empty(), || "window list is empty".into())
        .map_err(|e| Error::config(e.to_string()))?;
    for (i, w) in windows.iter().enumerate() {
        if windows[..i].contains(w) {
            return Err(Error::config(format!("duplicate window length {w}")));
        }
    }
    let mut rows = Vec::with_capacity(windows.len());
    for &w in windows {
        let cfg = TrainConfig {
            window: w,
            stride: config.stride,
            ..config.clone()
        };
        let row = match train(&cfg, dataset, graph) {
            Ok(run) => {
                let last = run.history.last().copied();
                SweepRow {
                    window: w,
                    alpha: run.state.params.alpha,
                    beta: run.state.params.beta,
                    test_loss: last.map_or(f64::NAN, |r| r.test_loss),
                    error: run.failure.map(|e| e.to_string()),
                }
            }
            Err(e) => SweepRow {
                window: w,
                alpha: f64::NAN,
                beta: f64::NAN,
                test_loss: f64::NAN,
                error: Some(e.to_string()),
            },
        };
        rows.push(row);
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_T_HEADER);
    s.push('\n');
    for r in rows {
        let err = r
            .error
            .as_deref()
            .map(|e| e.replace([',', '\n'], ";"))
            .unwrap_or_default();
        s.push_str(&format!(
            "{},{:e},{:e},{:e},{}\n",
            r.window, r.alpha, r.beta, r.test_loss, err
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticConfig};

    fn small_data(frames: usize) -> (FrameSequence, Graph) {
        generate_synthetic(&SyntheticConfig {
            n_nodes: 16,
            n_frames: frames,
            ..SyntheticConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn rollout_continues_teacher_forcing() {
        let (seq, g) = small_data(20);
        let lap = build_laplacians(&g, LAPLACIAN_TOL).unwrap();
        let p = TrainConfig::default().init_params(16, 3).unwrap();
        let frames = seq.frames();
        let tf = one_step_predictions(&p, &lap, &frames[..8]).unwrap();
        let roll = rollout(&p, &lap, &frames[..8], 3).unwrap();
        assert_eq!(roll.len(), 3);
        assert_eq!(roll[0], tf[7]);
        let mut fed = frames[..8].to_vec();
        fed.push(roll[0].clone());
        assert_eq!(roll[1], one_step_predictions(&p, &lap, &fed).unwrap()[8]);
        assert!(rollout(&p, &lap, &frames[..8], 0).unwrap().is_empty());
    }

    #[test]
    fn window_start_layout() {
        assert_eq!(window_starts(10, 3, 3), vec![0, 3, 6]);
        assert_eq!(window_starts(10, 3, 1), (0..=6).collect::<Vec<_>>());
        assert_eq!(window_starts(3, 3, 3), Vec::<usize>::new());
        assert_eq!(window_starts(4, 3, 3), vec![0]);
    }

    #[test]
    fn zero_epochs_returns_initialisation() {
        let (seq, g) = small_data(30);
        let cfg = TrainConfig {
            epochs: 0,
            window: 5,
            ..TrainConfig::default()
        };
        let run = train(&cfg, &seq, &g).unwrap();
        assert!(run.history.is_empty());
        assert_eq!(run.state.params, cfg.init_params(16, 3).unwrap());
        assert_eq!(run.history_csv(), format!("{HISTORY_HEADER}\n"));
    }

    #[test]
    fn history_has_one_row_per_epoch_and_is_deterministic() {
        let (seq, g) = small_data(40);
        let cfg = TrainConfig {
            epochs: 3,
            window: 5,
            ..TrainConfig::default()
        };
        let a = train(&cfg, &seq, &g).unwrap();
        let b = train(&cfg, &seq, &g).unwrap();
        assert_eq!(a.history.len(), 3);
        assert_eq!(a.history_csv(), b.history_csv());
        assert_eq!(a.state, b.state);
        assert_eq!(
            a.history.iter().map(|r| r.epoch).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
        assert!((a.history[1].lr - 0.009).abs() < 1e-15);
    }

    #[test]
    fn resuming_matches_a_single_run() {
        let (seq, g) = small_data(40);
        let full = TrainConfig {
            epochs: 4,
            window: 5,
            family: ConvFamily::FirstOrder,
            ..TrainConfig::default()
        };
        let once = train(&full, &seq, &g).unwrap();
        let half = TrainConfig {
            epochs: 2,
            ..full.clone()
        };
        let first = train(&half, &seq, &g).unwrap();
        let second = resume(&half, &seq, &g, first.state.clone()).unwrap();
        let mut joined = first.history.clone();
        joined.extend(second.history);
        assert_eq!(joined, once.history);
    }

    #[test]
    fn rejects_mismatched_graph_and_short_data() {
        let (seq, _) = small_data(30);
        let (_, other) = generate_synthetic(&SyntheticConfig {
            n_nodes: 12,
            n_frames: 2,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let cfg = TrainConfig {
            window: 5,
            ..TrainConfig::default()
        };
        assert!(matches!(train(&cfg, &seq, &other), Err(Error::Config(_))));

        let (short, g) = small_data(8);
        assert!(train(&cfg, &short, &g).is_err());
    }

    #[test]
    fn divergence_is_recorded_with_partial_history() {
        let (seq, g) = small_data(40);
        let cfg = TrainConfig {
            epochs: 5,
            window: 5,
            lr: 1e6,
            activation: Activation::Relu,
            family: ConvFamily::FirstOrder,
            ..TrainConfig::default()
        };
        let run = train(&cfg, &seq, &g).unwrap();
        assert!(run.failure.is_some(), "expected a numeric failure");
        assert!(run.history.len() < 5);
        assert!(matches!(run.failure, Some(Error::NumericOverflow { .. })));
    }

    #[test]
    fn sweep_rejects_duplicates() {
        let (seq, g) = small_data(30);
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        assert!(sweep_window_lengths(&cfg, &seq, &g, &[5, 5]).is_err());
        assert!(sweep_window_lengths(&cfg, &seq, &g, &[]).is_err());
        let rows = sweep_window_lengths(&cfg, &seq, &g, &[3, 5]).unwrap();
        assert_eq!(rows.len(), 2);
        let single = train(&TrainConfig { window: 3, ..cfg }, &seq, &g).unwrap();
        assert_eq!(rows[0].beta, single.state.params.beta);
        assert_eq!(rows[0].test_loss, single.history[0].test_loss);
    }
}
