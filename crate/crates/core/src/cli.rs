//! Library side of the `fgrnn` command-line tool. Each `run_*` function is
//! one subcommand; the binary only parses arguments and maps errors to exit
//! codes.

use std::fs;
use std::path::{Path, PathBuf};

use crate::checkpoint::Checkpoint;
use crate::config::ExperimentConfig;
use crate::data::{
    copy_last_loss, generate_synthetic, graph_from_frames, split_index, FrameSequence,
};
use crate::error::{Error, Result};
use crate::graph::{build_laplacians, Graph};
use crate::stability::{
    scalar_recurrence_params, stability_csv, stability_sweep, StabilityReport, SweepGrid,
};
use crate::training::{
    count_params, resume, rollout, sweep_csv, sweep_window_lengths, train, transition_losses,
    ParamFamily, SweepRow, TrainRun, LAPLACIAN_TOL,
};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const HISTORY_FILE: &str = "history.csv";

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads frames and either the given graph or one built from the frames.
pub fn load_dataset(
    cfg: &ExperimentConfig,
    frames: &Path,
    graph: Option<&Path>,
) -> Result<(FrameSequence, Graph)> {
    let seq = FrameSequence::load(frames)?;
    let g = match graph {
        Some(path) => Graph::load(path)?,
        None => graph_from_frames(&seq, cfg.train.k_neighbors, cfg.train.graph_source)?,
    };
    if g.n_nodes() != seq.n_nodes() {
        return Err(Error::config(format!(
            "graph has {} nodes but frames have {}",
            g.n_nodes(),
            seq.n_nodes()
        )));
    }
    Ok((seq, g))
}

/// `gen-data`: writes a synthetic frame file and its kNN graph.
pub fn run_gen_data(
    cfg: &ExperimentConfig,
    frames_out: &Path,
    graph_out: &Path,
) -> Result<(FrameSequence, Graph)> {
    let (seq, g) = generate_synthetic(&cfg.data)?;
    write(frames_out, &seq.to_text())?;
    write(graph_out, &g.to_edge_list())?;
    Ok((seq, g))
}

/// `train`: trains (or resumes) and writes `model.ckpt` and `history.csv`
/// into `out_dir`. A numeric failure still writes the partial history and
/// the last good checkpoint before the error is returned.
pub fn run_train(
    cfg: &ExperimentConfig,
    frames: &Path,
    graph: Option<&Path>,
    out_dir: &Path,
    resume_from: Option<&Path>,
) -> Result<TrainRun> {
    let (seq, g) = load_dataset(cfg, frames, graph)?;
    let checksum = g.checksum();
    let mut run = match resume_from {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            ck.check_graph(&checksum)?;
            resume(&cfg.train, &seq, &g, ck.train_state()?)?
        }
        None => train(&cfg.train, &seq, &g)?,
    };
    write(&out_dir.join(HISTORY_FILE), &run.history_csv())?;
    Checkpoint::from_state(&run.state, seq.n_features(), checksum)
        .save(out_dir.join(CHECKPOINT_FILE))?;
    match run.failure.take() {
        Some(e) => Err(e),
        None => Ok(run),
    }
}

/// Per-transition evaluation of a checkpoint on a frame sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// `J_t` for the transition into frame `t + 1`.
    pub losses: Vec<f64>,
    pub copy_last: Vec<f64>,
    /// First test frame under the configured split.
    pub split_index: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub test_baseline: f64,
}

pub const EVAL_HEADER: &str = "t,loss,copy_last_loss";

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(EVAL_HEADER);
        s.push('\n');
        for (i, (l, c)) in self.losses.iter().zip(&self.copy_last).enumerate() {
            s.push_str(&format!("{},{l:e},{c:e}\n", i + 1));
        }
        s
    }

    pub fn summary(&self) -> String {
        format!(
            "train_loss {:e}\ntest_loss {:e}\ncopy_last_test_loss {:e}\n",
            self.train_loss, self.test_loss, self.test_baseline
        )
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Teacher-forced one-step losses over the whole sequence from `h₀ = 0`.
pub fn evaluate(ck: &Checkpoint, seq: &FrameSequence, g: &Graph, split: f64) -> Result<EvalReport> {
    ck.check_graph(&g.checksum())?;
    let lap = build_laplacians(g, LAPLACIAN_TOL)?;
    let frames = seq.frames();
    let losses = transition_losses(&ck.params, &lap, frames)?;
    let copy_last: Vec<f64> = frames.windows(2).map(copy_last_loss).collect();
    let cut = split_index(seq.n_frames(), split).clamp(1, seq.n_frames().max(1));
    let (train_part, test_part) = losses.split_at((cut - 1).min(losses.len()));
    Ok(EvalReport {
        train_loss: mean(train_part),
        test_loss: mean(test_part),
        test_baseline: mean(&copy_last[(cut - 1).min(copy_last.len())..]),
        losses,
        copy_last,
        split_index: cut,
    })
}

/// `eval`: writes the per-transition CSV and returns the report.
pub fn run_eval(
    cfg: &ExperimentConfig,
    checkpoint: &Path,
    frames: &Path,
    graph: Option<&Path>,
    out: Option<&Path>,
) -> Result<EvalReport> {
    let ck = Checkpoint::load(checkpoint)?;
    let (seq, g) = load_dataset(cfg, frames, graph)?;
    let report = evaluate(&ck, &seq, &g, cfg.train.split)?;
    if let Some(path) = out {
        write(path, &report.to_csv())?;
    }
    Ok(report)
}

/// `predict`:
/// * horizon 0: no frames;
/// * horizon 1: teacher-forced predictions of frames `1..T`;
/// * horizon H > 1: warm up on the first `context` frames (default: the
///   training partition) and roll out `H` frames autoregressively.
pub fn predict(
    ck: &Checkpoint,
    seq: &FrameSequence,
    g: &Graph,
    horizon: usize,
    context: usize,
) -> Result<FrameSequence> {
    ck.check_graph(&g.checksum())?;
    let lap = build_laplacians(g, LAPLACIAN_TOL)?;
    let frames = seq.frames();
    let out = match horizon {
        0 => Vec::new(),
        1 => {
            let mut preds = crate::training::one_step_predictions(&ck.params, &lap, frames)?;
            preds.pop();
            preds
        }
        h => {
            if context == 0 || context > frames.len() {
                return Err(Error::config(format!(
                    "context must lie in 1..={}, got {context}",
                    frames.len()
                )));
            }
            rollout(&ck.params, &lap, &frames[..context], h)?
        }
    };
    FrameSequence::new(seq.n_nodes(), seq.n_features(), out)
}

pub fn run_predict(
    cfg: &ExperimentConfig,
    checkpoint: &Path,
    frames: &Path,
    graph: Option<&Path>,
    horizon: usize,
    context: Option<usize>,
    out: &Path,
) -> Result<FrameSequence> {
    let ck = Checkpoint::load(checkpoint)?;
    let (seq, g) = load_dataset(cfg, frames, graph)?;
    let context = context.unwrap_or_else(|| split_index(seq.n_frames(), cfg.train.split));
    let preds = predict(&ck, &seq, &g, horizon, context)?;
    write(out, &preds.to_text())?;
    Ok(preds)
}

/// `stability`: sweeps `(α, β, T)` with the scalar-recurrence cell on the
/// given graph, or on the synthetic dataset's graph when none is given.
pub fn run_stability(
    cfg: &ExperimentConfig,
    graph: Option<&Path>,
    out: &Path,
) -> Result<Vec<StabilityReport>> {
    let g = match graph {
        Some(p) => Graph::load(p)?,
        None => generate_synthetic(&cfg.data)?.1,
    };
    let s = &cfg.stability;
    let base = scalar_recurrence_params(
        g.n_nodes(),
        3,
        s.u,
        0.5,
        0.5,
        s.activation,
        cfg.train.propagation,
    );
    let grid = SweepGrid {
        alphas: s.alphas.clone(),
        betas: s.betas.clone(),
        windows: s.windows.clone(),
    };
    if grid.windows.iter().any(|&t| t < 2) {
        return Err(Error::config("stability T values must be >= 2"));
    }
    let rows = stability_sweep(&g, &base, &grid, cfg.train.seed)?;
    write(out, &stability_csv(&rows))?;
    Ok(rows)
}

/// `params`: trainable-parameter count.
pub fn run_params(family: &str, n: u64, k: u64, p: u64) -> Result<u64> {
    let f: ParamFamily = family.parse()?;
    Ok(count_params(f, n, k, p))
}

/// `sweep-T`: one training run per window length in `cfg.sweep_windows`.
pub fn run_sweep_t(
    cfg: &ExperimentConfig,
    frames: &Path,
    graph: Option<&Path>,
    out: &Path,
) -> Result<Vec<SweepRow>> {
    let (seq, g) = load_dataset(cfg, frames, graph)?;
    let rows = sweep_window_lengths(&cfg.train, &seq, &g, &cfg.sweep_windows)?;
    write(out, &sweep_csv(&rows))?;
    Ok(rows)
}

/// Splits a CSV with a header into the header and rows of fields,
/// checking that every row has as many fields as the header.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut lines = text.lines();
    let split = |l: &str| l.split(',').map(str::to_string).collect::<Vec<_>>();
    let header = split(lines.next().ok_or_else(|| Error::parse(1, "empty CSV"))?);
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields = split(line);
        if fields.len() != header.len() {
            return Err(Error::parse(
                i + 2,
                format!("expected {} fields, found {}", header.len(), fields.len()),
            ));
        }
        rows.push(fields);
    }
    Ok((header, rows))
}

/// Default output locations used by the binary.
pub fn default_paths(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join("frames.gfrm"), dir.join("graph.edges"))
}
