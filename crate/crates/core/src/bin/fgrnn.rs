use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fgrnn::cli;
use fgrnn::config::ExperimentConfig;
use fgrnn::Result;

#[derive(Parser)]
#[command(
    name = "fgrnn",
    version,
    about = "Fast graph recurrent neural networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key; repeatable, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed for every generator (same as `--set seed=N`).
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        c.apply_overrides(&self.overrides)?;
        if let Some(s) = self.seed {
            c.set("seed", &s.to_string())?;
        }
        Ok(c)
    }
}

#[derive(Args)]
struct DataArgs {
    /// Frame file.
    #[arg(long)]
    frames: PathBuf,
    /// Edge-list graph; built from the frames when omitted.
    #[arg(long)]
    graph: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic point-cloud sequence and its kNN graph.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "frames.gfrm")]
        frames: PathBuf,
        #[arg(long, default_value = "graph.edges")]
        graph: PathBuf,
    },
    /// Train a model; writes model.ckpt and history.csv.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Continue from a checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Per-transition losses of a checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One-step (horizon 1) or rolled-out predictions.
    Predict {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 1)]
        horizon: usize,
        /// Frames used to warm up a rollout; defaults to the training split.
        #[arg(long)]
        context: Option<usize>,
        #[arg(long, default_value = "predictions.gfrm")]
        out: PathBuf,
    },
    /// Jacobian-product sweep over (alpha, beta, T).
    Stability {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long, default_value = "stability.csv")]
        out: PathBuf,
    },
    /// Trainable-parameter count.
    Params {
        family: String,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 0)]
        k: u64,
        #[arg(long, default_value_t = 0)]
        p: u64,
    },
    /// Train one model per window length T.
    #[command(name = "sweep-T", alias = "sweep-t")]
    SweepT {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated window lengths (overrides `sweep_t`).
        #[arg(long)]
        t: Option<String>,
        #[arg(long, default_value = "sweep_T.csv")]
        out: PathBuf,
    },
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenData {
            common,
            frames,
            graph,
        } => {
            let (seq, g) = cli::run_gen_data(&common.config()?, &frames, &graph)?;
            println!(
                "wrote {} ({} frames, {} nodes) and {} ({} edges)",
                frames.display(),
                seq.n_frames(),
                seq.n_nodes(),
                graph.display(),
                g.n_edges()
            );
        }
        Command::Train {
            common,
            data,
            out,
            resume,
        } => {
            let run = cli::run_train(
                &common.config()?,
                &data.frames,
                data.graph.as_deref(),
                &out,
                resume.as_deref(),
            )?;
            if let Some(r) = run.history.last() {
                println!(
                    "epoch {} train_loss {:e} test_loss {:e} (copy-last {:e})",
                    r.epoch, r.train_loss, r.test_loss, run.test_baseline
                );
            }
        }
        Command::Eval {
            common,
            data,
            checkpoint,
            out,
        } => {
            let report = cli::run_eval(
                &common.config()?,
                &checkpoint,
                &data.frames,
                data.graph.as_deref(),
                out.as_deref(),
            )?;
            print!("{}", report.summary());
        }
        Command::Predict {
            common,
            data,
            checkpoint,
            horizon,
            context,
            out,
        } => {
            let preds = cli::run_predict(
                &common.config()?,
                &checkpoint,
                &data.frames,
                data.graph.as_deref(),
                horizon,
                context,
                &out,
            )?;
            println!(
                "wrote {} predicted frames to {}",
                preds.n_frames(),
                out.display()
            );
        }
        Command::Stability { common, graph, out } => {
            let rows = cli::run_stability(&common.config()?, graph.as_deref(), &out)?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::Params { family, n, k, p } => {
            println!("{}", cli::run_params(&family, n, k, p)?);
        }
        Command::SweepT {
            common,
            data,
            t,
            out,
        } => {
            let mut cfg = common.config()?;
            if let Some(list) = t {
                cfg.set("sweep_t", &list)?;
            }
            let rows = cli::run_sweep_t(&cfg, &data.frames, data.graph.as_deref(), &out)?;
            for r in &rows {
                if let Some(e) = &r.error {
                    eprintln!("T = {}: {e}", r.window);
                }
            }
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
