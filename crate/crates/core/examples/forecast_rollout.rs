//! Train, then forecast the held-out frames by feeding predictions back in.

use fgrnn::data::{copy_last_loss, generate_synthetic, split_index, SyntheticConfig};
use fgrnn::graph::build_laplacians;
use fgrnn::training::{prediction_loss, rollout, train, TrainConfig, LAPLACIAN_TOL};

pub fn run(data: &SyntheticConfig, cfg: &TrainConfig, horizon: usize) -> fgrnn::Result<()> {
    let (seq, graph) = generate_synthetic(data)?;
    let run = train(cfg, &seq, &graph)?;
    let lap = build_laplacians(&graph, LAPLACIAN_TOL)?;
    let frames = seq.frames();
    let cut = split_index(seq.n_frames(), cfg.split);
    let preds = rollout(run.final_params(), &lap, &frames[..cut], horizon)?;

    let last = &frames[cut - 1];
    println!("step  model      hold-last");
    for (h, pred) in preds.iter().enumerate() {
        let truth = &frames[cut + h];
        let hold = copy_last_loss(&[last.clone(), truth.clone()]);
        println!(
            "{:>4}  {:<9.4}  {:.4}",
            h + 1,
            prediction_loss(pred, truth)?,
            hold
        );
    }
    Ok(())
}

pub fn run_example() -> fgrnn::Result<()> {
    let data = SyntheticConfig {
        n_nodes: 32,
        n_frames: 60,
        ..SyntheticConfig::default()
    };
    run(
        &data,
        &TrainConfig {
            epochs: 2,
            window: 5,
            ..TrainConfig::default()
        },
        4,
    )
}

#[allow(dead_code)]
fn main() -> fgrnn::Result<()> {
    let cfg = TrainConfig {
        stride: Some(1),
        ..TrainConfig::default()
    };
    run(&SyntheticConfig::default(), &cfg, 10)
}
