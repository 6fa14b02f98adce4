//! Ten epochs on the synthetic rotating cylinder, compared with predicting
//! the previous frame.

use fgrnn::cells::ConvFamily;
use fgrnn::data::{generate_synthetic, SyntheticConfig};
use fgrnn::training::{train, TrainConfig};

pub fn run(data: &SyntheticConfig, base: &TrainConfig) -> fgrnn::Result<()> {
    let (seq, graph) = generate_synthetic(data)?;
    for family in [ConvFamily::Chebyshev, ConvFamily::FirstOrder] {
        let cfg = TrainConfig {
            family,
            ..base.clone()
        };
        let run = train(&cfg, &seq, &graph)?;
        if let Some(e) = &run.failure {
            println!("{family}: stopped early: {e}");
        }
        println!("{family}: copy-last baseline {:.4}", run.test_baseline);
        println!("  epoch  train      test       alpha   beta");
        for r in &run.history {
            println!(
                "  {:>5}  {:<9.4}  {:<9.4}  {:.4}  {:.4}",
                r.epoch, r.train_loss, r.test_loss, r.alpha, r.beta
            );
        }
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
    )
}

#[allow(dead_code)]
fn main() -> fgrnn::Result<()> {
    // overlapping windows: one Adam step per frame instead of per T_w frames
    run(
        &SyntheticConfig::default(),
        &TrainConfig {
            stride: Some(1),
            ..TrainConfig::default()
        },
    )
}
