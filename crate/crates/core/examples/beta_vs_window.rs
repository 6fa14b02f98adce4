//! Learned residual weights as a function of the unrolled window length,
//! averaged over initialisation seeds.

use fgrnn::data::{generate_synthetic, SyntheticConfig};
use fgrnn::training::{sweep_window_lengths, TrainConfig};

pub fn run(
    data: &SyntheticConfig,
    base: &TrainConfig,
    windows: &[usize],
    seeds: u64,
) -> fgrnn::Result<()> {
    let (seq, graph) = generate_synthetic(data)?;
    let mut sums = vec![(0.0, 0.0, 0.0); windows.len()];
    for seed in 0..seeds {
        let cfg = TrainConfig {
            seed,
            ..base.clone()
        };
        for (acc, row) in sums
            .iter_mut()
            .zip(sweep_window_lengths(&cfg, &seq, &graph, windows)?)
        {
            if let Some(e) = row.error {
                println!("T={} seed={seed}: {e}", row.window);
            }
            acc.0 += row.alpha / seeds as f64;
            acc.1 += row.beta / seeds as f64;
            acc.2 += row.test_loss / seeds as f64;
        }
    }
    println!("T     alpha   beta    1-beta  test_loss");
    for (t, (a, b, l)) in windows.iter().zip(sums) {
        println!("{t:<4}  {a:.4}  {b:.4}  {:.4}  {l:.4}", 1.0 - b);
    }
    Ok(())
}

pub fn run_example() -> fgrnn::Result<()> {
    let data = SyntheticConfig {
        n_nodes: 24,
        n_frames: 50,
        ..SyntheticConfig::default()
    };
    run(
        &data,
        &TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        },
        &[3, 6],
        1,
    )
}

#[allow(dead_code)]
fn main() -> fgrnn::Result<()> {
    let cfg = TrainConfig {
        stride: Some(1),
        ..TrainConfig::default()
    };
    run(&SyntheticConfig::default(), &cfg, &[5, 10, 20], 3)
}
