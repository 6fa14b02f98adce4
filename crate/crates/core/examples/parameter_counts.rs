//! Trainable-parameter counts for a 1502-node point cloud.

use fgrnn::training::{count_params, ParamFamily};

pub fn run_example() -> fgrnn::Result<()> {
    let (n, k, p) = (1502, 3, 3);
    for name in ParamFamily::NAMES {
        let family: ParamFamily = name.parse()?;
        println!("{name:<12} {:>10}", count_params(family, n, k, p));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> fgrnn::Result<()> {
    run_example()
}
