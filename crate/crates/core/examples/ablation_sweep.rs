//! The component ablation rows and block counts 1..=5, each on the overfit
//! protocol. The full protocol is 2000 steps per row.
//!
//! `cargo run --release --example ablation_sweep -- [steps]`

use canet::imaging::sample_image;
use canet::trainer::{ablation_sweep, OverfitConfig};

fn main() -> canet::Result<()> {
    let steps = std::env::args().nth(1).map_or(200, |s| s.parse().expect("steps"));
    let base = OverfitConfig {
        steps,
        ..OverfitConfig::default()
    };
    for row in ablation_sweep(&sample_image(), &base, 1..=5)? {
        println!("{}", row.summary());
    }
    Ok(())
}
