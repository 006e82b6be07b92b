//! Memorise four noisy 48x48 patches of the bundled image with CANet-tiny.
//!
//! `cargo run --example overfit_denoise -- [steps] [seed]`

use canet::imaging::sample_image;
use canet::trainer::{overfit, OverfitConfig};

fn main() -> canet::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps = args.next().map_or(2000, |s| s.parse().expect("steps"));
    let seed = args.next().map_or(0, |s| s.parse().expect("seed"));
    let cfg = OverfitConfig {
        steps,
        seed,
        ..OverfitConfig::default()
    };
    let r = overfit(&sample_image(), &cfg)?;
    for (i, loss) in r.log.losses().iter().enumerate() {
        if i == 0 || (i + 1) % 100 == 0 {
            println!("step {:>5}  loss {loss:.5}", i + 1);
        }
    }
    println!("params          {}", r.params);
    println!("loss            {:.5} -> {:.5} ({:.1}%)", r.initial_loss, r.final_loss, 100.0 * r.loss_ratio());
    println!("psnr            {:.2} dB noisy -> {:.2} dB restored ({:+.2} dB)", r.noisy_psnr, r.restored_psnr, r.gain_db());
    println!("wall time       {:.1}s", r.log.wall_time.as_secs_f64());
    Ok(())
}
