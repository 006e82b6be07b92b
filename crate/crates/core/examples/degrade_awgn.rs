//! Add Gaussian noise to an image and report the damage.
//!
//! `cargo run --example degrade_awgn -- [sigma] [in.ppm] [out.ppm]`

use std::path::PathBuf;

use canet::imaging::{read_ppm, sample_image, write_ppm};
use canet::metrics::{psnr, psnr_float, ssim};
use canet::trainer::Task;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let sigma: f64 = args.next().map_or(25.0, |s| s.parse().expect("sigma"));
    let clean = match args.next() {
        Some(path) => read_ppm(path)?,
        None => sample_image(),
    };
    let out = args.next().map_or_else(|| std::env::temp_dir().join("canet_awgn.ppm"), PathBuf::from);

    let task = Task::Denoise { sigma };
    let float = task.degrade_float(&clean.to_float(), 0)?;
    let noisy = task.degrade_image(&clean, 0)?;
    println!("{task}");
    println!("float (unclipped) psnr {:.3} dB", psnr_float(&float, &clean.to_float())?);
    println!("8-bit (clipped)   psnr {:.3} dB  ssim {:.4}", psnr(&noisy, &clean)?, ssim(&noisy, &clean)?);
    write_ppm(&noisy, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
