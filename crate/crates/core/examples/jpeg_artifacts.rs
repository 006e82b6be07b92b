//! Quality sweep of the baseline JPEG codec, with and without 4:2:0 chroma.
//!
//! `cargo run --example jpeg_artifacts -- [in.ppm]`

use canet::imaging::{jpeg_degrade, read_ppm, sample_image, write_ppm};
use canet::metrics::{psnr, ssim};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let img = match std::env::args().nth(1) {
        Some(path) => read_ppm(path)?,
        None => sample_image(),
    };
    println!("quality   4:2:0 psnr   ssim    4:4:4 psnr   ssim");
    for q in [5, 10, 20, 30, 50, 70, 90, 100] {
        let sub = jpeg_degrade(&img, q, true)?;
        let full = jpeg_degrade(&img, q, false)?;
        println!(
            "{q:>7}   {:>7.2} dB  {:.4}   {:>7.2} dB  {:.4}",
            psnr(&sub, &img)?,
            ssim(&sub, &img)?,
            psnr(&full, &img)?,
            ssim(&full, &img)?
        );
    }
    let out = std::env::temp_dir().join("canet_q10.ppm");
    write_ppm(&jpeg_degrade(&img, 10, true)?, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
