//! PSNR and SSIM on a few closed-form and degraded pairs.

use canet::imaging::{jpeg_degrade, sample_image, ImageBuffer};
use canet::metrics::{psnr, ssim, MetricReport, ImageMetrics};
use canet::trainer::Task;

fn main() -> canet::Result<()> {
    let img = sample_image();
    let shifted = ImageBuffer::from_fn(img.width(), img.height(), 3, |x, y, c| img.get(x, y, c).saturating_add(10))?;
    let gray = ImageBuffer::filled(64, 64, 1, 100)?;
    let brighter = ImageBuffer::filled(64, 64, 1, 110)?;
    println!("identical        psnr {:.2} (cap)  ssim {:.4}", psnr(&img, &img)?, ssim(&img, &img)?);
    println!("flat +10         psnr {:.2}  ssim {:.4}", psnr(&gray, &brighter)?, ssim(&gray, &brighter)?);

    let rows = vec![
        ImageMetrics::measure("brightness +10", &shifted, &img)?,
        ImageMetrics::measure("awgn sigma 15", &Task::Denoise { sigma: 15.0 }.degrade_image(&img, 1)?, &img)?,
        ImageMetrics::measure("awgn sigma 50", &Task::Denoise { sigma: 50.0 }.degrade_image(&img, 1)?, &img)?,
        ImageMetrics::measure("jpeg q 10", &jpeg_degrade(&img, 10, true)?, &img)?,
        ImageMetrics::measure("jpeg q 40", &jpeg_degrade(&img, 40, true)?, &img)?,
    ];
    print!("{}", MetricReport::from_rows(rows).to_text());
    Ok(())
}
