//! PSNR and SSIM.
//!
//! PSNR is computed over all channels jointly on the 0..255 scale. SSIM uses
//! BT.601 luma for RGB inputs, an 11x11 Gaussian window (σ = 1.5),
//! `C1 = (0.01·255)²`, `C2 = (0.03·255)²`, and averages the SSIM map over
//! fully contained windows only. Images narrower or shorter than the window
//! fall back to one window covering the whole image with uniform weights.

use std::fmt::Write as _;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{luma, FloatImage, ImageBuffer};

/// Reported for identical images, and the ceiling for any PSNR.
pub const PSNR_CAP: f64 = 99.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
pub const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

pub fn mse_to_psnr(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (255.0 * 255.0 / mse).log10()).min(PSNR_CAP)
    }
}

fn same_dims(a: (usize, usize, usize), b: (usize, usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::shape(format!(
            "image dimensions differ: {}x{}x{} vs {}x{}x{}",
            a.0, a.1, a.2, b.0, b.1, b.2
        )));
    }
    Ok(())
}

pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    same_dims(
        (a.width(), a.height(), a.channels()),
        (b.width(), b.height(), b.channels()),
    )?;
    let sse: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(mse_to_psnr(sse / a.pixels().len() as f64))
}

/// PSNR of unquantized rasters, e.g. noisy training inputs.
pub fn psnr_float(a: &FloatImage, b: &FloatImage) -> Result<f64> {
    same_dims(
        (a.width(), a.height(), a.channels()),
        (b.width(), b.height(), b.channels()),
    )?;
    let sse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(mse_to_psnr(sse / a.data().len() as f64))
}

/// Normalised 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps() -> &'static [f64; SSIM_WINDOW] {
    static TAPS: OnceLock<[f64; SSIM_WINDOW]> = OnceLock::new();
    TAPS.get_or_init(|| {
        let r = (SSIM_WINDOW / 2) as f64;
        let raw: [f64; SSIM_WINDOW] = std::array::from_fn(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        });
        let s: f64 = raw.iter().sum();
        raw.map(|v| v / s)
    })
}

fn ssim_term(mu_a: f64, mu_b: f64, var_a: f64, var_b: f64, cov: f64) -> f64 {
    ((2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2))
        / ((mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2))
}

/// Mean SSIM of two single-channel planes.
pub fn ssim_plane(a: &[f64], b: &[f64], width: usize, height: usize) -> f64 {
    assert_eq!(a.len(), width * height);
    assert_eq!(b.len(), width * height);
    if width < SSIM_WINDOW || height < SSIM_WINDOW {
        let n = a.len() as f64;
        let mu_a = a.iter().sum::<f64>() / n;
        let mu_b = b.iter().sum::<f64>() / n;
        let var_a = a.iter().map(|v| v * v).sum::<f64>() / n - mu_a * mu_a;
        let var_b = b.iter().map(|v| v * v).sum::<f64>() / n - mu_b * mu_b;
        let cov = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / n - mu_a * mu_b;
        return ssim_term(mu_a, mu_b, var_a, var_b, cov);
    }

    let taps = gaussian_taps();
    let (ow, oh) = (width - SSIM_WINDOW + 1, height - SSIM_WINDOW + 1);
    // Five moment images, filtered horizontally then vertically.
    let moments = |f: &dyn Fn(usize) -> f64| -> Vec<f64> {
        let mut rows = vec![0.0; ow * height];
        for y in 0..height {
            for x in 0..ow {
                rows[y * ow + x] = (0..SSIM_WINDOW)
                    .map(|k| taps[k] * f(y * width + x + k))
                    .sum();
            }
        }
        let mut out = vec![0.0; ow * oh];
        for y in 0..oh {
            for x in 0..ow {
                out[y * ow + x] = (0..SSIM_WINDOW)
                    .map(|k| taps[k] * rows[(y + k) * ow + x])
                    .sum();
            }
        }
        out
    };
    let mu_a = moments(&|i| a[i]);
    let mu_b = moments(&|i| b[i]);
    let aa = moments(&|i| a[i] * a[i]);
    let bb = moments(&|i| b[i] * b[i]);
    let ab = moments(&|i| a[i] * b[i]);
    let total: f64 = (0..ow * oh)
        .map(|i| {
            ssim_term(
                mu_a[i],
                mu_b[i],
                aa[i] - mu_a[i] * mu_a[i],
                bb[i] - mu_b[i] * mu_b[i],
                ab[i] - mu_a[i] * mu_b[i],
            )
        })
        .sum();
    total / (ow * oh) as f64
}

pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    same_dims(
        (a.width(), a.height(), a.channels()),
        (b.width(), b.height(), b.channels()),
    )?;
    Ok(ssim_plane(&luma(a), &luma(b), a.width(), a.height()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub name: String,
    pub psnr: f64,
    pub ssim: f64,
}

impl ImageMetrics {
    pub fn measure(name: impl Into<String>, a: &ImageBuffer, b: &ImageBuffer) -> Result<Self> {
        Ok(ImageMetrics {
            name: name.into(),
            psnr: psnr(a, b)?,
            ssim: ssim(a, b)?,
        })
    }
}

/// Mean PSNR/SSIM with the per-image rows they came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub per_image: Vec<ImageMetrics>,
}

impl MetricReport {
    pub fn from_rows(per_image: Vec<ImageMetrics>) -> Self {
        let n = per_image.len().max(1) as f64;
        MetricReport {
            psnr: per_image.iter().map(|r| r.psnr).sum::<f64>() / n,
            ssim: per_image.iter().map(|r| r.ssim).sum::<f64>() / n,
            per_image,
        }
    }

    /// Human-readable lines: one per image, then the mean.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.per_image {
            let _ = writeln!(s, "{:<24} psnr {:>7.3} dB  ssim {:.4}", r.name, r.psnr, r.ssim);
        }
        let _ = writeln!(s, "{:<24} psnr {:>7.3} dB  ssim {:.4}", "mean", self.psnr, self.ssim);
        s
    }

    /// One JSON object per image: `{"name":..,"psnr":..,"ssim":..}`.
    pub fn to_records(&self) -> String {
        self.per_image
            .iter()
            .map(|r| serde_json::to_string(r).expect("plain struct") + "\n")
            .collect()
    }
}
