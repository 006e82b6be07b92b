//! Baseline JPEG distortion without the (lossless) entropy coding stage.

use super::color::{rgb_to_ycbcr, ycbcr_to_rgb, YCbCrPlanes};
use super::dct::{dct8x8, idct8x8};
use super::{quantize, ImageBuffer};
use crate::error::{Error, Result};

/// Annex K luminance table, row-major.
#[rustfmt::skip]
pub const STD_LUMA_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Annex K chrominance table, row-major.
#[rustfmt::skip]
pub const STD_CHROMA_TABLE: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99,
    18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99,
    47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantTables {
    pub quality: u8,
    pub luma: [u16; 64],
    pub chroma: [u16; 64],
}

impl QuantTables {
    /// IJG quality scaling: `5000/Q` below 50, `200 - 2Q` otherwise, then
    /// `clamp((t * scale + 50) / 100, 1, 255)`.
    pub fn for_quality(quality: u32) -> Result<Self> {
        if !(1..=100).contains(&quality) {
            return Err(Error::config(format!("JPEG quality {quality} outside 1..=100")));
        }
        let scale = if quality < 50 {
            5000 / quality
        } else {
            200 - 2 * quality
        };
        let scaled = |t: &[u16; 64]| t.map(|v| ((v as u32 * scale + 50) / 100).clamp(1, 255) as u16);
        Ok(QuantTables {
            quality: quality as u8,
            luma: scaled(&STD_LUMA_TABLE),
            chroma: scaled(&STD_CHROMA_TABLE),
        })
    }
}

/// Quantizes and reconstructs one plane in 8x8 tiles; partial edge tiles
/// are filled by replicating the last row and column.
fn code_plane(plane: &[f64], w: usize, h: usize, table: &[u16; 64]) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for by in (0..h).step_by(8) {
        for bx in (0..w).step_by(8) {
            let block: [f64; 64] = std::array::from_fn(|i| {
                let y = (by + i / 8).min(h - 1);
                let x = (bx + i % 8).min(w - 1);
                plane[y * w + x] - 128.0
            });
            let mut coef = dct8x8(&block);
            for (c, &q) in coef.iter_mut().zip(table) {
                let q = q as f64;
                *c = (*c / q).round() * q;
            }
            let rec = idct8x8(&coef);
            for dy in 0..8.min(h - by) {
                for dx in 0..8.min(w - bx) {
                    out[(by + dy) * w + bx + dx] = rec[dy * 8 + dx] + 128.0;
                }
            }
        }
    }
    out
}

/// 2x2 box average; odd edges replicate the last row/column.
fn downsample(plane: &[f64], w: usize, h: usize) -> (Vec<f64>, usize, usize) {
    let (sw, sh) = (w.div_ceil(2), h.div_ceil(2));
    let at = |x: usize, y: usize| plane[y.min(h - 1) * w + x.min(w - 1)];
    let mut out = Vec::with_capacity(sw * sh);
    for y in 0..sh {
        for x in 0..sw {
            let (x2, y2) = (2 * x, 2 * y);
            out.push(0.25 * (at(x2, y2) + at(x2 + 1, y2) + at(x2, y2 + 1) + at(x2 + 1, y2 + 1)));
        }
    }
    (out, sw, sh)
}

fn upsample(plane: &[f64], sw: usize, w: usize, h: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            out.push(plane[(y / 2) * sw + x / 2]);
        }
    }
    out
}

fn code_chroma(plane: &[f64], w: usize, h: usize, table: &[u16; 64], subsample: bool) -> Vec<f64> {
    if subsample {
        let (small, sw, sh) = downsample(plane, w, h);
        let coded = code_plane(&small, sw, sh, table);
        upsample(&coded, sw, w, h)
    } else {
        code_plane(plane, w, h, table)
    }
}

/// Runs an image through JPEG's lossy stages and back: colour transform,
/// optional 4:2:0 chroma subsampling, 8x8 DCT, table quantization and the
/// inverse path, ending in clamped 8-bit pixels. Gray images code only luma.
pub fn jpeg_degrade(img: &ImageBuffer, quality: u32, subsample: bool) -> Result<ImageBuffer> {
    let tables = QuantTables::for_quality(quality)?;
    let (w, h) = (img.width(), img.height());
    if img.channels() == 1 {
        let plane: Vec<f64> = img.pixels().iter().map(|&p| p as f64).collect();
        let coded = code_plane(&plane, w, h, &tables.luma);
        return ImageBuffer::new(w, h, 1, coded.iter().map(|&v| quantize(v as f32)).collect());
    }
    let planes = rgb_to_ycbcr(img);
    let coded = YCbCrPlanes {
        width: w,
        height: h,
        y: code_plane(&planes.y, w, h, &tables.luma),
        cb: code_chroma(&planes.cb, w, h, &tables.chroma, subsample),
        cr: code_chroma(&planes.cr, w, h, &tables.chroma, subsample),
    };
    Ok(ycbcr_to_rgb(&coded))
}
