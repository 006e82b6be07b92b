//! Full-range BT.601 (JFIF) colour conversion.

use super::{quantize, ImageBuffer};

/// Planar YCbCr on the 0..255 scale, chroma centred at 128.
#[derive(Clone, Debug, PartialEq)]
pub struct YCbCrPlanes {
    pub width: usize,
    pub height: usize,
    pub y: Vec<f64>,
    pub cb: Vec<f64>,
    pub cr: Vec<f64>,
}

fn forward(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let cb = 128.0 - 0.168_736 * r - 0.331_264 * g + 0.5 * b;
    let cr = 128.0 + 0.5 * r - 0.418_688 * g - 0.081_312 * b;
    (y, cb, cr)
}

fn inverse(y: f64, cb: f64, cr: f64) -> (f64, f64, f64) {
    let r = y + 1.402 * (cr - 128.0);
    let g = y - 0.344_136 * (cb - 128.0) - 0.714_136 * (cr - 128.0);
    let b = y + 1.772 * (cb - 128.0);
    (r, g, b)
}

/// Gray images map to `Y = v` with neutral chroma.
pub fn rgb_to_ycbcr(img: &ImageBuffer) -> YCbCrPlanes {
    let n = img.width() * img.height();
    let mut planes = YCbCrPlanes {
        width: img.width(),
        height: img.height(),
        y: Vec::with_capacity(n),
        cb: Vec::with_capacity(n),
        cr: Vec::with_capacity(n),
    };
    for px in img.pixels().chunks(img.channels()) {
        let (y, cb, cr) = match *px {
            [r, g, b] => forward(r as f64, g as f64, b as f64),
            [v] => (v as f64, 128.0, 128.0),
            _ => unreachable!("channel count validated"),
        };
        planes.y.push(y);
        planes.cb.push(cb);
        planes.cr.push(cr);
    }
    planes
}

/// Back to 8-bit RGB, clamped and rounded.
pub fn ycbcr_to_rgb(planes: &YCbCrPlanes) -> ImageBuffer {
    let mut pixels = Vec::with_capacity(planes.y.len() * 3);
    for i in 0..planes.y.len() {
        let (r, g, b) = inverse(planes.y[i], planes.cb[i], planes.cr[i]);
        pixels.extend([r, g, b].map(|v| quantize(v as f32)));
    }
    ImageBuffer::new(planes.width, planes.height, 3, pixels).expect("plane dims")
}

/// Unrounded BT.601 luma; gray images pass through.
pub fn luma(img: &ImageBuffer) -> Vec<f64> {
    img.pixels()
        .chunks(img.channels())
        .map(|px| match *px {
            [r, g, b] => 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64,
            [v] => v as f64,
            _ => unreachable!("channel count validated"),
        })
        .collect()
}
