//! Image rasters, PPM/PGM I/O and synthetic degradations.

mod color;
mod dct;
mod jpeg;
mod noise;
mod patches;
mod ppm;

use crate::error::{Error, Result};
use crate::tensor::{Real, Shape, Tensor};

pub use color::{luma, rgb_to_ycbcr, ycbcr_to_rgb, YCbCrPlanes};
pub use dct::{dct8x8, idct8x8};
pub use jpeg::{jpeg_degrade, QuantTables, STD_CHROMA_TABLE, STD_LUMA_TABLE};
pub use noise::{add_awgn, add_awgn_float};
pub use patches::{extract_patches, patch_coords, Augment, PatchPair};
pub use ppm::{decode_pnm, encode_pnm, read_ppm, write_ppm, PpmError};

/// 8-bit interleaved raster, row-major, 1 (gray) or 3 (RGB) channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height, channels, pixels.len())?;
        Ok(ImageBuffer {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> u8,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    pixels.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    pub fn to_float(&self) -> FloatImage {
        FloatImage {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.pixels.iter().map(|&p| p as f32).collect(),
        }
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(Error::shape(format!(
                "crop {w}x{h}@({x0},{y0}) outside {}x{} image",
                self.width, self.height
            )));
        }
        Self::from_fn(w, h, self.channels, |x, y, c| self.get(x0 + x, y0 + y, c))
    }
}

fn check_dims(width: usize, height: usize, channels: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::shape(format!("empty image {width}x{height}")));
    }
    if channels != 1 && channels != 3 {
        return Err(Error::shape(format!("unsupported channel count {channels}")));
    }
    if len != width * height * channels {
        return Err(Error::shape(format!(
            "{len} samples for a {width}x{height}x{channels} image"
        )));
    }
    Ok(())
}

/// Real-valued raster on the 0..255 scale, same layout as [`ImageBuffer`].
/// Values may leave that range (unclipped noise, raw network output).
#[derive(Clone, Debug, PartialEq)]
pub struct FloatImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FloatImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(width, height, channels, data.len())?;
        Ok(FloatImage {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Clamps to `[0, 255]` and rounds half away from zero.
    pub fn to_image(&self) -> ImageBuffer {
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: self.channels,
            pixels: self.data.iter().map(|&v| quantize(v)).collect(),
        }
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(Error::shape(format!(
                "crop {w}x{h}@({x0},{y0}) outside {}x{} image",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h * self.channels);
        for y in y0..y0 + h {
            let start = (y * self.width + x0) * self.channels;
            data.extend_from_slice(&self.data[start..start + w * self.channels]);
        }
        Self::new(w, h, self.channels, data)
    }

    /// `1 x C x H x W` tensor scaled to `[0, 1]`.
    pub fn to_tensor<T: Real>(&self) -> Tensor<T> {
        let shape = Shape {
            n: 1,
            c: self.channels,
            h: self.height,
            w: self.width,
        };
        let scale = 1.0 / 255.0;
        Tensor::from_fn(shape, |_, c, y, x| T::lit(self.get(x, y, c) as f64 * scale))
    }

    /// Inverse of [`FloatImage::to_tensor`] for batch entry `n`.
    pub fn from_tensor<T: Real>(t: &Tensor<T>, n: usize) -> Result<Self> {
        let s = t.shape();
        if n >= s.n {
            return Err(Error::shape(format!("batch index {n} out of range for {s}")));
        }
        let mut data = Vec::with_capacity(s.c * s.spatial());
        for y in 0..s.h {
            for x in 0..s.w {
                for c in 0..s.c {
                    data.push((t.at(n, c, y, x).as_f64() * 255.0) as f32);
                }
            }
        }
        Self::new(s.w, s.h, s.c, data)
    }
}

/// 128x128 RGB crop of the public-domain NASA astronaut portrait, bundled
/// as a natural test image.
pub fn sample_image() -> ImageBuffer {
    decode_pnm(include_bytes!("../../assets/astronaut_128.ppm")).expect("bundled image decodes")
}

/// Clamp to the 8-bit range and round half away from zero.
pub fn quantize(v: f32) -> u8 {
    v.clamp(0.0, 255.0).round() as u8
}
