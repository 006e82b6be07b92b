use super::Model;
use crate::error::{Error, Result};
use crate::imaging::{FloatImage, ImageBuffer};
use crate::tensor::{Real, Tensor};

pub const DEFAULT_TILE: usize = 48;
pub const DEFAULT_OVERLAP: usize = 8;

/// Tile origins along one axis: stride `tile - overlap`, last tile flush
/// with the far edge.
fn starts(len: usize, tile: usize, overlap: usize) -> Vec<usize> {
    if len <= tile {
        return vec![0];
    }
    let mut out: Vec<usize> = (0..len - tile).step_by(tile - overlap).collect();
    out.push(len - tile);
    out
}

/// Runs the model over overlapping tiles (row-major order) and averages
/// the overlaps. Output stays on the 0..255 scale and is not clamped.
pub fn restore_float<T: Real>(
    img: &FloatImage,
    model: &Model<T>,
    tile: usize,
    overlap: usize,
) -> Result<FloatImage> {
    if tile <= 2 * overlap {
        return Err(Error::config(format!(
            "tile {tile} must exceed twice the overlap {overlap}"
        )));
    }
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let input: Tensor<T> = img.to_tensor();
    let mut acc = vec![0.0f64; w * h * c];
    let mut hits = vec![0u32; w * h];
    for &y0 in &starts(h, tile, overlap) {
        for &x0 in &starts(w, tile, overlap) {
            let (th, tw) = (tile.min(h), tile.min(w));
            let out = model.infer(&input.crop(y0, x0, th, tw)?)?;
            for y in 0..th {
                for x in 0..tw {
                    let p = (y0 + y) * w + x0 + x;
                    hits[p] += 1;
                    for ch in 0..c {
                        acc[p * c + ch] += out.at(0, ch, y, x).as_f64();
                    }
                }
            }
        }
    }
    let data = acc
        .iter()
        .enumerate()
        .map(|(i, &v)| (v / hits[i / c] as f64 * 255.0) as f32)
        .collect();
    FloatImage::new(w, h, c, data)
}

/// Whole-image restoration: tiles, blends, then clamps and re-quantizes.
/// Images no larger than `tile` run as a single tile.
pub fn restore_image<T: Real>(
    img: &ImageBuffer,
    model: &Model<T>,
    tile: usize,
    overlap: usize,
) -> Result<ImageBuffer> {
    Ok(restore_float(&img.to_float(), model, tile, overlap)?.to_image())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canet::{init_params, ModelConfig};

    fn ramp(w: usize, h: usize) -> ImageBuffer {
        ImageBuffer::from_fn(w, h, 3, |x, y, c| ((x * 5 + y * 3 + c * 60) % 256) as u8).unwrap()
    }

    #[test]
    fn tile_origins_cover_the_axis() {
        assert_eq!(starts(40, 48, 8), vec![0]);
        assert_eq!(starts(48, 48, 8), vec![0]);
        assert_eq!(starts(96, 48, 8), vec![0, 40, 48]);
        assert_eq!(starts(100, 48, 8), vec![0, 40, 52]);
        for len in 49..200 {
            let s = starts(len, 48, 8);
            assert_eq!(*s.last().unwrap(), len - 48);
            for pair in s.windows(2) {
                assert!(pair[1] > pair[0] && pair[1] - pair[0] <= 40);
            }
        }
    }

    #[test]
    fn identity_model_returns_input_pixels() {
        let mut model = init_params::<f32>(&ModelConfig::tiny(), 2).unwrap();
        model.zero_tail();
        let img = ramp(70, 53);
        assert_eq!(restore_image(&img, &model, 32, 8).unwrap(), img);
        assert_eq!(restore_image(&ramp(9, 9), &model, 48, 8).unwrap(), ramp(9, 9));
    }

    #[test]
    fn overlap_must_leave_a_core() {
        let model = init_params::<f32>(&ModelConfig::tiny(), 2).unwrap();
        assert!(matches!(
            restore_image(&ramp(20, 20), &model, 16, 8),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn channel_mismatch_is_a_contract_error() {
        let model = init_params::<f32>(&ModelConfig::tiny(), 2).unwrap();
        let gray = ImageBuffer::filled(12, 12, 1, 7).unwrap();
        assert!(matches!(
            restore_image(&gray, &model, 48, 8),
            Err(Error::Contract(_))
        ));
    }
}
