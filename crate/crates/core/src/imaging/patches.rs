use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::FloatImage;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Augment {
    #[default]
    None,
    /// Random element of the 8-element dihedral group (flips, 90° turns).
    Dihedral,
}

/// Aligned crops taken at the same place in a clean/degraded pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchPair {
    pub x: usize,
    pub y: usize,
    /// Dihedral transform index applied to both crops (0 = none).
    pub transform: u8,
    pub clean: FloatImage,
    pub degraded: FloatImage,
}

/// Top-left corners of `count` uniformly random `size x size` crops.
pub fn patch_coords(
    width: usize,
    height: usize,
    size: usize,
    count: usize,
    seed: u64,
) -> Vec<(usize, usize)> {
    if size == 0 || width < size || height < size {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x = rng.random_range(0..=width - size);
            let y = rng.random_range(0..=height - size);
            (x, y)
        })
        .collect()
}

/// Draws `count` aligned patches. Images smaller than `size` yield no
/// patches and a warning.
pub fn extract_patches(
    clean: &FloatImage,
    degraded: &FloatImage,
    size: usize,
    count: usize,
    seed: u64,
    augment: Augment,
) -> Result<Vec<PatchPair>> {
    if (clean.width(), clean.height(), clean.channels())
        != (degraded.width(), degraded.height(), degraded.channels())
    {
        return Err(Error::shape(format!(
            "clean {}x{}x{} and degraded {}x{}x{} differ",
            clean.width(),
            clean.height(),
            clean.channels(),
            degraded.width(),
            degraded.height(),
            degraded.channels()
        )));
    }
    if clean.width() < size || clean.height() < size {
        log::warn!(
            "skipping {}x{} image: smaller than {size}x{size} patches",
            clean.width(),
            clean.height()
        );
        return Ok(Vec::new());
    }
    let coords = patch_coords(clean.width(), clean.height(), size, count, seed);
    // Transforms come from a separate stream so coordinates do not depend on
    // the augmentation setting.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_a116);
    coords
        .into_iter()
        .map(|(x, y)| {
            let transform = match augment {
                Augment::None => 0,
                Augment::Dihedral => rng.random_range(0..8u8),
            };
            Ok(PatchPair {
                x,
                y,
                transform,
                clean: dihedral(&clean.crop(x, y, size, size)?, transform),
                degraded: dihedral(&degraded.crop(x, y, size, size)?, transform),
            })
        })
        .collect()
}

/// Bit 2 transposes, bit 0 flips horizontally, bit 1 flips vertically.
fn dihedral(img: &FloatImage, k: u8) -> FloatImage {
    if k == 0 {
        return img.clone();
    }
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let (ow, oh) = if k & 4 != 0 { (h, w) } else { (w, h) };
    let mut data = Vec::with_capacity(img.data().len());
    for y in 0..oh {
        for x in 0..ow {
            let (mut sx, mut sy) = if k & 4 != 0 { (y, x) } else { (x, y) };
            if k & 1 != 0 {
                sx = w - 1 - sx;
            }
            if k & 2 != 0 {
                sy = h - 1 - sy;
            }
            for ch in 0..c {
                data.push(img.get(sx, sy, ch));
            }
        }
    }
    FloatImage::new(ow, oh, c, data).expect("same pixel count")
}
