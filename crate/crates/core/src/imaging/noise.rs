use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{FloatImage, ImageBuffer};

/// Adds i.i.d. Gaussian noise of standard deviation `sigma` (0..255 scale).
/// The result is neither clipped nor quantized; use
/// [`FloatImage::to_image`] for a viewable copy. Samples come from a
/// ChaCha8 stream seeded with `seed`, one per value in raster order.
pub fn add_awgn(img: &ImageBuffer, sigma: f64, seed: u64) -> FloatImage {
    add_awgn_float(&img.to_float(), sigma, seed)
}

pub fn add_awgn_float(img: &FloatImage, sigma: f64, seed: u64) -> FloatImage {
    assert!(sigma >= 0.0, "negative noise level {sigma}");
    if sigma == 0.0 {
        return img.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = img
        .data()
        .iter()
        .map(|&v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (v as f64 + sigma * z) as f32
        })
        .collect();
    FloatImage::new(img.width(), img.height(), img.channels(), data).expect("same dims")
}
