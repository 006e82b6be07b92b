//! Naive reference implementations (no library numerics) and shared
//! suites for the integration and acceptance tests.

#![allow(dead_code)]

pub mod gradsuite;
pub mod oraclesuite;

use canet::canet::{Combine, ModelConfig};
use canet::imaging::ImageBuffer;
use canet::tensor::{Shape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, n: usize, c: usize, h: usize, w: usize) -> Tensor<f64> {
    Tensor::from_fn(Shape::new(n, c, h, w).unwrap(), |_, _, _, _| rng.random_range(-1.0..1.0))
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, c: usize) -> ImageBuffer {
    ImageBuffer::from_fn(w, h, c, |_, _, _| rng.random()).unwrap()
}

/// Direct six-loop cross-correlation, stride 1, zero padding `pad`.
pub fn naive_conv(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>, pad: usize) -> Tensor<f64> {
    let xs = x.shape();
    let ws = w.shape();
    let oh = xs.h + 2 * pad + 1 - ws.h;
    let ow = xs.w + 2 * pad + 1 - ws.w;
    let mut out = vec![0.0; xs.n * ws.n * oh * ow];
    let mut i = 0;
    for n in 0..xs.n {
        for o in 0..ws.n {
            for y in 0..oh {
                for xx in 0..ow {
                    let mut acc = b.data()[o];
                    for c in 0..xs.c {
                        for ky in 0..ws.h {
                            for kx in 0..ws.w {
                                let iy = (y + ky) as isize - pad as isize;
                                let ix = (xx + kx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= xs.h as isize || ix >= xs.w as isize {
                                    continue;
                                }
                                acc += w.at(o, c, ky, kx) * x.at(n, c, iy as usize, ix as usize);
                            }
                        }
                    }
                    out[i] = acc;
                    i += 1;
                }
            }
        }
    }
    Tensor::from_vec(Shape::new(xs.n, ws.n, oh, ow).unwrap(), out).unwrap()
}

pub fn naive_gap(x: &Tensor<f64>) -> Vec<f64> {
    let s = x.shape();
    let mut out = Vec::new();
    for n in 0..s.n {
        for c in 0..s.c {
            let mut acc = 0.0;
            for y in 0..s.h {
                for xx in 0..s.w {
                    acc += x.at(n, c, y, xx);
                }
            }
            out.push(acc / (s.h * s.w) as f64);
        }
    }
    out
}

pub fn naive_psnr(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
    let mut sse = 0.0;
    for (x, y) in a.pixels().iter().zip(b.pixels()) {
        sse += (*x as f64 - *y as f64).powi(2);
    }
    let mse = sse / a.pixels().len() as f64;
    if mse == 0.0 {
        99.0
    } else {
        (10.0 * (255.0f64.powi(2) / mse).log10()).min(99.0)
    }
}

fn naive_luma(img: &ImageBuffer, x: usize, y: usize) -> f64 {
    if img.channels() == 1 {
        return img.get(x, y, 0) as f64;
    }
    0.299 * img.get(x, y, 0) as f64 + 0.587 * img.get(x, y, 1) as f64 + 0.114 * img.get(x, y, 2) as f64
}

/// SSIM evaluated window by window with an explicit 2-D Gaussian.
pub fn naive_ssim(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
    let (w, h) = (a.width(), a.height());
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let stats = |weights: &dyn Fn(usize, usize) -> f64, x0: usize, y0: usize, size_x: usize, size_y: usize| {
        let (mut ma, mut mb, mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for j in 0..size_y {
            for i in 0..size_x {
                let k = weights(i, j);
                let va = naive_luma(a, x0 + i, y0 + j);
                let vb = naive_luma(b, x0 + i, y0 + j);
                ma += k * va;
                mb += k * vb;
                aa += k * va * va;
                bb += k * vb * vb;
                ab += k * va * vb;
            }
        }
        let (sa, sb, sab) = (aa - ma * ma, bb - mb * mb, ab - ma * mb);
        ((2.0 * ma * mb + c1) * (2.0 * sab + c2)) / ((ma * ma + mb * mb + c1) * (sa + sb + c2))
    };
    if w < 11 || h < 11 {
        let n = (w * h) as f64;
        return stats(&|_, _| 1.0 / n, 0, 0, w, h);
    }
    let mut kernel = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for (j, row) in kernel.iter_mut().enumerate() {
        for (i, k) in row.iter_mut().enumerate() {
            let (dx, dy) = (i as f64 - 5.0, j as f64 - 5.0);
            *k = (-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5)).exp();
            total += *k;
        }
    }
    let mut sum = 0.0;
    let mut count = 0;
    for y0 in 0..=h - 11 {
        for x0 in 0..=w - 11 {
            sum += stats(&|i, j| kernel[j][i] / total, x0, y0, 11, 11);
            count += 1;
        }
    }
    sum / count as f64
}

/// Closed-form parameter count of a CANet configuration, tallied layer
/// by layer from the architecture description.
pub fn tally_params(cfg: &ModelConfig) -> usize {
    let conv = |ci: usize, co: usize, k: usize| ci * co * k * k + co;
    let c = cfg.channels;
    let widths: Vec<usize> = match &cfg.pa_hidden {
        Some(h) => std::iter::once(c).chain(h.iter().copied()).chain([1]).collect(),
        None => vec![c, c / 2, c / 8, 1],
    };
    let pa: usize = widths.windows(2).map(|p| conv(p[0], p[1], 1)).sum::<usize>()
        + widths[1..widths.len() - 1].iter().sum::<usize>();
    let ca = conv(c, c / cfg.ca_ratio, 1) + c / cfg.ca_ratio + conv(c / cfg.ca_ratio, c, 1);
    let attn = if cfg.feature_attention { pa + ca } else { 0 };
    let a_layer = 2 * conv(c, c, 3) + c + attn;
    let block = cfg.layers_per_block * a_layer;
    let concat = cfg.combine == Combine::Concatenation;

    let local = match (concat, cfg.feature_selection) {
        (true, true) => conv(2 * c, c, 1),
        (true, false) => conv(2 * c, c, 3),
        (false, true) => conv(c, c, 1),
        (false, false) => 0,
    };
    let global = match (concat, cfg.feature_selection) {
        (true, true) => conv((cfg.blocks + 1) * c, c, 1) + conv(c, c, 3),
        (true, false) => conv((cfg.blocks + 1) * c, c, 3),
        (false, true) => conv(c, c, 1) + conv(c, c, 3),
        (false, false) => conv(c, c, 3),
    };
    let head = conv(cfg.in_channels, c, 3);
    let tail = conv(c, cfg.in_channels, 3);
    head + cfg.blocks * block + (cfg.blocks - 1) * (local + a_layer) + global + tail
}
