//! Library kernels and metrics against the naive oracles on random instances.

use canet::imaging::ImageBuffer;
use canet::metrics::{psnr, ssim};
use canet::tensor::Graph;
use rand::Rng;

use super::*;

/// Number of instances and the worst relative error seen.
#[derive(Clone, Copy, Debug, Default)]
pub struct Agreement {
    pub instances: usize,
    pub max_rel: f64,
}

impl Agreement {
    fn record(&mut self, got: f64, want: f64) {
        let scale = want.abs().max(1.0);
        self.max_rel = self.max_rel.max((got - want).abs() / scale);
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

/// Random shapes, kernel sizes 1/3/5 and paddings up to k/2.
pub fn conv2d(instances: usize) -> Agreement {
    let mut r = rng(1);
    let mut out = Agreement::default();
    for _ in 0..instances {
        let (n, ci, co) = (r.random_range(1..3), r.random_range(1..5), r.random_range(1..5));
        let k = [1, 3, 5][r.random_range(0..3)];
        let pad = r.random_range(0..=k / 2);
        let h = r.random_range(k..9);
        let w = r.random_range(k..9);
        let x = random_tensor(&mut r, n, ci, h, w);
        let wt = random_tensor(&mut r, co, ci, k, k);
        let b = random_tensor(&mut r, 1, co, 1, 1);
        let mut g = Graph::new();
        let (xv, wv, bv) = (g.constant(x.clone()), g.constant(wt.clone()), g.constant(b.clone()));
        let y = g.conv2d(xv, wv, bv, pad).unwrap();
        let expected = naive_conv(&x, &wt, &b, pad);
        assert_eq!(g.shape(y), expected.shape());
        for (a, e) in g.value(y).data().iter().zip(expected.data()) {
            out.record(*a, *e);
        }
        out.instances += 1;
    }
    out
}

pub fn global_avg_pool(instances: usize) -> Agreement {
    let mut r = rng(2);
    let mut out = Agreement::default();
    for _ in 0..instances {
        let (n, c) = (r.random_range(1..3), r.random_range(1..6));
        let (h, w) = (r.random_range(1..12), r.random_range(1..12));
        let x = random_tensor(&mut r, n, c, h, w);
        let mut g = Graph::new();
        let xv = g.constant(x.clone());
        let y = g.global_avg_pool(xv);
        for (a, e) in g.value(y).data().iter().zip(naive_gap(&x)) {
            out.record(*a, e);
        }
        out.instances += 1;
    }
    out
}

/// Correlated image pairs (a copy with bounded noise), gray and RGB, with
/// sides on both sides of the SSIM window.
pub fn metrics(instances: usize) -> (Agreement, Agreement) {
    let mut r = rng(3);
    let (mut p, mut s) = (Agreement::default(), Agreement::default());
    for i in 0..instances {
        let c = if i % 3 == 0 { 1 } else { 3 };
        let (w, h) = (r.random_range(4..30), r.random_range(4..30));
        let a = random_image(&mut r, w, h, c);
        let b = ImageBuffer::from_fn(w, h, c, |x, y, ch| {
            let v = a.get(x, y, ch) as i32 + r.random_range(-40..=40);
            v.clamp(0, 255) as u8
        })
        .unwrap();
        p.max_rel = p.max_rel.max(rel(psnr(&a, &b).unwrap(), naive_psnr(&a, &b)));
        s.max_rel = s.max_rel.max(rel(ssim(&a, &b).unwrap(), naive_ssim(&a, &b)));
        p.instances += 1;
        s.instances += 1;
    }
    (p, s)
}
