mod common;

use canet::imaging::{dct8x8, decode_pnm, encode_pnm, idct8x8, jpeg_degrade, patch_coords, quantize, ImageBuffer};
use canet::metrics::{psnr, ssim};
use canet::tensor::{Graph, Shape, Tensor};
use proptest::prelude::*;

fn image_strategy(max: usize) -> impl Strategy<Value = ImageBuffer> {
    (1..max, 1..max, prop_oneof![Just(1usize), Just(3usize)]).prop_flat_map(|(w, h, c)| {
        proptest::collection::vec(any::<u8>(), w * h * c)
            .prop_map(move |px| ImageBuffer::new(w, h, c, px).unwrap())
    })
}

fn tensor_strategy() -> impl Strategy<Value = Tensor<f64>> {
    (1..3usize, 1..5usize, 1..7usize, 1..7usize).prop_flat_map(|(n, c, h, w)| {
        proptest::collection::vec(-2.0f64..2.0, n * c * h * w)
            .prop_map(move |d| Tensor::from_vec(Shape::new(n, c, h, w).unwrap(), d).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pnm_round_trip(img in image_strategy(20)) {
        prop_assert_eq!(decode_pnm(&encode_pnm(&img)).unwrap(), img);
    }

    #[test]
    fn jpeg_preserves_dimensions(img in image_strategy(30), q in 1u32..=100, sub in any::<bool>()) {
        let out = jpeg_degrade(&img, q, sub).unwrap();
        prop_assert_eq!((out.width(), out.height(), out.channels()), (img.width(), img.height(), img.channels()));
    }

    #[test]
    fn metrics_are_symmetric_and_bounded(a in image_strategy(24), seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let b = common::random_image(&mut r, a.width(), a.height(), a.channels());
        let (p1, p2) = (psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        prop_assert_eq!(p1, p2);
        prop_assert!((0.0..=99.0).contains(&p1));
        let s = ssim(&a, &b).unwrap();
        prop_assert!((s - ssim(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&s));
        prop_assert_eq!(psnr(&a, &a).unwrap(), 99.0);
    }

    #[test]
    fn dct_round_trip(block in proptest::array::uniform32(-128.0f64..128.0)) {
        let full: [f64; 64] = std::array::from_fn(|i| block[i % 32] * if i < 32 { 1.0 } else { -0.5 });
        let back = idct8x8(&dct8x8(&full));
        for (a, b) in full.iter().zip(back.iter()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn quantize_is_monotone_and_clamped(a in -500.0f32..500.0, b in -500.0f32..500.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(quantize(lo) <= quantize(hi));
        if lo <= 0.0 { prop_assert_eq!(quantize(lo.min(-0.6)), 0); }
        if hi >= 255.0 { prop_assert_eq!(quantize(hi), 255); }
    }

    #[test]
    fn patches_stay_inside(w in 1usize..200, h in 1usize..200, size in 1usize..64, seed in any::<u64>()) {
        let coords = patch_coords(w, h, size, 8, seed);
        if w < size || h < size {
            prop_assert!(coords.is_empty());
        } else {
            prop_assert_eq!(coords.len(), 8);
            for (x, y) in coords {
                prop_assert!(x + size <= w && y + size <= h);
            }
        }
    }

    #[test]
    fn same_padding_preserves_spatial_shape(x in tensor_strategy(), co in 1usize..4, k in prop_oneof![Just(1usize), Just(3usize), Just(5usize)]) {
        let s = x.shape();
        let mut g = Graph::new();
        let xv = g.constant(x);
        let w = g.constant(Tensor::full(Shape::new(co, s.c, k, k).unwrap(), 0.1));
        let b = g.constant(Tensor::zeros(Shape::new(1, co, 1, 1).unwrap()));
        let y = g.conv2d(xv, w, b, k / 2).unwrap();
        prop_assert_eq!(g.shape(y), Shape::new(s.n, co, s.h, s.w).unwrap());
        prop_assert!(g.value(y).all_finite());
    }

    #[test]
    fn concat_then_slice_is_identity(a in tensor_strategy(), extra in 1usize..4) {
        let s = a.shape();
        let b = Tensor::from_fn(Shape::new(s.n, extra, s.h, s.w).unwrap(), |n, c, y, x| (n + c + y + x) as f64);
        let mut g = Graph::new();
        let (av, bv) = (g.constant(a.clone()), g.constant(b.clone()));
        let cat = g.concat_channels(&[av, bv]).unwrap();
        let t = g.value(cat);
        prop_assert_eq!(t.shape().c, s.c + extra);
        prop_assert_eq!(t.channel_slice(0, s.c).unwrap(), a);
        prop_assert_eq!(t.channel_slice(s.c, extra).unwrap(), b);
    }

    #[test]
    fn sigmoid_and_pool_ranges(x in tensor_strategy()) {
        let mut g = Graph::new();
        let xv = g.constant(x.map(|v| v * 20.0));
        let s = g.sigmoid(xv);
        prop_assert!(g.value(s).data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let p = g.global_avg_pool(xv);
        let (lo, hi) = x.data().iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v * 20.0), h.max(v * 20.0)));
        prop_assert!(g.value(p).data().iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9));
    }
}

#[test]
fn mismatched_shapes_are_errors() {
    let mut g = Graph::<f64>::new();
    let a = g.constant(Tensor::zeros(Shape::new(1, 2, 3, 3).unwrap()));
    let b = g.constant(Tensor::zeros(Shape::new(1, 3, 3, 3).unwrap()));
    assert!(g.add(a, b).is_err());
    assert!(g.mul(a, b).is_err());
    let c = g.constant(Tensor::zeros(Shape::new(1, 2, 4, 3).unwrap()));
    assert!(g.concat_channels(&[a, c]).is_err());
    let w = g.constant(Tensor::zeros(Shape::new(1, 1, 2, 3).unwrap()));
    assert!(g.broadcast_mul(a, w).is_err());
    let loss = g.add(a, a).unwrap();
    assert!(g.backward(loss).is_err());
}
