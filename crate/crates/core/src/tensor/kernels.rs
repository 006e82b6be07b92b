//! Numeric kernels behind the graph operations.
//!
//! Convolution lowers to im2col plus a single-threaded GEMM, so results are
//! bit-reproducible for a given build.

use super::{Real, Shape, Tensor};

/// Row-major `m x k` times `k x n`, accumulated into `c` as
/// `c = a * b + beta * c`. `ta`/`tb` read the operand transposed.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<T: Real>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    ta: bool,
    b: &[T],
    tb: bool,
    beta: T,
    c: &mut [T],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every strided access.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            T::one(),
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub ci: usize,
    pub co: usize,
    pub kh: usize,
    pub kw: usize,
    pub pad: usize,
    pub h: usize,
    pub w: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    fn patch_len(&self) -> usize {
        self.ci * self.kh * self.kw
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.pad == 0
    }
}

/// Unfolds one image (`ci x h x w`) into a `(ci*kh*kw) x (oh*ow)` matrix.
fn im2col<T: Real>(g: &ConvGeom, img: &[T], col: &mut [T]) {
    let out_plane = g.oh * g.ow;
    for c in 0..g.ci {
        let src = &img[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = (c * g.kh + ky) * g.kw + kx;
                let dst = &mut col[row * out_plane..(row + 1) * out_plane];
                for oy in 0..g.oh {
                    let iy = oy as isize + ky as isize - g.pad as isize;
                    let line = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    if iy < 0 || iy >= g.h as isize {
                        line.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let srow = &src[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = ox as isize + kx as isize - g.pad as isize;
                        *v = if ix < 0 || ix >= g.w as isize {
                            T::zero()
                        } else {
                            srow[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Folds a column matrix back into image gradients, summing overlaps.
fn col2im<T: Real>(g: &ConvGeom, col: &[T], img: &mut [T]) {
    let out_plane = g.oh * g.ow;
    for c in 0..g.ci {
        let dst = &mut img[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = (c * g.kh + ky) * g.kw + kx;
                let src = &col[row * out_plane..(row + 1) * out_plane];
                for oy in 0..g.oh {
                    let iy = oy as isize + ky as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let drow = &mut dst[iy as usize * g.w..(iy as usize + 1) * g.w];
                    let line = &src[oy * g.ow..(oy + 1) * g.ow];
                    for (ox, &v) in line.iter().enumerate() {
                        let ix = ox as isize + kx as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            drow[ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv2d_forward<T: Real>(
    g: &ConvGeom,
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
) -> Tensor<T> {
    let s = input.shape();
    let out_shape = Shape {
        n: s.n,
        c: g.co,
        h: g.oh,
        w: g.ow,
    };
    let mut out = Tensor::zeros(out_shape);
    let in_plane = g.ci * g.h * g.w;
    let out_plane = g.oh * g.ow;
    let k = g.patch_len();
    let mut col = if g.is_pointwise() {
        Vec::new()
    } else {
        vec![T::zero(); k * out_plane]
    };
    let b = bias.data();
    for n in 0..s.n {
        let img = &input.data()[n * in_plane..(n + 1) * in_plane];
        let dst = &mut out.data_mut()[n * g.co * out_plane..(n + 1) * g.co * out_plane];
        for (co, chunk) in dst.chunks_mut(out_plane).enumerate() {
            chunk.iter_mut().for_each(|v| *v = b[co]);
        }
        let cols: &[T] = if g.is_pointwise() {
            img
        } else {
            im2col(g, img, &mut col);
            &col
        };
        gemm(g.co, k, out_plane, weight.data(), false, cols, false, T::one(), dst);
    }
    out
}

/// Returns `(d_input, d_weight, d_bias)`; `d_input` is skipped when the
/// input does not need a gradient.
/// Gradients of input, weight and bias; `None` where not requested.
pub(crate) type ConvGrads<T> = (Option<Tensor<T>>, Option<Tensor<T>>, Option<Tensor<T>>);

pub(crate) fn conv2d_backward<T: Real>(
    g: &ConvGeom,
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    need_input: bool,
    need_params: bool,
) -> ConvGrads<T> {
    let s = input.shape();
    let in_plane = g.ci * g.h * g.w;
    let out_plane = g.oh * g.ow;
    let k = g.patch_len();
    let mut d_input = need_input.then(|| Tensor::zeros(s));
    let mut d_weight = need_params.then(|| Tensor::zeros(weight.shape()));
    let mut d_bias = need_params.then(|| {
        Tensor::zeros(Shape {
            n: 1,
            c: g.co,
            h: 1,
            w: 1,
        })
    });
    let mut col = vec![T::zero(); if g.is_pointwise() { 0 } else { k * out_plane }];
    let mut dcol = vec![T::zero(); if need_input { k * out_plane } else { 0 }];

    for n in 0..s.n {
        let img = &input.data()[n * in_plane..(n + 1) * in_plane];
        let gout = &grad_out.data()[n * g.co * out_plane..(n + 1) * g.co * out_plane];

        if let (Some(dw), Some(db)) = (d_weight.as_mut(), d_bias.as_mut()) {
            let cols: &[T] = if g.is_pointwise() {
                img
            } else {
                im2col(g, img, &mut col);
                &col
            };
            gemm(g.co, out_plane, k, gout, false, cols, true, T::one(), dw.data_mut());
            for (co, chunk) in gout.chunks(out_plane).enumerate() {
                db.data_mut()[co] += chunk.iter().copied().sum::<T>();
            }
        }

        if let Some(dx) = d_input.as_mut() {
            let dimg = &mut dx.data_mut()[n * in_plane..(n + 1) * in_plane];
            if g.is_pointwise() {
                gemm(k, g.co, out_plane, weight.data(), true, gout, false, T::zero(), dimg);
            } else {
                gemm(k, g.co, out_plane, weight.data(), true, gout, false, T::zero(), &mut dcol);
                col2im(g, &dcol, dimg);
            }
        }
    }
    (d_input, d_weight, d_bias)
}
