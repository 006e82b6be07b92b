//! Orthonormal 8x8 type-II DCT, computed as `M b M^T` with a cosine table.

use std::sync::OnceLock;

fn basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0.0; 8]; 8];
        for (u, row) in m.iter_mut().enumerate() {
            let scale = if u == 0 { (1.0f64 / 8.0).sqrt() } else { 0.5 };
            for (x, v) in row.iter_mut().enumerate() {
                *v = scale
                    * ((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI / 16.0).cos();
            }
        }
        m
    })
}

/// `out = a * b * c` for 8x8 row-major blocks, with `a`/`c` optionally transposed.
fn sandwich(block: &[f64; 64], transpose_outer: bool) -> [f64; 64] {
    let m = basis();
    let at = |i: usize, j: usize| if transpose_outer { m[j][i] } else { m[i][j] };
    let mut tmp = [0.0; 64];
    for i in 0..8 {
        for j in 0..8 {
            tmp[i * 8 + j] = (0..8).map(|k| at(i, k) * block[k * 8 + j]).sum();
        }
    }
    let mut out = [0.0; 64];
    for i in 0..8 {
        for j in 0..8 {
            out[i * 8 + j] = (0..8).map(|k| tmp[i * 8 + k] * at(j, k)).sum();
        }
    }
    out
}

/// Forward transform of a level-shifted block; a flat block of value `v`
/// yields DC `8v` and zero AC.
pub fn dct8x8(block: &[f64; 64]) -> [f64; 64] {
    sandwich(block, false)
}

pub fn idct8x8(coef: &[f64; 64]) -> [f64; 64] {
    sandwich(coef, true)
}
