//! Mean structural similarity with a Gaussian window.

use crate::error::{BenchError, Result};

pub const SIGMA: f64 = 1.5;
pub const MAX_RADIUS: usize = 5;
pub const K1: f64 = 0.01;
pub const K2: f64 = 0.03;
const RANGE_FLOOR: f64 = 1e-30;

/// Normalized 1D Gaussian weights of the given radius.
pub fn gaussian_window(radius: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * SIGMA * SIGMA)).exp()
        })
        .collect();
    let sum: f64 = w.iter().sum();
    w.into_iter().map(|x| x / sum).collect()
}

/// Window radius used for a field: 5 (an 11x11 window), reduced for fields
/// too small to hold one.
pub fn window_radius(rows: usize, cols: usize) -> usize {
    MAX_RADIUS.min((rows.min(cols).saturating_sub(1)) / 2)
}

/// Valid-region separable filtering of a row-major field.
fn filter_valid(x: &[f64], rows: usize, cols: usize, w: &[f64]) -> Vec<f64> {
    let k = w.len();
    let (orows, ocols) = (rows + 1 - k, cols + 1 - k);
    let mut horiz = vec![0.0; rows * ocols];
    for r in 0..rows {
        let src = &x[r * cols..(r + 1) * cols];
        for c in 0..ocols {
            horiz[r * ocols + c] = w.iter().zip(&src[c..c + k]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; orows * ocols];
    for r in 0..orows {
        for (j, &wj) in w.iter().enumerate() {
            let src = &horiz[(r + j) * ocols..(r + j + 1) * ocols];
            for (o, s) in out[r * ocols..(r + 1) * ocols].iter_mut().zip(src) {
                *o += wj * s;
            }
        }
    }
    out
}

/// Mean SSIM of `b` against reference `a`, both `rows x cols`, with dynamic
/// range `max(a) - min(a)`. Only windows fully inside the field count.
pub fn ssim<T: Copy + Into<f64>>(a: &[T], b: &[T], rows: usize, cols: usize) -> Result<f64> {
    if a.len() != rows * cols || b.len() != rows * cols {
        return Err(BenchError::argument("ssim inputs must both be rows x cols"));
    }
    if rows < 8 || cols < 8 {
        return Err(BenchError::argument(format!("ssim needs at least 8x8, got {rows}x{cols}")));
    }
    let a: Vec<f64> = a.iter().map(|&v| v.into()).collect();
    let b: Vec<f64> = b.iter().map(|&v| v.into()).collect();
    if a == b {
        return Ok(1.0);
    }
    let (lo, hi) = a
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let range = (hi - lo).max(RANGE_FLOOR);
    let c1 = (K1 * range).powi(2);
    let c2 = (K2 * range).powi(2);
    let w = gaussian_window(window_radius(rows, cols));
    let prod = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p * q).collect() };
    let mu_a = filter_valid(&a, rows, cols, &w);
    let mu_b = filter_valid(&b, rows, cols, &w);
    let aa = filter_valid(&prod(&a, &a), rows, cols, &w);
    let bb = filter_valid(&prod(&b, &b), rows, cols, &w);
    let ab = filter_valid(&prod(&a, &b), rows, cols, &w);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / mu_a.len() as f64)
}
