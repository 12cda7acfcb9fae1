//! Horizontal divergence of a wind field on a uniform grid.

use crate::error::{BenchError, Result};

/// Derivative along a strided line of `n` samples spaced `h`: central
/// differences inside, second-order one-sided differences at the ends.
fn derivative(get: impl Fn(usize) -> f64, n: usize, h: f64, out: &mut impl FnMut(usize, f64)) {
    match n {
        0 => {}
        1 => out(0, 0.0),
        2 => {
            let d = (get(1) - get(0)) / h;
            out(0, d);
            out(1, d);
        }
        _ => {
            out(0, (-3.0 * get(0) + 4.0 * get(1) - get(2)) / (2.0 * h));
            for i in 1..n - 1 {
                out(i, (get(i + 1) - get(i - 1)) / (2.0 * h));
            }
            out(n - 1, (3.0 * get(n - 1) - 4.0 * get(n - 2) + get(n - 3)) / (2.0 * h));
        }
    }
}

/// `du/dx + dv/dy` where `x` runs along columns (spacing `dx`) and `y` along
/// rows (spacing `dy`).
pub fn horizontal_divergence<T: Copy + Into<f64>>(
    u: &[T],
    v: &[T],
    rows: usize,
    cols: usize,
    dx: f64,
    dy: f64,
) -> Result<Vec<f64>> {
    if u.len() != rows * cols || v.len() != rows * cols {
        return Err(BenchError::argument("wind components must both be rows x cols"));
    }
    if !(dx > 0.0 && dy > 0.0) {
        return Err(BenchError::argument("grid spacing must be positive"));
    }
    let mut div = vec![0.0; rows * cols];
    for r in 0..rows {
        derivative(|c| u[r * cols + c].into(), cols, dx, &mut |c, d| div[r * cols + c] += d);
    }
    for c in 0..cols {
        derivative(|r| v[r * cols + c].into(), rows, dy, &mut |r, d| div[r * cols + c] += d);
    }
    Ok(div)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: usize, cols: usize, h: f64, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..rows * cols)
            .map(|i| f((i % cols) as f64 * h, (i / cols) as f64 * h))
            .collect()
    }

    #[test]
    fn linear_expansion_is_one() {
        let u = grid(10, 12, 0.5, |x, _| x);
        let v = vec![0.0; 120];
        let d = horizontal_divergence(&u, &v, 10, 12, 0.5, 0.5).unwrap();
        assert!(d.iter().all(|x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn solid_rotation_is_zero() {
        let u = grid(9, 9, 1.0, |_, y| -y);
        let v = grid(9, 9, 1.0, |x, _| x);
        let d = horizontal_divergence(&u, &v, 9, 9, 1.0, 1.0).unwrap();
        assert!(d.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn second_order_convergence() {
        // u = sin(x) cos(y), v = cos(x) sin(2y); div = cos(x)cos(y) + 2cos(x)cos(2y)
        let mut errs = Vec::new();
        for n in [33usize, 65, 129] {
            let h = 2.0 / (n - 1) as f64;
            let u = grid(n, n, h, |x, y| x.sin() * y.cos());
            let v = grid(n, n, h, |x, y| x.cos() * (2.0 * y).sin());
            let exact = grid(n, n, h, |x, y| x.cos() * y.cos() + 2.0 * x.cos() * (2.0 * y).cos());
            let d = horizontal_divergence(&u, &v, n, n, h, h).unwrap();
            let err = d.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            errs.push(err);
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.8, "order {order} from {errs:?}");
        }
    }

    #[test]
    fn mismatched_shapes_rejected() {
        assert!(horizontal_divergence(&[0.0; 4], &[0.0; 3], 2, 2, 1.0, 1.0).is_err());
    }
}
