//! Point-wise error statistics between an original and a reconstructed array.

use crate::error::{EbccError, Result};

/// Point-wise error statistics. `max_abs` and `rmse` are in units of the
/// original variable; `rel_max` is `max_abs` divided by the original range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub max_abs: f64,
    pub rel_max: f64,
    pub rmse: f64,
}

impl ErrorStats {
    pub const ZERO: ErrorStats = ErrorStats {
        max_abs: 0.0,
        rel_max: 0.0,
        rmse: 0.0,
    };
}

/// Computes max absolute error, range-relative max error and RMSE.
///
/// The range is taken from `original`. For a constant original, `rel_max` is 0
/// when the reconstruction is exact and infinite otherwise.
pub fn error_stats<T>(original: &[T], reconstructed: &[T]) -> Result<ErrorStats>
where
    T: Copy + Into<f64>,
{
    if original.len() != reconstructed.len() {
        return Err(EbccError::argument(format!(
            "shape mismatch: {} original values vs {} reconstructed",
            original.len(),
            reconstructed.len()
        )));
    }
    if original.is_empty() {
        return Ok(ErrorStats::ZERO);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut max_abs = 0.0f64;
    let mut sum_sq = 0.0f64;
    for (&a, &b) in original.iter().zip(reconstructed) {
        let (a, b) = (a.into(), b.into());
        lo = lo.min(a);
        hi = hi.max(a);
        let d = (b - a).abs();
        max_abs = max_abs.max(d);
        sum_sq += d * d;
    }
    let range = hi - lo;
    let rel_max = if range > 0.0 {
        max_abs / range
    } else if max_abs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(ErrorStats {
        max_abs,
        rel_max,
        rmse: (sum_sq / original.len() as f64).sqrt(),
    })
}

/// True when every point of `reconstructed` lies within `epsilon_rel` times
/// the range `[vmin, vmax]` of `original`. Both the absolute and the divided
/// form of the inequality are checked so the result agrees with
/// [`error_stats`] under floating-point rounding.
pub fn within_relative_bound(
    original: &[f32],
    reconstructed: &[f32],
    vmin: f32,
    vmax: f32,
    epsilon_rel: f64,
) -> bool {
    let range = f64::from(vmax) - f64::from(vmin);
    let abs_bound = epsilon_rel * range;
    original.iter().zip(reconstructed).all(|(&a, &b)| {
        let d = (f64::from(b) - f64::from(a)).abs();
        if range > 0.0 {
            d <= abs_bound && d / range <= epsilon_rel
        } else {
            d == 0.0
        }
    })
}
