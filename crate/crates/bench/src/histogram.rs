//! Histograms of point-wise errors.

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` ascending bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn center_bin(&self) -> usize {
        self.counts.len() / 2
    }
}

fn differences<T: Copy + Into<f64>>(a: &[T], b: &[T]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(BenchError::argument("histogram inputs differ in length"));
    }
    Ok(a.iter().zip(b).map(|(&x, &y)| y.into() - x.into()).collect())
}

/// Histogram of `b - a` over `bins` (odd) equal bins spanning
/// `[-m, m]` with `m = max |b - a|`. All-zero differences land in the
/// centre bin.
pub fn error_histogram<T: Copy + Into<f64>>(a: &[T], b: &[T], bins: usize) -> Result<Histogram> {
    let diffs = differences(a, b)?;
    let m = diffs.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    histogram_of(&diffs, bins, if m > 0.0 { m } else { 1.0 })
}

/// Histogram of `diffs` over `bins` (odd) equal bins spanning
/// `[-half_width, half_width]`; values outside go to the end bins.
pub fn histogram_of(diffs: &[f64], bins: usize, half_width: f64) -> Result<Histogram> {
    if bins == 0 || bins.is_multiple_of(2) {
        return Err(BenchError::argument(format!("bin count must be odd, got {bins}")));
    }
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(BenchError::argument("histogram half width must be positive"));
    }
    let width = 2.0 * half_width / bins as f64;
    let edges = (0..=bins).map(|i| -half_width + i as f64 * width).collect();
    let mut counts = vec![0u64; bins];
    for &d in diffs {
        let idx = ((d + half_width) / width).floor();
        let idx = if idx.is_nan() { bins / 2 } else { (idx.max(0.0) as usize).min(bins - 1) };
        counts[idx] += 1;
    }
    Ok(Histogram { edges, counts })
}

/// Fraction of `|b - a| <= fraction * half_width`.
pub fn central_mass<T: Copy + Into<f64>>(a: &[T], b: &[T], half_width: f64, fraction: f64) -> Result<f64> {
    let diffs = differences(a, b)?;
    if diffs.is_empty() {
        return Ok(1.0);
    }
    let limit = fraction * half_width;
    Ok(diffs.iter().filter(|d| d.abs() <= limit).count() as f64 / diffs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_arrays_fill_center_bin() {
        let a = vec![1.5f32; 100];
        let h = error_histogram(&a, &a, 21).unwrap();
        assert_eq!(h.counts[h.center_bin()], 100);
        assert_eq!(h.total(), 100);
        assert_eq!(h.edges.len(), 22);
    }

    #[test]
    fn symmetric_edges() {
        let a = [0.0, 0.0, 0.0];
        let b = [-2.0, 1.5, 0.5];
        let h = error_histogram(&a, &b, 5).unwrap();
        assert_eq!(h.edges.first(), Some(&-2.0));
        assert_eq!(h.edges.last(), Some(&2.0));
        assert_eq!(h.counts, vec![1, 0, 0, 1, 1]);
    }

    #[test]
    fn uniform_noise_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let a = vec![0.0f64; n];
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bins = 11;
        let h = error_histogram(&a, &b, bins).unwrap();
        assert_eq!(h.total(), n as u64);
        let expected = n as f64 / bins as f64;
        let chi2: f64 = h
            .counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 10 degrees of freedom; the 99.9% quantile is about 29.6.
        assert!(chi2 < 29.6, "chi2 {chi2}");
    }

    #[test]
    fn even_bins_rejected() {
        assert!(error_histogram(&[0.0], &[1.0], 4).is_err());
        assert!(error_histogram(&[0.0], &[1.0, 2.0], 5).is_err());
    }

    #[test]
    fn central_mass_counts_inner_quarter() {
        let a = [0.0; 4];
        let b = [0.1, -0.2, 0.5, 1.0];
        assert_eq!(central_mass(&a, &b, 1.0, 0.25).unwrap(), 0.5);
    }
}
