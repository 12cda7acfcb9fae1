//! Uniform mid-tread quantizer used as a reference point for error
//! distributions at a matched compression ratio.

use std::collections::HashMap;

/// Quantized reconstruction and its estimated coded size.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub step: f64,
    pub reconstruction: Vec<f32>,
    /// Zeroth-order entropy of the delta-coded bin indices.
    pub bits_per_value: f64,
    /// `32 / bits_per_value`.
    pub ratio: f64,
}

/// Quantizes `values` to multiples of `step` offset by the minimum.
pub fn uniform_quantize(values: &[f32], step: f64) -> Quantized {
    let lo = values.iter().fold(f32::INFINITY, |a, &b| a.min(b)) as f64;
    let indices: Vec<i64> = values
        .iter()
        .map(|&v| ((f64::from(v) - lo) / step).round() as i64)
        .collect();
    let reconstruction = indices.iter().map(|&i| (lo + i as f64 * step) as f32).collect();
    let mut counts: HashMap<i64, usize> = HashMap::new();
    let mut prev = 0i64;
    for &i in &indices {
        *counts.entry(i - prev).or_default() += 1;
        prev = i;
    }
    let n = values.len().max(1) as f64;
    let bits_per_value: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    let ratio = if bits_per_value > 0.0 { 32.0 / bits_per_value } else { f64::INFINITY };
    Quantized {
        step,
        reconstruction,
        bits_per_value,
        ratio,
    }
}

/// Searches the step (bisection on its logarithm) until the estimated ratio
/// is within `tolerance` (relative) of `target`.
pub fn match_ratio(values: &[f32], target: f64, tolerance: f64) -> Option<Quantized> {
    let (lo, hi) = values
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = f64::from(hi) - f64::from(lo);
    if !(range > 0.0) {
        return None;
    }
    let (mut a, mut b) = ((range * 1e-9).ln(), (range * 4.0).ln());
    for _ in 0..100 {
        let mid = 0.5 * (a + b);
        let q = uniform_quantize(values, mid.exp());
        if (q.ratio / target - 1.0).abs() <= tolerance {
            return Some(q);
        }
        if q.ratio < target {
            a = mid;
        } else {
            b = mid;
        }
    }
    None
}
