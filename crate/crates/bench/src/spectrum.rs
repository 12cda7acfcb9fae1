//! Radially averaged power spectra of 2D fields.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// Power in annular wavenumber bins `k = 1..=floor(min(rows, cols) / 2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub wavenumber: Vec<f64>,
    /// Mean periodogram value over the frequencies in each bin.
    pub mean_power: Vec<f64>,
    /// Summed periodogram value in each bin; sums to the field variance.
    pub total_power: Vec<f64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.wavenumber.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavenumber.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.total_power.iter().sum()
    }
}

/// Unnormalized forward 2D DFT of a row-major real field.
pub fn fft2(values: &[f64], rows: usize, cols: usize) -> Vec<Complex<f64>> {
    let mut planner = FftPlanner::new();
    let mut data: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let row_fft = planner.plan_fft_forward(cols);
    for row in data.chunks_exact_mut(cols) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(rows);
    let mut column = vec![Complex::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = data[r * cols + c];
        }
        col_fft.process(&mut column);
        for r in 0..rows {
            data[r * cols + c] = column[r];
        }
    }
    data
}

/// Signed frequency index of DFT bin `i` of an `n`-point transform.
fn signed(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// Radially averaged periodogram `|F|^2 / N^2` of the mean-removed field.
///
/// Wavenumbers are measured in cycles per shorter domain side, so axis
/// frequencies of a non-square field are scaled to a common unit. Each
/// frequency goes to the bin `round(k)`, clamped into `1..=kmax`; corner
/// frequencies beyond `kmax` fold into the last bin so that no power is lost.
pub fn radial_power_spectrum<T: Copy + Into<f64>>(values: &[T], rows: usize, cols: usize) -> Result<Spectrum> {
    if values.len() != rows * cols {
        return Err(BenchError::argument("spectrum input must be rows x cols"));
    }
    let kmax = rows.min(cols) / 2;
    if kmax == 0 {
        return Err(BenchError::argument("spectrum needs at least 2x2 values"));
    }
    let mut x: Vec<f64> = values.iter().map(|&v| v.into()).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(BenchError::argument("spectrum input must be finite"));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    for v in &mut x {
        *v -= mean;
    }
    let f = fft2(&x, rows, cols);
    let short = rows.min(cols) as f64;
    let mut total = vec![0.0; kmax];
    let mut count = vec![0usize; kmax];
    for r in 0..rows {
        let ky = signed(r, rows) / rows as f64 * short;
        for c in 0..cols {
            if r == 0 && c == 0 {
                continue;
            }
            let kx = signed(c, cols) / cols as f64 * short;
            let bin = (kx.hypot(ky).round() as usize).clamp(1, kmax) - 1;
            total[bin] += f[r * cols + c].norm_sqr() / (n * n);
            count[bin] += 1;
        }
    }
    let mean_power = total
        .iter()
        .zip(&count)
        .map(|(&t, &c)| if c > 0 { t / c as f64 } else { 0.0 })
        .collect();
    Ok(Spectrum {
        wavenumber: (1..=kmax).map(|k| k as f64).collect(),
        mean_power,
        total_power: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::TAU;

    fn variance(x: &[f64]) -> f64 {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
    }

    #[test]
    fn fft_matches_direct_dft() {
        let (rows, cols) = (5, 6);
        let x: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64 - 3.0).collect();
        let f = fft2(&x, rows, cols);
        for (u, v) in [(0, 0), (1, 2), (4, 5), (2, 3)] {
            let mut acc = Complex::new(0.0, 0.0);
            for r in 0..rows {
                for c in 0..cols {
                    let ang = -TAU * (u as f64 * r as f64 / rows as f64 + v as f64 * c as f64 / cols as f64);
                    acc += Complex::from_polar(x[r * cols + c], ang);
                }
            }
            assert!((f[u * cols + v] - acc).norm() < 1e-9);
        }
    }

    #[test]
    fn constant_field_has_no_power() {
        let s = radial_power_spectrum(&vec![4.0f32; 64], 8, 8).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.total_power.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn sinusoid_lands_in_one_bin() {
        let (rows, cols) = (64, 64);
        let x: Vec<f64> = (0..rows * cols)
            .map(|i| (TAU * 6.0 * (i % cols) as f64 / cols as f64).sin())
            .collect();
        let s = radial_power_spectrum(&x, rows, cols).unwrap();
        let peak = s
            .total_power
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(s.wavenumber[peak], 6.0);
        assert!(s.total_power[peak] > 0.999 * s.total());
    }

    #[test]
    fn parseval_holds_including_rectangles() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (rows, cols) in [(32, 32), (40, 24), (17, 33)] {
            let x: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(&mut rng)).collect();
            let s = radial_power_spectrum(&x, rows, cols).unwrap();
            assert_eq!(s.len(), rows.min(cols) / 2);
            let v = variance(&x);
            assert!((s.total() - v).abs() <= 0.02 * v);
        }
    }

    #[test]
    fn white_noise_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (rows, cols) = (128, 128);
        let x: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(&mut rng)).collect();
        let s = radial_power_spectrum(&x, rows, cols).unwrap();
        let expected = variance(&x) / (rows * cols) as f64;
        // Skip the first bins, which hold few frequencies.
        for k in 8..s.len() {
            let rel = s.mean_power[k] / expected;
            assert!((0.7..1.3).contains(&rel), "bin {k}: {rel}");
        }
    }
}
