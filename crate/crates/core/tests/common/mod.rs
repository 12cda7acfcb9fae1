#![allow(dead_code)]

use ebcc_core::grid::{flatten_chunk, Chunk};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sum of a few random low-frequency modes plus an offset.
pub fn smooth_values(rows: usize, cols: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|k| {
            let amp = 1.0 / (1.0 + k as f64);
            (
                amp,
                rng.random_range(0.5..4.0),
                rng.random_range(0.5..4.0),
                rng.random_range(0.0..6.3),
            )
        })
        .collect();
    let offset = rng.random_range(-300.0..300.0);
    (0..rows * cols)
        .map(|i| {
            let y = (i / cols) as f64 / rows as f64;
            let x = (i % cols) as f64 / cols as f64;
            let v: f64 = modes
                .iter()
                .map(|&(a, fx, fy, ph)| a * (std::f64::consts::TAU * (fx * x + fy * y) + ph).sin())
                .sum();
            (offset + 10.0 * v) as f32
        })
        .collect()
}

/// Smooth background with isolated spikes of large amplitude.
pub fn spiky_values(rows: usize, cols: usize, seed: u64, fraction: f64) -> Vec<f32> {
    let mut v = smooth_values(rows, cols, seed);
    let (lo, hi) = v.iter().fold((f32::MAX, f32::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    let range = hi - lo;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let count = ((fraction * v.len() as f64).round() as usize).max(1);
    for _ in 0..count {
        let i = rng.random_range(0..v.len());
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        v[i] += sign * range * rng.random_range(0.5f32..1.0);
    }
    v
}

pub fn noise_values(rows: usize, cols: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows * cols).map(|_| rng.random_range(-1.0f32..1.0)).collect()
}

pub fn chunk(values: &[f32], rows: usize, cols: usize) -> Chunk {
    flatten_chunk(values, [1, 1, rows, cols], [0; 4]).unwrap()
}
