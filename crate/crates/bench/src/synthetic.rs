//! Seeded synthetic fields standing in for reanalysis variables.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    /// Random Fourier modes with a power-law spectrum.
    SmoothFourier,
    /// Zonal wind of a Rankine vortex with inflow on a background flow.
    Vortex,
    /// A smooth field with isolated large spikes.
    Spiky,
}

impl FieldKind {
    pub const ALL: [FieldKind; 3] = [FieldKind::SmoothFourier, FieldKind::Vortex, FieldKind::Spiky];

    pub fn name(self) -> &'static str {
        match self {
            FieldKind::SmoothFourier => "smooth-fourier",
            FieldKind::Vortex => "vortex",
            FieldKind::Spiky => "spiky",
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FieldKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        FieldKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| BenchError::argument(format!("unknown field kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFieldSpec {
    pub kind: FieldKind,
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
    /// Fraction of points replaced by spikes (spiky kind only).
    pub spike_fraction: f64,
    /// Exponent `s` of the power spectrum `P(k) ~ k^-s`.
    pub spectral_slope: f64,
}

impl SyntheticFieldSpec {
    pub fn new(kind: FieldKind, rows: usize, cols: usize, seed: u64) -> Self {
        Self {
            kind,
            rows,
            cols,
            seed,
            spike_fraction: 1e-4,
            spectral_slope: 3.0,
        }
    }

    pub fn with_spike_fraction(mut self, fraction: f64) -> Self {
        self.spike_fraction = fraction;
        self
    }

    pub fn with_spectral_slope(mut self, slope: f64) -> Self {
        self.spectral_slope = slope;
        self
    }

    /// Generates the field in row-major order.
    pub fn generate(&self) -> Result<Vec<f32>> {
        if self.rows == 0 || self.cols == 0 {
            return Err(BenchError::argument("synthetic fields need non-zero extents"));
        }
        if !(0.0..=1.0).contains(&self.spike_fraction) {
            return Err(BenchError::argument("spike fraction must lie in [0, 1]"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let values = match self.kind {
            FieldKind::SmoothFourier => smooth_field(self.rows, self.cols, self.spectral_slope, &mut rng),
            FieldKind::Vortex => {
                let vortex = Vortex::random(self.rows, self.cols, &mut rng);
                vortex.winds(self.rows, self.cols, 0.0).0
            }
            FieldKind::Spiky => {
                let mut v = smooth_field(self.rows, self.cols, self.spectral_slope, &mut rng);
                add_spikes(&mut v, self.spike_fraction, &mut rng);
                v
            }
        };
        Ok(values.into_iter().map(|v| v as f32).collect())
    }
}

/// One separable mode `a cos(2 pi kx x / cols + px) cos(2 pi ky y / rows + py)`
/// whose phases drift at `omega` radians per unit time.
#[derive(Debug, Clone, Copy)]
struct Mode {
    amp: f64,
    kx: f64,
    ky: f64,
    px: f64,
    py: f64,
    omega: f64,
}

/// A random sum of Fourier modes with amplitudes `k^(-slope/2)`.
#[derive(Debug, Clone)]
pub struct FourierModes {
    modes: Vec<Mode>,
}

impl FourierModes {
    pub fn random(rows: usize, cols: usize, slope: f64, count: usize, rng: &mut impl Rng) -> Self {
        let kmax = (rows.min(cols) / 4).max(1) as i64;
        let modes = (0..count)
            .map(|_| {
                let (kx, ky) = loop {
                    let kx = rng.random_range(0..=kmax);
                    let ky = rng.random_range(0..=kmax);
                    if kx != 0 || ky != 0 {
                        break (kx as f64, ky as f64);
                    }
                };
                let k = kx.hypot(ky);
                let z: f64 = rng.sample(StandardNormal);
                Mode {
                    amp: z * k.powf(-slope / 2.0),
                    kx,
                    ky,
                    px: rng.random_range(0.0..TAU),
                    py: rng.random_range(0.0..TAU),
                    omega: rng.random_range(-1.0..1.0),
                }
            })
            .collect();
        Self { modes }
    }

    /// Field values at time `t`.
    pub fn eval(&self, rows: usize, cols: usize, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; rows * cols];
        for m in &self.modes {
            let fx: Vec<f64> = (0..cols)
                .map(|c| (TAU * m.kx * c as f64 / cols as f64 + m.px + m.omega * t).cos())
                .collect();
            let fy: Vec<f64> = (0..rows)
                .map(|r| m.amp * (TAU * m.ky * r as f64 / rows as f64 + m.py).cos())
                .collect();
            accumulate_outer(&mut out, &fy, &fx);
        }
        out
    }

    /// Non-divergent winds `u = d(psi)/dy`, `v = -d(psi)/dx` of the field
    /// taken as a streamfunction, in grid units.
    pub fn rotational_winds(&self, rows: usize, cols: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
        let mut u = vec![0.0; rows * cols];
        let mut v = vec![0.0; rows * cols];
        for m in &self.modes {
            let (ax, ay) = (TAU * m.kx / cols as f64, TAU * m.ky / rows as f64);
            let phase_x = |c: usize| ax * c as f64 + m.px + m.omega * t;
            let phase_y = |r: usize| ay * r as f64 + m.py;
            let cx: Vec<f64> = (0..cols).map(|c| phase_x(c).cos()).collect();
            let sx: Vec<f64> = (0..cols).map(|c| phase_x(c).sin()).collect();
            let cy: Vec<f64> = (0..rows).map(|r| m.amp * phase_y(r).cos()).collect();
            let sy: Vec<f64> = (0..rows).map(|r| m.amp * phase_y(r).sin()).collect();
            // u = -a ay cos(x) sin(y), v = a ax sin(x) cos(y)
            let sy_u: Vec<f64> = sy.iter().map(|s| -ay * s).collect();
            let cy_v: Vec<f64> = cy.iter().map(|c| ax * c).collect();
            accumulate_outer(&mut u, &sy_u, &cx);
            accumulate_outer(&mut v, &cy_v, &sx);
        }
        (u, v)
    }
}

fn accumulate_outer(out: &mut [f64], col_factor: &[f64], row_factor: &[f64]) {
    let cols = row_factor.len();
    for (r, &a) in col_factor.iter().enumerate() {
        for (o, &b) in out[r * cols..(r + 1) * cols].iter_mut().zip(row_factor) {
            *o += a * b;
        }
    }
}

/// A smooth temperature-like field: Fourier modes scaled to a standard
/// deviation of 15 around 280.
fn smooth_field(rows: usize, cols: usize, slope: f64, rng: &mut impl Rng) -> Vec<f64> {
    let modes = FourierModes::random(rows, cols, slope, 96, rng);
    let mut v = modes.eval(rows, cols, 0.0);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
    let scale = if std > 0.0 { 15.0 / std } else { 0.0 };
    for x in &mut v {
        *x = 280.0 + (*x - mean) * scale;
    }
    v
}

/// Replaces `round(fraction * n)` (at least one) distinct points with spikes
/// of 0.5 to 1 times the field range and random sign.
fn add_spikes(values: &mut [f64], fraction: f64, rng: &mut impl Rng) {
    let n = values.len();
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let range = (hi - lo).max(1.0);
    let count = ((fraction * n as f64).round() as usize).clamp(1, n);
    for i in sample(rng, n, count) {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        values[i] += sign * range * rng.random_range(0.5..=1.0);
    }
}

/// A Rankine vortex with radial inflow, translating over a uniform background
/// flow, plus weak smooth perturbations. Lengths are in grid cells.
#[derive(Debug, Clone)]
pub struct Vortex {
    pub center: (f64, f64),
    pub velocity: (f64, f64),
    pub core_radius: f64,
    pub max_speed: f64,
    pub inflow: f64,
    pub background: (f64, f64),
    perturbation: FourierModes,
}

impl Vortex {
    pub fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> Self {
        let (r, c) = (rows as f64, cols as f64);
        Self {
            center: (rng.random_range(0.35..0.65) * c, rng.random_range(0.35..0.65) * r),
            velocity: (rng.random_range(-0.05..0.05) * c, rng.random_range(-0.05..0.05) * r),
            core_radius: rng.random_range(0.06..0.12) * r.min(c),
            max_speed: rng.random_range(30.0..50.0),
            inflow: rng.random_range(0.15..0.3),
            background: (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
            perturbation: FourierModes::random(rows, cols, 3.0, 48, rng),
        }
    }

    /// `(u, v)` at time `t`, where the vortex centre has moved by
    /// `velocity * t` cells.
    pub fn winds(&self, rows: usize, cols: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
        let (mut u, mut v) = self.perturbation.rotational_winds(rows, cols, t);
        let pert_scale = 2.0 / rms(&u).max(rms(&v)).max(1e-12);
        let cx = self.center.0 + self.velocity.0 * t;
        let cy = self.center.1 + self.velocity.1 * t;
        for r in 0..rows {
            for c in 0..cols {
                let (dx, dy) = (c as f64 - cx, r as f64 - cy);
                let dist = dx.hypot(dy);
                let vt = if dist < self.core_radius {
                    self.max_speed * dist / self.core_radius
                } else {
                    self.max_speed * self.core_radius / dist
                };
                let vr = -self.inflow * vt;
                let (cos, sin) = if dist > 0.0 { (dx / dist, dy / dist) } else { (1.0, 0.0) };
                let i = r * cols + c;
                u[i] = u[i] * pert_scale + self.background.0 - vt * sin + vr * cos;
                v[i] = v[i] * pert_scale + self.background.1 + vt * cos + vr * sin;
            }
        }
        (u, v)
    }
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64).sqrt()
}

/// Wind scenarios for the trajectory experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindScenario {
    /// A translating vortex.
    Vortex,
    /// Non-divergent flow from a drifting random streamfunction.
    Streamfunction,
}

impl WindScenario {
    pub const ALL: [WindScenario; 2] = [WindScenario::Vortex, WindScenario::Streamfunction];

    pub fn name(self) -> &'static str {
        match self {
            WindScenario::Vortex => "vortex",
            WindScenario::Streamfunction => "streamfunction",
        }
    }
}

/// `frames` snapshots of `(u, v)` at unit time spacing, scaled so that the
/// largest speed is `max_speed` (grid cells per unit time).
pub fn wind_series(
    scenario: WindScenario,
    rows: usize,
    cols: usize,
    frames: usize,
    max_speed: f64,
    seed: u64,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<(Vec<f64>, Vec<f64>)> = match scenario {
        WindScenario::Vortex => {
            let vortex = Vortex::random(rows, cols, &mut rng);
            let step = 1.0 / frames.max(1) as f64;
            (0..frames).map(|f| vortex.winds(rows, cols, f as f64 * step)).collect()
        }
        WindScenario::Streamfunction => {
            let modes = FourierModes::random(rows, cols, 3.0, 64, &mut rng);
            (0..frames)
                .map(|f| modes.rotational_winds(rows, cols, 0.5 * f as f64))
                .collect()
        }
    };
    let peak = raw
        .iter()
        .flat_map(|(u, v)| u.iter().zip(v).map(|(a, b)| a.hypot(*b)))
        .fold(0.0, f64::max);
    let scale = if peak > 0.0 { max_speed / peak } else { 0.0 };
    raw.into_iter()
        .map(|(u, v)| {
            (
                u.into_iter().map(|x| x * scale).collect(),
                v.into_iter().map(|x| x * scale).collect(),
            )
        })
        .collect()
}
