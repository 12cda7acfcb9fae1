//! Evaluation suites: compress synthetic fields over parameter grids and
//! record rate-distortion rows.

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ebcc_core::container::EbccFile;
use ebcc_core::{compress_grid, decompress_grid, error_stats, ChunkMode, EbccParams, ErrorStats, GridArray};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::divergence::horizontal_divergence;
use crate::error::{BenchError, Result};
use crate::histogram::{error_histogram, Histogram};
use crate::spectrum::{radial_power_spectrum, Spectrum};
use crate::ssim::ssim;
use crate::synthetic::{wind_series, FieldKind, SyntheticFieldSpec, Vortex, WindScenario};
use crate::trajectory::{advect_particles, particle_density_rmse, DensityGrid, WindField};

/// The relative error targets used throughout the suites.
pub const EPSILON_GRID: [f64; 5] = [1e-3, 5e-3, 1e-2, 5e-2, 1e-1];
/// Quantile settings swept by the ablation suite.
pub const Q_GRID: [f64; 4] = [1.0 - 1e-3, 1.0 - 1e-4, 1.0 - 1e-5, 1.0];
pub const DEFAULT_Q: f64 = 1.0 - 1e-5;

/// A single-chunk round trip through the compressor and container.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrip {
    pub reconstruction: Vec<f32>,
    pub mode: ChunkMode,
    /// Base plus residual bytes.
    pub payload_bytes: usize,
    /// Size of the complete `.ebcc` file.
    pub file_bytes: usize,
}

impl RoundTrip {
    /// Uncompressed `f32` bytes over the file size.
    pub fn ratio(&self) -> f64 {
        (self.reconstruction.len() * 4) as f64 / self.file_bytes as f64
    }
}

/// Compresses a `rows x cols` field as one chunk, serializes it, reads it back
/// and decompresses it.
pub fn round_trip(values: &[f32], rows: usize, cols: usize, params: &EbccParams) -> Result<RoundTrip> {
    let dims = [1, 1, rows, cols];
    let grid = GridArray::new(values.to_vec(), dims)?;
    let chunks = compress_grid(&grid, params)?;
    let file = EbccFile {
        dims,
        chunk_shape: grid.chunk_shape(),
        chunks,
    };
    let bytes = file.to_bytes()?;
    let parsed = EbccFile::from_bytes(&bytes)?;
    let out = decompress_grid(&parsed.chunks, parsed.dims, parsed.chunk_shape)?;
    Ok(RoundTrip {
        mode: parsed.chunks[0].mode,
        payload_bytes: parsed.chunks[0].payload.len(),
        file_bytes: bytes.len(),
        reconstruction: out.into_data(),
    })
}

/// All metrics for one original/reconstruction pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub max_abs: f64,
    pub rel_max: f64,
    pub rmse: f64,
    pub ssim: f64,
    pub histogram: Histogram,
    pub spectrum: Spectrum,
    pub compression_ratio: f64,
}

impl MetricReport {
    pub fn compute(
        original: &[f32],
        reconstruction: &[f32],
        rows: usize,
        cols: usize,
        compression_ratio: f64,
    ) -> Result<Self> {
        let ErrorStats { max_abs, rel_max, rmse } = error_stats(original, reconstruction)?;
        Ok(Self {
            max_abs,
            rel_max,
            rmse,
            ssim: ssim(original, reconstruction, rows, cols)?,
            histogram: error_histogram(original, reconstruction, 41)?,
            spectrum: radial_power_spectrum(reconstruction, rows, cols)?,
            compression_ratio,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteName {
    Stats,
    Ablation,
    Divergence,
    Trajectory,
}

impl SuiteName {
    pub const ALL: [SuiteName; 4] = [SuiteName::Stats, SuiteName::Ablation, SuiteName::Divergence, SuiteName::Trajectory];

    pub fn name(self) -> &'static str {
        match self {
            SuiteName::Stats => "stats",
            SuiteName::Ablation => "ablation",
            SuiteName::Divergence => "divergence",
            SuiteName::Trajectory => "trajectory",
        }
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SuiteName {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        SuiteName::ALL.into_iter().find(|n| n.name() == s).ok_or_else(|| {
            BenchError::argument(format!(
                "unknown suite {s:?}; expected one of stats, ablation, divergence, trajectory"
            ))
        })
    }
}

/// Grid sizes and sweeps for a suite run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteParams {
    pub rows: usize,
    pub cols: usize,
    pub seeds: Vec<u64>,
    pub epsilons: Vec<f64>,
    pub qs: Vec<f64>,
    pub spike_fraction: f64,
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self {
            rows: 256,
            cols: 256,
            seeds: vec![0, 1],
            epsilons: EPSILON_GRID.to_vec(),
            qs: Q_GRID.to_vec(),
            spike_fraction: 1e-4,
        }
    }
}

/// One rate-distortion measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub suite: String,
    pub field_kind: String,
    pub seed: u64,
    pub q: f64,
    pub epsilon_rel: f64,
    pub ratio: f64,
    pub rel_max: f64,
    pub rmse: f64,
    pub ssim: f64,
}

pub fn run_suite(name: SuiteName, params: &SuiteParams) -> Result<Vec<SuiteRow>> {
    if params.rows < 8 || params.cols < 8 {
        return Err(BenchError::argument("suites need fields of at least 8x8"));
    }
    match name {
        SuiteName::Stats => stats_suite(params),
        SuiteName::Ablation => ablation_suite(params),
        SuiteName::Divergence => divergence_suite(params),
        SuiteName::Trajectory => trajectory_suite(params),
    }
}

fn field_row(
    suite: SuiteName,
    spec: &SyntheticFieldSpec,
    q: f64,
    eps: f64,
) -> Result<SuiteRow> {
    let values = spec.generate()?;
    let rt = round_trip(&values, spec.rows, spec.cols, &EbccParams::new(eps, q)?)?;
    let stats = error_stats(&values, &rt.reconstruction)?;
    Ok(SuiteRow {
        suite: suite.name().into(),
        field_kind: spec.kind.name().into(),
        seed: spec.seed,
        q,
        epsilon_rel: eps,
        ratio: rt.ratio(),
        rel_max: stats.rel_max,
        rmse: stats.rmse,
        ssim: ssim(&values, &rt.reconstruction, spec.rows, spec.cols)?,
    })
}

fn stats_suite(p: &SuiteParams) -> Result<Vec<SuiteRow>> {
    let mut rows = Vec::new();
    for kind in FieldKind::ALL {
        for &seed in &p.seeds {
            let spec = SyntheticFieldSpec::new(kind, p.rows, p.cols, seed).with_spike_fraction(p.spike_fraction);
            for &eps in &p.epsilons {
                rows.push(field_row(SuiteName::Stats, &spec, DEFAULT_Q, eps)?);
            }
        }
    }
    Ok(rows)
}

fn ablation_suite(p: &SuiteParams) -> Result<Vec<SuiteRow>> {
    let mut rows = Vec::new();
    for &seed in &p.seeds {
        let spec = SyntheticFieldSpec::new(FieldKind::Spiky, p.rows, p.cols, seed).with_spike_fraction(p.spike_fraction);
        for &eps in &p.epsilons {
            for &q in &p.qs {
                rows.push(field_row(SuiteName::Ablation, &spec, q, eps)?);
            }
        }
    }
    Ok(rows)
}

/// Divergence error of compressed vortex winds at one error target.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceOutcome {
    pub ratio: f64,
    pub rel_max: f64,
    pub rmse: f64,
    pub ssim: f64,
}

/// Compresses both wind components of a random vortex and compares the
/// divergence derived from them with the divergence of the originals.
pub fn divergence_experiment(rows: usize, cols: usize, seed: u64, eps: f64, q: f64) -> Result<DivergenceOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (u, v) = Vortex::random(rows, cols, &mut rng).winds(rows, cols, 0.0);
    let u: Vec<f32> = u.into_iter().map(|x| x as f32).collect();
    let v: Vec<f32> = v.into_iter().map(|x| x as f32).collect();
    let params = EbccParams::new(eps, q)?;
    let ru = round_trip(&u, rows, cols, &params)?;
    let rv = round_trip(&v, rows, cols, &params)?;
    let truth = horizontal_divergence(&u, &v, rows, cols, 1.0, 1.0)?;
    let approx = horizontal_divergence(&ru.reconstruction, &rv.reconstruction, rows, cols, 1.0, 1.0)?;
    let stats = error_stats(&truth, &approx)?;
    Ok(DivergenceOutcome {
        ratio: (8 * rows * cols) as f64 / (ru.file_bytes + rv.file_bytes) as f64,
        rel_max: stats.rel_max,
        rmse: stats.rmse,
        ssim: ssim(&truth, &approx, rows, cols)?,
    })
}

fn divergence_suite(p: &SuiteParams) -> Result<Vec<SuiteRow>> {
    let mut rows = Vec::new();
    for &seed in &p.seeds {
        for &eps in &p.epsilons {
            let out = divergence_experiment(p.rows, p.cols, seed, eps, DEFAULT_Q)?;
            rows.push(SuiteRow {
                suite: SuiteName::Divergence.name().into(),
                field_kind: "vortex-divergence".into(),
                seed,
                q: DEFAULT_Q,
                epsilon_rel: eps,
                ratio: out.ratio,
                rel_max: out.rel_max,
                rmse: out.rmse,
                ssim: out.ssim,
            });
        }
    }
    Ok(rows)
}

/// Settings for the particle experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub frames: usize,
    pub particles: usize,
    pub steps: usize,
    pub dt: f64,
    /// Largest wind speed in grid cells per unit time.
    pub max_speed: f64,
    pub density_bins: usize,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            frames: 5,
            particles: 4000,
            steps: 120,
            dt: 0.5,
            max_speed: 1.0,
            density_bins: 32,
        }
    }
}

/// Particle experiment results at one error target.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutcome {
    pub ratio: f64,
    /// Worst range-relative wind error over all frames and components.
    pub rel_max: f64,
    /// Density RMSE at every step.
    pub density_rmse: Vec<f64>,
    pub mean_ssim: f64,
}

impl TrajectoryOutcome {
    pub fn mean_density_rmse(&self) -> f64 {
        self.density_rmse.iter().sum::<f64>() / self.density_rmse.len().max(1) as f64
    }
}

/// Advects the same particles through original and compressed winds and
/// compares their densities, once per error target in `epsilons`.
pub fn trajectory_experiment(
    scenario: WindScenario,
    rows: usize,
    cols: usize,
    seed: u64,
    epsilons: &[f64],
    q: f64,
    cfg: &TrajectoryConfig,
) -> Result<Vec<TrajectoryOutcome>> {
    let frames = wind_series(scenario, rows, cols, cfg.frames, cfg.max_speed, seed);
    let frame_dt = (cfg.steps as f64 * cfg.dt / (cfg.frames.max(2) - 1) as f64).max(f64::MIN_POSITIVE);
    let truth = WindField::new(rows, cols, 1.0, 1.0, frame_dt, frames.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a11);
    let seeds: Vec<[f64; 2]> = (0..cfg.particles)
        .map(|_| [rng.random_range(0.0..truth.width()), rng.random_range(0.0..truth.height())])
        .collect();
    let reference = advect_particles(&truth, &seeds, cfg.dt, cfg.steps)?;
    let grid = DensityGrid {
        nx: cfg.density_bins,
        ny: cfg.density_bins,
        width: truth.width(),
        height: truth.height(),
    };
    let mut out = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let params = EbccParams::new(eps, q)?;
        let mut compressed_frames = Vec::with_capacity(frames.len());
        let (mut bytes, mut rel_max, mut ssim_sum) = (0usize, 0.0f64, 0.0);
        for (u, v) in &frames {
            let mut pair = Vec::with_capacity(2);
            for comp in [u, v] {
                let original: Vec<f32> = comp.iter().map(|&x| x as f32).collect();
                let rt = round_trip(&original, rows, cols, &params)?;
                bytes += rt.file_bytes;
                rel_max = rel_max.max(error_stats(&original, &rt.reconstruction)?.rel_max);
                ssim_sum += ssim(&original, &rt.reconstruction, rows, cols)?;
                pair.push(rt.reconstruction.iter().map(|&x| f64::from(x)).collect::<Vec<f64>>());
            }
            let v = pair.pop().unwrap();
            let u = pair.pop().unwrap();
            compressed_frames.push((u, v));
        }
        let field = WindField::new(rows, cols, 1.0, 1.0, frame_dt, compressed_frames)?;
        let tracks = advect_particles(&field, &seeds, cfg.dt, cfg.steps)?;
        out.push(TrajectoryOutcome {
            ratio: (8 * rows * cols * frames.len()) as f64 / bytes as f64,
            rel_max,
            density_rmse: particle_density_rmse(&reference, &tracks, &grid)?,
            mean_ssim: ssim_sum / (2 * frames.len()) as f64,
        });
    }
    Ok(out)
}

fn trajectory_suite(p: &SuiteParams) -> Result<Vec<SuiteRow>> {
    let cfg = TrajectoryConfig::default();
    let mut rows = Vec::new();
    for scenario in WindScenario::ALL {
        for &seed in &p.seeds {
            let outcomes = trajectory_experiment(scenario, p.rows, p.cols, seed, &p.epsilons, DEFAULT_Q, &cfg)?;
            for (&eps, o) in p.epsilons.iter().zip(&outcomes) {
                rows.push(SuiteRow {
                    suite: SuiteName::Trajectory.name().into(),
                    field_kind: format!("{}-winds", scenario.name()),
                    seed,
                    q: DEFAULT_Q,
                    epsilon_rel: eps,
                    ratio: o.ratio,
                    rel_max: o.rel_max,
                    rmse: o.mean_density_rmse(),
                    ssim: o.mean_ssim,
                });
            }
        }
    }
    Ok(rows)
}

/// Writes `<suite>.csv` and `<suite>.json` into `dir` and returns both paths.
pub fn write_reports(rows: &[SuiteRow], dir: &Path, name: SuiteName) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{name}.csv"));
    let json_path = dir.join(format!("{name}.json"));
    let mut writer = csv::Writer::from_path(&csv_path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(&json_path)?), rows)?;
    Ok((csv_path, json_path))
}
