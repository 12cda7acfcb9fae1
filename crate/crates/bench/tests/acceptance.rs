//! Acceptance suite. Prints one pass/fail line per criterion and exits with a
//! non-zero status if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use ebcc_bench::histogram::central_mass;
use ebcc_bench::quantizer::match_ratio;
use ebcc_bench::ssim::ssim;
use ebcc_bench::suite::{
    divergence_experiment, round_trip, trajectory_experiment, TrajectoryConfig, DEFAULT_Q, EPSILON_GRID, Q_GRID,
};
use ebcc_bench::trajectory::{advect_particles, WindField};
use ebcc_bench::{FieldKind, SyntheticFieldSpec, WindScenario};
use ebcc_core::dwt::max_levels;
use ebcc_core::spiht::{Reconstruction, SpihtCodec, DEFAULT_PLANES, HEADER_LEN};
use ebcc_core::{
    compress_grid, decompress_grid, error_stats, forward_dwt, inverse_dwt, ChunkMode, EbccError, EbccFile,
    EbccParams, Field2, GridArray,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> usize {
    let x = rng.random_range((lo as f64).ln()..=(hi as f64).ln());
    (x.exp().round() as usize).clamp(lo, hi)
}

fn error_bound_fuzz() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut violations, mut worst, mut modes) = (0, 0.0f64, [0usize; 4]);
    let trials = 1000;
    for i in 0..trials {
        let kind = FieldKind::ALL[i % 3];
        let rows = log_uniform(&mut rng, 8, 256);
        let cols = log_uniform(&mut rng, 8, 256);
        let eps = EPSILON_GRID[rng.random_range(0..EPSILON_GRID.len())];
        let q = Q_GRID[rng.random_range(0..Q_GRID.len())];
        let values = SyntheticFieldSpec::new(kind, rows, cols, rng.random())
            .generate()
            .map_err(|e| e.to_string())?;
        let params = EbccParams::new(eps, q).map_err(|e| e.to_string())?;
        let rt = round_trip(&values, rows, cols, &params).map_err(|e| format!("chunk {i}: {e}"))?;
        let rel = error_stats(&values, &rt.reconstruction).map_err(|e| e.to_string())?.rel_max;
        modes[rt.mode as usize] += 1;
        if rel > eps {
            violations += 1;
        }
        worst = worst.max(rel / eps);
    }
    let elapsed = start.elapsed();
    check(
        violations == 0 && elapsed.as_secs() < 600,
        format!(
            "{trials} chunks, {violations} violations, worst error {worst:.3} of bound, modes (const/pure/two-layer/raw) {modes:?}"
        ),
    )
}

fn fallback_dominance() -> Outcome {
    let (mut cells, mut violations) = (0, 0);
    for kind in FieldKind::ALL {
        for seed in 0..2 {
            let values = SyntheticFieldSpec::new(kind, 128, 128, seed).generate().map_err(|e| e.to_string())?;
            for eps in EPSILON_GRID {
                let pure = round_trip(&values, 128, 128, &EbccParams::new(eps, 1.0).unwrap())
                    .map_err(|e| e.to_string())?;
                for q in Q_GRID {
                    let rt = round_trip(&values, 128, 128, &EbccParams::new(eps, q).unwrap())
                        .map_err(|e| e.to_string())?;
                    cells += 1;
                    if rt.payload_bytes > pure.payload_bytes {
                        violations += 1;
                    }
                }
            }
        }
    }
    check(violations == 0, format!("{cells} cells, {violations} violations"))
}

fn embedded_stream() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut prefixes, mut problems) = (0usize, Vec::new());
    for p in 0..200 {
        let rows = rng.random_range(2..=20);
        let cols = rng.random_range(2..=20);
        let scale = 10f64.powi(rng.random_range(-3..=3));
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| {
                let x: f64 = rng.random_range(-1.0..1.0);
                scale * x * x * x
            })
            .collect();
        let field = Field2::new(rows, cols, data).unwrap();
        let levels = rng.random_range(1..=max_levels(rows, cols).max(1));
        let pyr = forward_dwt(&field, levels).map_err(|e| e.to_string())?;
        let codec = SpihtCodec::new(pyr.geometry().clone());
        let (stream, traced) = codec
            .encode_traced(&pyr, usize::MAX, DEFAULT_PLANES)
            .map_err(|e| e.to_string())?;
        let bytes = stream.as_bytes();
        let full = codec
            .decode(bytes, bytes.len(), Reconstruction::LowerBound)
            .map_err(|e| e.to_string())?;
        if full.coeffs() != &traced {
            problems.push(format!("pyramid {p}: decoder disagrees with encoder"));
        }
        let truth = pyr.coeffs().as_slice();
        let mut previous = f64::INFINITY;
        for len in HEADER_LEN..=bytes.len() {
            prefixes += 1;
            let dec = match codec.decode(bytes, len, Reconstruction::LowerBound) {
                Ok(d) => d,
                Err(e) => {
                    problems.push(format!("pyramid {p} prefix {len}: {e}"));
                    break;
                }
            };
            let err = truth
                .iter()
                .zip(dec.coeffs().as_slice())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if err > previous {
                problems.push(format!("pyramid {p} prefix {len}: error rose {previous} -> {err}"));
                break;
            }
            previous = err;
        }
        for len in 0..HEADER_LEN {
            if !matches!(codec.decode(bytes, len, Reconstruction::LowerBound), Err(EbccError::Format { .. })) {
                problems.push(format!("pyramid {p}: {len}-byte prefix accepted"));
            }
        }
    }
    check(
        problems.is_empty(),
        format!("200 pyramids, {prefixes} prefixes decoded, {} problems {:?}", problems.len(), problems.first()),
    )
}

fn dwt_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut shapes, mut worst_rt, mut worst_lin) = (0, 0.0f64, 0.0f64);
    let mut sizes: Vec<(usize, usize)> = (2..=33).flat_map(|r| (2..=33).map(move |c| (r, c))).collect();
    sizes.extend([(2, 2), (127, 255), (256, 256), (301, 97)]);
    for (rows, cols) in sizes {
        let x = Field2::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-50.0..50.0)).collect()).unwrap();
        let y = Field2::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let (a, b) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let range = x.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - x.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
        for levels in 1..=max_levels(rows, cols).max(1) {
            shapes += 1;
            let px = forward_dwt(&x, levels).map_err(|e| e.to_string())?;
            let back = inverse_dwt(&px).map_err(|e| e.to_string())?;
            let rt = x
                .as_slice()
                .iter()
                .zip(back.as_slice())
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            worst_rt = worst_rt.max(rt / range);

            let py = forward_dwt(&y, levels).map_err(|e| e.to_string())?;
            let combo: Vec<f64> = x.as_slice().iter().zip(y.as_slice()).map(|(p, q)| a * p + b * q).collect();
            let pc = forward_dwt(&Field2::new(rows, cols, combo).unwrap(), levels).map_err(|e| e.to_string())?;
            let (mut diff, mut mag) = (0.0f64, 0.0f64);
            for ((c, p), q) in pc.coeffs().as_slice().iter().zip(px.coeffs().as_slice()).zip(py.coeffs().as_slice()) {
                diff = diff.max((c - (a * p + b * q)).abs());
                mag = mag.max(c.abs());
            }
            worst_lin = worst_lin.max(diff / mag.max(f64::MIN_POSITIVE));
        }
    }
    check(
        worst_rt <= 1e-5 && worst_lin <= 1e-5,
        format!("{shapes} shape/depth cases, round trip {worst_rt:.2e} of range, linearity {worst_lin:.2e}"),
    )
}

fn rate_distortion_shape() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for seed in 0..3 {
        let values = SyntheticFieldSpec::new(FieldKind::SmoothFourier, 256, 256, seed)
            .generate()
            .map_err(|e| e.to_string())?;
        let tight = round_trip(&values, 256, 256, &EbccParams::new(1e-3, DEFAULT_Q).unwrap()).map_err(|e| e.to_string())?;
        let loose = round_trip(&values, 256, 256, &EbccParams::new(1e-1, DEFAULT_Q).unwrap()).map_err(|e| e.to_string())?;
        let gain = loose.ratio() / tight.ratio();
        let s = ssim(&values, &tight.reconstruction, 256, 256).map_err(|e| e.to_string())?;
        ok &= gain >= 5.0 && s >= 0.9999;
        details.push(format!("seed {seed}: ratio gain {gain:.1}x, ssim {s:.6}"));
    }
    check(ok, details.join("; "))
}

fn residual_benefit() -> Outcome {
    let (n, size) = (10u64, 512);
    let mut wins = 0;
    let mut margins = Vec::new();
    for seed in 0..n {
        let values = SyntheticFieldSpec::new(FieldKind::Spiky, size, size, seed)
            .with_spike_fraction(1e-4)
            .generate()
            .map_err(|e| e.to_string())?;
        let two = round_trip(&values, size, size, &EbccParams::new(1e-2, DEFAULT_Q).unwrap()).map_err(|e| e.to_string())?;
        let pure = round_trip(&values, size, size, &EbccParams::new(1e-2, 1.0).unwrap()).map_err(|e| e.to_string())?;
        if two.mode == ChunkMode::TwoLayer && two.payload_bytes < pure.payload_bytes {
            wins += 1;
        }
        margins.push(pure.payload_bytes as f64 / two.payload_bytes as f64 - 1.0);
    }
    let mean = 100.0 * margins.iter().sum::<f64>() / margins.len() as f64;
    check(
        wins * 10 >= n * 8,
        format!("two-layer smaller on {wins}/{n} seeds ({size}x{size}, eps 1%), mean saving {mean:.2}%"),
    )
}

fn error_concentration() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for seed in 0..3 {
        let values = SyntheticFieldSpec::new(FieldKind::SmoothFourier, 256, 256, seed)
            .generate()
            .map_err(|e| e.to_string())?;
        for eps in [1e-3, 1e-2, 5e-2] {
            let rt = round_trip(&values, 256, 256, &EbccParams::new(eps, DEFAULT_Q).unwrap()).map_err(|e| e.to_string())?;
            let Some(quant) = match_ratio(&values, rt.ratio(), 0.1) else {
                ok = false;
                details.push(format!("seed {seed} eps {eps}: no quantizer step matches ratio {:.1}", rt.ratio()));
                continue;
            };
            let mass = |recon: &[f32]| -> Result<f64, String> {
                let m = error_stats(&values, recon).map_err(|e| e.to_string())?.max_abs;
                central_mass(&values, recon, m, 0.25).map_err(|e| e.to_string())
            };
            let (me, mq) = (mass(&rt.reconstruction)?, mass(&quant.reconstruction)?);
            ok &= me > mq;
            details.push(format!("{me:.2}>{mq:.2}"));
        }
    }
    check(ok, format!("central-quartile mass ebcc>quantizer at matched ratio: {}", details.join(" ")))
}

fn trajectory_sensitivity() -> Outcome {
    // Integrator check first: one revolution of solid-body rotation.
    let (n, omega) = (65, 0.02);
    let c = 32.0;
    let (mut u, mut v) = (vec![0.0; n * n], vec![0.0; n * n]);
    for r in 0..n {
        for col in 0..n {
            u[r * n + col] = -omega * (r as f64 - c);
            v[r * n + col] = omega * (col as f64 - c);
        }
    }
    let field = WindField::new(n, n, 1.0, 1.0, 1.0, vec![(u, v)]).map_err(|e| e.to_string())?;
    let dt = 0.5;
    let steps = (std::f64::consts::TAU / omega / dt).round() as usize;
    let seeds = [[c + 10.0, c], [c, c + 25.0], [c - 7.0, c - 7.0]];
    let tracks = advect_particles(&field, &seeds, dt, steps).map_err(|e| e.to_string())?;
    let drift = seeds
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let r0 = (s[0] - c).hypot(s[1] - c);
            let end = tracks.steps[steps][i];
            ((end[0] - c).hypot(end[1] - c) - r0).abs() / r0
        })
        .fold(0.0, f64::max);
    let mut ok = drift < 1e-3;
    let mut details = vec![format!("orbit drift {:.2e}/rev", drift)];

    let cfg = TrajectoryConfig::default();
    for scenario in WindScenario::ALL {
        for seed in 0..2 {
            let outcomes = trajectory_experiment(scenario, 128, 128, seed, &EPSILON_GRID, DEFAULT_Q, &cfg)
                .map_err(|e| e.to_string())?;
            let rmse: Vec<f64> = outcomes.iter().map(|o| o.mean_density_rmse()).collect();
            let monotone = rmse.windows(2).all(|w| w[1] >= w[0]);
            ok &= monotone;
            details.push(format!(
                "{} seed {seed}: {}",
                scenario.name(),
                rmse.iter().map(|r| format!("{r:.1e}")).collect::<Vec<_>>().join("<=")
            ));
        }
    }
    check(ok, details.join("; "))
}

fn divergence_fidelity() -> Outcome {
    let mut ok = true;
    let mut details = Vec::new();
    for seed in 0..3 {
        let tight = divergence_experiment(256, 256, seed, 1e-3, DEFAULT_Q).map_err(|e| e.to_string())?;
        let loose = divergence_experiment(256, 256, seed, 1e-1, DEFAULT_Q).map_err(|e| e.to_string())?;
        let share = tight.rmse / loose.rmse;
        ok &= share <= 0.2;
        details.push(format!("seed {seed}: {:.1}%", 100.0 * share));
    }
    check(ok, format!("divergence RMSE at 0.1% relative to 10%: {}", details.join(", ")))
}

/// The innermost error of a (possibly chunk-wrapped) failure.
fn root(err: &EbccError) -> &EbccError {
    match err {
        EbccError::Chunk { source, .. } => root(source),
        other => other,
    }
}

/// Parses and decodes `bytes`; panics are reported as errors.
fn read_back(bytes: &[u8]) -> Result<Result<Vec<f32>, EbccError>, String> {
    panic::catch_unwind(AssertUnwindSafe(|| {
        let file = EbccFile::from_bytes(bytes)?;
        decompress_grid(&file.chunks, file.dims, file.chunk_shape).map(GridArray::into_data)
    }))
    .map_err(|_| "panic".to_string())
}

fn container_faults() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut files, mut injections, mut payload_flips) = (0, 0, 0);
    let mut problems: Vec<String> = Vec::new();
    for f in 0..24 {
        let dims = [
            rng.random_range(1..=2),
            rng.random_range(1..=2),
            rng.random_range(8..=40),
            rng.random_range(8..=40),
        ];
        let chunk_shape = [1, 1, rng.random_range(6..=dims[2]), rng.random_range(6..=dims[3])];
        let per_slice = dims[2] * dims[3];
        let mut data = Vec::with_capacity(dims.iter().product());
        for s in 0..dims[0] * dims[1] {
            let spec = SyntheticFieldSpec::new(FieldKind::ALL[(f + s) % 3], dims[2], dims[3], rng.random());
            data.extend(spec.generate().map_err(|e| e.to_string())?);
        }
        if f % 6 == 0 {
            data[..per_slice].fill(7.5); // constant chunks
        }
        let grid = GridArray::with_chunk_shape(data, dims, chunk_shape).map_err(|e| e.to_string())?;
        let eps = EPSILON_GRID[f % EPSILON_GRID.len()];
        let chunks = compress_grid(&grid, &EbccParams::new(eps, DEFAULT_Q).unwrap()).map_err(|e| e.to_string())?;
        let file = EbccFile { dims, chunk_shape, chunks };
        let bytes = file.to_bytes().map_err(|e| e.to_string())?;
        files += 1;
        match EbccFile::from_bytes(&bytes) {
            Ok(parsed) if parsed == file && parsed.to_bytes().ok().as_deref() == Some(&bytes[..]) => {}
            _ => problems.push(format!("file {f}: serialization round trip differs")),
        }

        let mut expect_error = |label: String, corrupted: Vec<u8>, version: bool| {
            injections += 1;
            match read_back(&corrupted) {
                Err(p) => problems.push(format!("file {f} {label}: {p}")),
                Ok(Ok(_)) => problems.push(format!("file {f} {label}: accepted")),
                Ok(Err(e)) => {
                    let fine = match root(&e) {
                        EbccError::Format { .. } => true,
                        EbccError::UnsupportedVersion { .. } => version,
                        _ => false,
                    };
                    if !fine {
                        problems.push(format!("file {f} {label}: unexpected error {e}"));
                    }
                }
            }
        };
        for len in 0..bytes.len() {
            expect_error(format!("truncated to {len}"), bytes[..len].to_vec(), false);
        }
        let mut extended = bytes.clone();
        extended.extend_from_slice(&[0, 1, 2]);
        expect_error("trailing bytes".into(), extended, false);
        for i in 0..4 {
            let mut b = bytes.clone();
            b[i] ^= 0x20;
            expect_error(format!("magic byte {i}"), b, false);
        }
        let mut b = bytes.clone();
        b[4] = b[4].wrapping_add(rng.random_range(1..=255));
        expect_error("version".into(), b, true);
        let mut b = bytes.clone();
        b[38] = b[38].wrapping_add(rng.random_range(1..=255));
        expect_error("chunk count".into(), b, false);

        // Walk the records and corrupt each structural field.
        let mut pos = 42;
        for (k, chunk) in file.chunks.iter().enumerate() {
            let mut b = bytes.clone();
            b[pos] = loop {
                let m: u8 = rng.random();
                if m != b[pos] {
                    break m;
                }
            };
            expect_error(format!("chunk {k} mode"), b, false);
            for field in [pos + 17, pos + 21] {
                let mut b = bytes.clone();
                let old = u32::from_le_bytes(b[field..field + 4].try_into().unwrap());
                let new = old.wrapping_add(rng.random_range(1..=64));
                b[field..field + 4].copy_from_slice(&new.to_le_bytes());
                expect_error(format!("chunk {k} length at {field}"), b, false);
            }
            let mut b = bytes.clone();
            b[pos + 5..pos + 9].copy_from_slice(&f32::NAN.to_le_bytes());
            expect_error(format!("chunk {k} q"), b, false);
            if matches!(chunk.mode, ChunkMode::PureBase | ChunkMode::TwoLayer) {
                let base = pos + 25;
                let mut b = bytes.clone();
                b[base] ^= 0xff;
                expect_error(format!("chunk {k} stream magic"), b, false);
                let mut b = bytes.clone();
                b[base + 4] = b[base + 4].wrapping_add(1);
                expect_error(format!("chunk {k} stream rows"), b, false);
            }
            pos += 25 + chunk.payload.len();
        }

        // Bit flips inside coded bits are undetectable without checksums;
        // they must still decode without panicking to a field of the right size.
        for _ in 0..20 {
            let Some(k) = (0..file.chunks.len()).find(|&k| file.chunks[k].payload.len() > HEADER_LEN) else {
                break;
            };
            let start = 42 + file.chunks[..k].iter().map(|c| 25 + c.payload.len()).sum::<usize>() + 25 + HEADER_LEN;
            let end = start + file.chunks[k].payload.len() - HEADER_LEN;
            let mut b = bytes.clone();
            b[rng.random_range(start..end)] ^= 1 << rng.random_range(0..8);
            payload_flips += 1;
            match read_back(&b) {
                Err(p) => problems.push(format!("file {f} payload flip: {p}")),
                Ok(Ok(values)) if values.len() != grid.data().len() => {
                    problems.push(format!("file {f} payload flip: wrong length"))
                }
                Ok(Ok(values)) if values.iter().any(|v| !v.is_finite()) => {
                    problems.push(format!("file {f} payload flip: non-finite output"))
                }
                _ => {}
            }
        }
    }
    check(
        problems.is_empty(),
        format!(
            "{files} files round-tripped, {injections} structural faults, {payload_flips} payload bit flips, {} problems {:?}",
            problems.len(),
            problems.first()
        ),
    )
}

fn main() -> ExitCode {
    // Keep panics from the fault-injection probes off the output.
    panic::set_hook(Box::new(|_| {}));
    let criteria: [Criterion; 10] = [
        ("error-bound guarantee", error_bound_fuzz),
        ("fallback dominance", fallback_dominance),
        ("embedded stream", embedded_stream),
        ("dwt round trip and linearity", dwt_round_trip),
        ("rate-distortion shape", rate_distortion_shape),
        ("residual-layer benefit", residual_benefit),
        ("error concentration", error_concentration),
        ("trajectory sensitivity", trajectory_sensitivity),
        ("divergence fidelity", divergence_fidelity),
        ("container faults", container_faults),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] criterion {n} {name}: {detail} ({secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] criterion {n} {name}: {detail} ({secs:.1}s)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
