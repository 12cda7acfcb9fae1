//! The `ebcc` command line: compress raw `f32` files, decompress `.ebcc`
//! files, compare two raw files and run the evaluation suites.
//!
//! Exit status is 0 on success, 1 for usage errors and 2 for data errors.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ebcc_bench::{run_suite, write_reports, BenchError, SuiteName, SuiteParams};
use ebcc_core::{compress_grid, decompress_grid, error_stats, EbccError, EbccFile, EbccParams, GridArray};
use thiserror::Error;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Codec(#[from] EbccError),
    #[error(transparent)]
    Bench(#[from] BenchError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Bench(BenchError::Argument(_)) => EXIT_USAGE,
            _ => EXIT_DATA,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ebcc", version, about = "Error-bounded lossy compression for gridded f32 data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compress a raw little-endian f32 file.
    Compress(CompressArgs),
    /// Decompress an .ebcc file to raw little-endian f32.
    Decompress {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print error statistics between two raw f32 files as one JSON line.
    Stats {
        original: PathBuf,
        reconstruction: PathBuf,
        /// Shape as T,P,H,W (checked against the file sizes).
        #[arg(long, value_parser = parse_shape)]
        shape: [usize; 4],
    },
    /// Run an evaluation suite and write CSV and JSON reports.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct CompressArgs {
    #[arg(long)]
    input: PathBuf,
    /// Shape as T,P,H,W.
    #[arg(long, value_parser = parse_shape)]
    shape: [usize; 4],
    /// Maximum error relative to each chunk's value range, in (0, 1).
    #[arg(long, value_parser = parse_rel_error)]
    rel_error: f64,
    /// Fraction of points the base layer alone must bring within the bound.
    #[arg(long, default_value_t = 1.0 - 1e-5, value_parser = parse_q)]
    q: f64,
    /// Chunk shape as t,p,h,w; defaults to one 2D slice per chunk.
    #[arg(long, value_parser = parse_shape)]
    chunk: Option<[usize; 4]>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// One of stats, ablation, divergence, trajectory.
    suite: String,
    #[arg(long, default_value = "bench-results")]
    out: PathBuf,
    #[arg(long, default_value_t = 256)]
    rows: usize,
    #[arg(long, default_value_t = 256)]
    cols: usize,
    /// Number of seeds, starting at 0.
    #[arg(long, default_value_t = 2)]
    seeds: u64,
}

fn parse_shape(s: &str) -> Result<[usize; 4], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [t, p, h, w] = parts[..] else {
        return Err(format!("expected 4 comma-separated extents, got {s:?}"));
    };
    let mut out = [0usize; 4];
    for (slot, part) in out.iter_mut().zip([t, p, h, w]) {
        *slot = part.parse().map_err(|_| format!("invalid extent {part:?}"))?;
    }
    Ok(out)
}

fn parse_rel_error(s: &str) -> Result<f64, String> {
    let eps: f64 = s.parse().map_err(|_| format!("invalid number {s:?}"))?;
    if eps > 0.0 && eps < 1.0 {
        Ok(eps)
    } else {
        Err("relative error must lie strictly between 0 and 1 (lossless coding is not supported)".into())
    }
}

fn parse_q(s: &str) -> Result<f64, String> {
    let q: f64 = s.parse().map_err(|_| format!("invalid number {s:?}"))?;
    if q > 0.0 && q <= 1.0 {
        Ok(q)
    } else {
        Err("q must lie in (0, 1]".into())
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Reads a raw little-endian f32 file holding exactly `shape` values.
fn read_raw(path: &Path, shape: [usize; 4]) -> Result<Vec<f32>, CliError> {
    let bytes = read(path)?;
    let expected = shape
        .iter()
        .try_fold(4usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| CliError::Usage(format!("shape {shape:?} is too large")))?;
    if bytes.len() != expected {
        return Err(CliError::Data(format!(
            "{}: {} bytes, but shape {shape:?} needs {expected}",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect())
}

fn compress(args: CompressArgs) -> Result<(), CliError> {
    if args.chunk.is_some_and(|c| c.contains(&0)) {
        return Err(CliError::Usage("chunk extents must be positive".into()));
    }
    let values = read_raw(&args.input, args.shape)?;
    let params = EbccParams::new(args.rel_error, args.q).map_err(|e| CliError::Usage(e.to_string()))?;
    let grid = match args.chunk {
        Some(chunk) => GridArray::with_chunk_shape(values, args.shape, chunk)?,
        None => GridArray::new(values, args.shape)?,
    };
    let file = EbccFile {
        dims: grid.dims(),
        chunk_shape: grid.chunk_shape(),
        chunks: compress_grid(&grid, &params)?,
    };
    let bytes = file.to_bytes()?;
    write(&args.output, &bytes)?;
    eprintln!(
        "{} -> {} bytes (ratio {:.2})",
        grid.data().len() * 4,
        bytes.len(),
        (grid.data().len() * 4) as f64 / bytes.len() as f64
    );
    Ok(())
}

fn decompress(input: &Path, output: &Path) -> Result<(), CliError> {
    let file = EbccFile::from_bytes(&read(input)?)?;
    let grid = decompress_grid(&file.chunks, file.dims, file.chunk_shape)?;
    let bytes: Vec<u8> = grid.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    write(output, &bytes)
}

fn stats(original: &Path, reconstruction: &Path, shape: [usize; 4], out: &mut dyn Write) -> Result<(), CliError> {
    let a = read_raw(original, shape)?;
    let b = read_raw(reconstruction, shape)?;
    let s = error_stats(&a, &b)?;
    let line = serde_json::json!({ "max_abs": s.max_abs, "rel_max": s.rel_max, "rmse": s.rmse });
    writeln!(out, "{line}").map_err(|e| CliError::Data(e.to_string()))
}

fn bench(args: BenchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.suite.trim().is_empty() {
        return Err(CliError::Usage("suite name is empty".into()));
    }
    let name: SuiteName = args.suite.parse()?;
    let params = SuiteParams {
        rows: args.rows,
        cols: args.cols,
        seeds: (0..args.seeds).collect(),
        ..SuiteParams::default()
    };
    let rows = run_suite(name, &params)?;
    let (csv, json) = write_reports(&rows, &args.out, name)?;
    writeln!(out, "{} rows -> {} and {}", rows.len(), csv.display(), json.display())
        .map_err(|e| CliError::Data(e.to_string()))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let mut stdout = io::stdout().lock();
    match cli.command {
        Command::Compress(args) => compress(args),
        Command::Decompress { input, output } => decompress(&input, &output),
        Command::Stats {
            original,
            reconstruction,
            shape,
        } => stats(&original, &reconstruction, shape, &mut stdout),
        Command::Bench(args) => bench(args, &mut stdout),
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
