//! Evaluation tooling for the EBCC compressor: synthetic fields, quality
//! metrics, a uniform-quantizer baseline, particle advection and the
//! experiment suites built on them.

pub mod divergence;
pub mod error;
pub mod histogram;
pub mod quantizer;
pub mod spectrum;
pub mod ssim;
pub mod suite;
pub mod synthetic;
pub mod trajectory;

pub use error::{BenchError, Result};
pub use suite::{run_suite, write_reports, MetricReport, SuiteName, SuiteParams, SuiteRow};
pub use synthetic::{FieldKind, SyntheticFieldSpec, WindScenario};
