//! Benchmark orchestration: configuration matrices, measured execution,
//! geometric-mean aggregation, result files and reports.

pub mod config;
pub mod executor;
pub mod matrix;
pub mod report;
pub mod results;
pub mod runner;
pub mod stats;

pub use config::{RunConfig, Schedule, Selector, WaitPolicy};
pub use executor::{Executor, RawRun, ShellExecutor, StubExecutor};
pub use matrix::{expand_matrix, parse_matrix, Matrix};
pub use report::{emit_report, ReportError, ReportFormat};
pub use results::{Metadata, ResultSet, RunRecord, Status, SCHEMA_VERSION};
pub use runner::{bench, execute, run_matrix, BenchOptions, Session};
pub use stats::geometric_mean;
