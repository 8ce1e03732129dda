//! Experiment configuration, sweeps, persistence and reporting.

pub mod config;
pub mod report;
pub mod stats;
pub mod sweep;

pub use config::{DistributionSpec, ExperimentConfig, ThetaSpec};
pub use report::{emit_report, fit_slope, summarize, SlopeFit, SummaryRow};
pub use sweep::{read_rows, run_sweep, run_sweep_to_file, write_rows, SweepRow, CSV_HEADER};
