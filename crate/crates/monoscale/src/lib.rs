//! Configuration, file formats and experiment pipelines around `monoscale-core`.

pub mod cache_io;
pub mod config;
pub mod experiments;
pub mod report;

pub use config::{ExperimentConfig, ExperimentKind};
pub use experiments::{run_experiment, run_with_cache, RunError, RunOutput};
pub use report::ExperimentReport;
