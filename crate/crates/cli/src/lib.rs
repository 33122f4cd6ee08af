//! Experiment runner for Gaussian-mixture posterior sampling: configuration, pipelines for the
//! reference, CCS and MAP methods, persisted run directories, reports and comparisons.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;

pub use config::{Method, RunConfig, SourceKind};
pub use error::{CliError, Result};
pub use pipeline::{run_pipeline, Role, RunOutput};
pub use report::Report;
