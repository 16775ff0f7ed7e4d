//! Study pipeline: mining, adoption detection, census, network metrics,
//! hypothesis tests and reporting, driven by one configuration file.
//!
//! Every stage writes into the output directory through temp-file renames
//! and records input and output checksums in `run_manifest.json`; a stage
//! whose inputs are unchanged and whose outputs are intact is skipped.

use thiserror::Error;

pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod repos;
pub mod synth;

mod tables;

pub use config::StudyConfig;
pub use manifest::{RunManifest, StageRecord, StageStatus};
pub use pipeline::{census_from_usage, Pipeline, StageOutcome};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_TOTAL_FAILURE: i32 = 3;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{stage}: every repository failed ({count})")]
    AllFailed { stage: &'static str, count: usize },
    #[error("{stage}: {repo}: {detail}")]
    Invariant { stage: &'static str, repo: String, detail: String },
    #[error("{stage}: {detail}")]
    Stage { stage: &'static str, detail: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => EXIT_CONFIG,
            _ => EXIT_TOTAL_FAILURE,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        PipelineError::Io { path: path.display().to_string(), source }
    }
}
