//! Configuration, the four pipeline commands and their output files.

mod commands;
mod config;
pub mod emit;

use std::path::Path;

use thiserror::Error;

pub use commands::{
    cmd_assess, cmd_cluster, cmd_identify, cmd_report, files, AssessSummary, ClusterRun, IdentifySummary,
};
pub use config::{
    ConfigLayer, RunConfig, DEFAULT_CLUSTERS, DEFAULT_MODEL, DEFAULT_NOTEBOOK_BATCH_TOKENS, DEFAULT_TOOL_COUNT,
};

use crate::agent::NotebookError;
use crate::analytics::AnalyticsError;
use crate::gateway::GatewayError;
use crate::ingest::IngestError;
use crate::pipeline::PipelineError;
use crate::tools::ToolError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {reason}")]
    Input { path: String, reason: String },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Tools(#[from] ToolError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Notebook(#[from] NotebookError),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    pub(crate) fn input(path: &Path, reason: impl std::fmt::Display) -> Self {
        CliError::Input {
            path: path.display().to_string(),
            reason: reason.to_string(),
        }
    }

    /// 2 for invariant violations, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invariant(_) => 2,
            _ => 1,
        }
    }
}
