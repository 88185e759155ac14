//! The two-step assessment procedure: identify risk types and pick the
//! most useful tools, then assess each hub daily and aggregate the
//! findings into yearly risk profiles.

mod assess;
mod findings;
mod identify;
mod profiles;
mod vocab;

use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;
use thiserror::Error;

pub use assess::{
    assess_prompt, assess_task_id, checkpoint_path, daily_assessment, retry_task_id, run_daily_batch, trace_path,
    BatchConfig, BatchReport, DailyAssessment,
};
pub use findings::{
    extract_findings_block, findings_from_trace, resolve_evidence_tool, ExtractionError, RawFinding, RiskFinding,
};
pub use identify::{
    identify_prompt, identify_risk_types, identify_task_id, select_tools, tally_effectiveness, validate_intervals,
    IdentifyOutcome, IdentifyTask, ToolEffectiveness, ToolStats,
};
pub use profiles::{aggregate_yearly, profile_columns, read_profiles_csv, write_profiles_csv, YearlyRiskProfile};
pub use vocab::{RiskVocabulary, DEFAULT_RISK_COLUMNS, KEY_RISK_TYPES, OTHER};

/// Daily tasks in flight by default.
pub const DEFAULT_PARALLELISM: usize = 8;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid intervals: {0}")]
    Intervals(String),
    #[error("no hubs to process")]
    NoHubs,
    #[error("tools: {0}")]
    Tools(String),
    #[error("cannot select {k} tools out of {tools}")]
    BadSelection { k: usize, tools: usize },
    #[error("assessment for {hub_id} on {date} lies outside year {year}")]
    YearMismatch { hub_id: String, date: NaiveDate, year: i32 },
    #[error("{0}")]
    Invalid(String),
    #[error("I/O: {0}")]
    Io(String),
}

/// Maps `f` over `items` on a pool of `parallelism` threads, keeping
/// input order.
pub(crate) fn run_parallel<T, R, F>(parallelism: usize, items: &[T], f: F) -> Result<Vec<R>, PipelineError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| PipelineError::Invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(f).collect()))
}

/// Pretty JSON plus a trailing newline, written to a temporary sibling
/// and renamed into place.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let io = |e: std::io::Error| PipelineError::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::Io(e.to_string()))?;
    text.push('\n');
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, text).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)?;
    Ok(())
}
