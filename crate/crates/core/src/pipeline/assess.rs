//! Step two: one agent task per hub and day, checkpointed so interrupted
//! runs resume where they stopped.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::findings::{findings_from_trace, RiskFinding};
use super::vocab::RiskVocabulary;
use super::{run_parallel, write_json_atomic, PipelineError};
use crate::agent::{AgentRuntime, AgentTrace, Notebook, NotebookRecord};
use crate::ingest::Hub;
use crate::tools::ToolRegistry;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyAssessment {
    pub hub_id: String,
    pub date: NaiveDate,
    pub findings: Vec<RiskFinding>,
    /// Task id of the trace the findings came from.
    pub trace_ref: String,
    #[serde(default)]
    pub flagged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag_reason: Option<String>,
}

pub fn assess_task_id(hub_id: &str, date: NaiveDate) -> String {
    format!("assess-{hub_id}-{date}")
}

pub fn retry_task_id(task_id: &str) -> String {
    format!("{task_id}-retry")
}

pub fn assess_prompt(hub: &Hub, date: NaiveDate, selected_tools: &[String], vocabulary: &RiskVocabulary, focus: &[String]) -> String {
    let mut prompt = format!(
        "[task assess/{id}/{date}] Assess the risks affecting logistic hub {id} in {state} (latitude {lat}, longitude {lon}) \
         on {date}. Use only these tools: {tools}.",
        id = hub.id,
        state = hub.state,
        lat = hub.latitude,
        lon = hub.longitude,
        tools = selected_tools.join(", "),
    );
    if !focus.is_empty() {
        prompt.push_str(&format!(" Pay particular attention to: {}.", focus.join(", ")));
    }
    prompt.push_str(&format!(
        " Name risks only with these types: {}. Finish with a Final Answer containing a fenced ```json block: \
         a list of objects with keys \"risk_type\", \"explanation\" and \"evidence_tool\". Use [] if there is no risk that day.",
        vocabulary.types().join(", ")
    ));
    prompt
}

fn retry_prompt(prompt: &str, reason: &str) -> String {
    format!(
        "{prompt}\n[retry] Your previous final answer was rejected: {reason}. The Final Answer must contain the \
         fenced ```json findings list, or [] if there are none."
    )
}

/// Runs the task, re-running once with a corrective prompt when the final
/// answer carries no usable findings block. Returns every trace produced.
/// `registry` should already be restricted to `selected_tools`.
pub fn daily_assessment(
    hub: &Hub,
    date: NaiveDate,
    selected_tools: &[String],
    runtime: &AgentRuntime,
    registry: &ToolRegistry,
    vocabulary: &RiskVocabulary,
    focus: &[String],
) -> Result<(DailyAssessment, Vec<AgentTrace>), PipelineError> {
    if selected_tools.is_empty() {
        return Err(PipelineError::Tools("no tools selected for the daily assessment".into()));
    }
    let task_id = assess_task_id(&hub.id, date);
    let prompt = assess_prompt(hub, date, selected_tools, vocabulary, focus);
    let first = runtime.run(&task_id, &prompt, registry);
    let reason = match findings_from_trace(&first, &hub.id, date, vocabulary, selected_tools) {
        Ok(findings) => return Ok((assessment(hub, date, findings, &task_id, None), vec![first])),
        Err(e) => e.0,
    };
    log::info!("{task_id}: {reason}; retrying once");
    let retry_id = retry_task_id(&task_id);
    let second = runtime.run(&retry_id, &retry_prompt(&prompt, &reason), registry);
    let result = match findings_from_trace(&second, &hub.id, date, vocabulary, selected_tools) {
        Ok(findings) => assessment(hub, date, findings, &retry_id, None),
        Err(e) => {
            log::warn!("{retry_id}: {}; recording an empty flagged assessment", e.0);
            assessment(hub, date, Vec::new(), &retry_id, Some(e.0))
        }
    };
    Ok((result, vec![first, second]))
}

fn assessment(hub: &Hub, date: NaiveDate, findings: Vec<RiskFinding>, trace_ref: &str, flag: Option<String>) -> DailyAssessment {
    DailyAssessment {
        hub_id: hub.id.clone(),
        date,
        findings,
        trace_ref: trace_ref.to_string(),
        flagged: flag.is_some(),
        flag_reason: flag,
    }
}

pub fn checkpoint_path(out_dir: &Path, hub_id: &str, date: NaiveDate) -> PathBuf {
    out_dir.join("assessments").join(hub_id).join(format!("{date}.json"))
}

pub fn trace_path(out_dir: &Path, task_id: &str) -> PathBuf {
    out_dir.join("traces").join(format!("{task_id}.json"))
}

fn load_checkpoint(path: &Path) -> Option<DailyAssessment> {
    let text = std::fs::read_to_string(path).ok()?;
    match serde_json::from_str(&text) {
        Ok(a) => Some(a),
        Err(e) => {
            log::warn!("{}: unreadable checkpoint ({e}); re-running", path.display());
            None
        }
    }
}

#[derive(Clone)]
pub struct BatchConfig {
    pub out_dir: PathBuf,
    pub parallelism: usize,
    pub notebook: Option<Arc<Notebook>>,
    pub focus: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct BatchReport {
    /// Hub order of the input, then date order.
    pub assessments: Vec<DailyAssessment>,
    pub executed: usize,
    pub reused: usize,
    pub flagged: usize,
}

/// Assesses every (hub, date), reusing checkpoints that already exist.
/// Traces and checkpoints are written as each task finishes; notebook
/// records are appended afterwards in key order.
pub fn run_daily_batch(
    hubs: &[Hub],
    dates: &[NaiveDate],
    selected_tools: &[String],
    runtime: &AgentRuntime,
    registry: &ToolRegistry,
    vocabulary: &RiskVocabulary,
    config: &BatchConfig,
) -> Result<BatchReport, PipelineError> {
    if hubs.is_empty() {
        return Err(PipelineError::NoHubs);
    }
    if let Some(h) = hubs.iter().find(|h| h.id.contains(['/', '\\']) || h.id.starts_with('.')) {
        return Err(PipelineError::Invalid(format!("hub id {:?} cannot name a checkpoint directory", h.id)));
    }
    let restricted = registry
        .restricted_to(selected_tools)
        .map_err(|e| PipelineError::Tools(e.to_string()))?;
    let out = config.out_dir.as_path();
    let jobs: Vec<(&Hub, NaiveDate)> = hubs.iter().flat_map(|h| dates.iter().map(move |&d| (h, d))).collect();

    let results = run_parallel(config.parallelism, &jobs, |&(hub, date)| -> Result<(DailyAssessment, bool), PipelineError> {
        let path = checkpoint_path(out, &hub.id, date);
        if let Some(a) = load_checkpoint(&path) {
            return Ok((a, false));
        }
        let (a, traces) = daily_assessment(hub, date, selected_tools, runtime, &restricted, vocabulary, &config.focus)?;
        for t in &traces {
            write_json_atomic(&trace_path(out, &t.task_id), t)?;
        }
        write_json_atomic(&path, &a)?;
        Ok((a, true))
    })?;

    let mut report = BatchReport {
        assessments: Vec::with_capacity(results.len()),
        executed: 0,
        reused: 0,
        flagged: 0,
    };
    for r in results {
        let (a, executed) = r?;
        if executed {
            report.executed += 1;
        } else {
            report.reused += 1;
        }
        report.flagged += usize::from(a.flagged);
        report.assessments.push(a);
    }

    if let Some(nb) = &config.notebook {
        let mut keyed: Vec<(String, &DailyAssessment)> = report
            .assessments
            .iter()
            .map(|a| (format!("{}/{}", a.hub_id, a.date), a))
            .collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        for (key, a) in keyed {
            if nb.contains(&key) {
                continue;
            }
            let payload = serde_json::to_string(&a.findings).map_err(|e| PipelineError::Io(e.to_string()))?;
            nb.append(NotebookRecord::new(key, payload))
                .map_err(|e| PipelineError::Io(e.to_string()))?;
        }
    }
    Ok(report)
}
