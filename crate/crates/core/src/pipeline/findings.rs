//! Machine-readable findings in agent final answers.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::vocab::RiskVocabulary;
use crate::agent::AgentTrace;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskFinding {
    pub hub_id: String,
    pub date: NaiveDate,
    pub risk_type: String,
    pub explanation: String,
    pub evidence_tool: String,
}

/// One entry of the JSON list in a final answer, before canonicalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawFinding {
    pub risk_type: String,
    pub explanation: String,
    pub evidence_tool: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot extract findings: {0}")]
pub struct ExtractionError(pub String);

fn fenced_blocks(text: &str) -> Vec<(&str, &str)> {
    let mut blocks = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let Some(nl) = after.find('\n') else { break };
        let lang = after[..nl].trim();
        let body_start = &after[nl + 1..];
        let Some(close) = body_start.find("```") else { break };
        blocks.push((lang, &body_start[..close]));
        rest = &body_start[close + 3..];
    }
    blocks
}

/// The findings list from a fenced ```json block, or from an answer that
/// is itself a bare JSON array.
pub fn extract_findings_block(answer: &str) -> Result<Vec<RawFinding>, ExtractionError> {
    let blocks = fenced_blocks(answer);
    let body = blocks
        .iter()
        .find(|(lang, _)| lang.eq_ignore_ascii_case("json"))
        .or_else(|| blocks.iter().find(|(lang, body)| lang.is_empty() && body.trim_start().starts_with('[')))
        .map(|(_, body)| *body)
        .or_else(|| {
            let t = answer.trim();
            (t.starts_with('[') && t.ends_with(']')).then_some(t)
        })
        .ok_or_else(|| ExtractionError("final answer has no fenced ```json block".into()))?;
    let value: Value = serde_json::from_str(body.trim()).map_err(|e| ExtractionError(format!("invalid JSON: {e}")))?;
    let items = value
        .as_array()
        .ok_or_else(|| ExtractionError("findings block must be a JSON list".into()))?;
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let obj = item
                .as_object()
                .ok_or_else(|| ExtractionError(format!("finding {i} is not an object")))?;
            let text = |k: &str| obj.get(k).and_then(Value::as_str).map(str::trim).filter(|s| !s.is_empty());
            let risk_type = text("risk_type").ok_or_else(|| ExtractionError(format!("finding {i} lacks risk_type")))?;
            Ok(RawFinding {
                risk_type: risk_type.to_string(),
                explanation: text("explanation").unwrap_or_default().to_string(),
                evidence_tool: text("evidence_tool").map(str::to_string),
            })
        })
        .collect()
}

/// The tool credited with a finding: the cited tool when it is allowed,
/// else the latest allowed tool whose observation mentions the risk type,
/// else the latest allowed tool dispatched, else `fallback`.
pub fn resolve_evidence_tool(raw: &RawFinding, risk_type: &str, trace: &AgentTrace, allowed: &[String], fallback: &str) -> String {
    let allowed_tool = |name: &str| allowed.iter().any(|a| a == name);
    if let Some(t) = raw.evidence_tool.as_deref().filter(|t| allowed_tool(t)) {
        return t.to_string();
    }
    let needle = risk_type.to_lowercase();
    let tool_steps = || {
        trace
            .steps
            .iter()
            .rev()
            .filter_map(|s| s.invocation().map(|inv| (inv, &s.observation)))
            .filter(|(inv, obs)| allowed_tool(&inv.tool_name) && !obs.starts_with("error:"))
    };
    if let Some((inv, _)) = tool_steps().find(|(_, obs)| obs.to_lowercase().contains(&needle)) {
        return inv.tool_name.clone();
    }
    match tool_steps().next() {
        Some((inv, _)) => inv.tool_name.clone(),
        None => fallback.to_string(),
    }
}

/// Canonical findings for one answered task.
pub fn findings_from_trace(
    trace: &AgentTrace,
    hub_id: &str,
    date: NaiveDate,
    vocabulary: &RiskVocabulary,
    allowed_tools: &[String],
) -> Result<Vec<RiskFinding>, ExtractionError> {
    if !trace.answered() {
        return Err(ExtractionError(format!(
            "task ended without a final answer ({:?})",
            trace.terminated_reason
        )));
    }
    let fallback = allowed_tools.first().map(String::as_str).unwrap_or_default();
    let raw = extract_findings_block(&trace.final_answer)?;
    Ok(raw
        .iter()
        .map(|r| {
            let risk_type = vocabulary.canonicalize(&r.risk_type);
            let evidence_tool = resolve_evidence_tool(r, &risk_type, trace, allowed_tools, fallback);
            RiskFinding {
                hub_id: hub_id.to_string(),
                date,
                risk_type,
                explanation: r.explanation.clone(),
                evidence_tool,
            }
        })
        .collect())
}
