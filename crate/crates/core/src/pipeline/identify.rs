//! Step one: risk-type identification over representative intervals and
//! effectiveness-based tool selection.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::findings::{findings_from_trace, RiskFinding};
use super::vocab::RiskVocabulary;
use super::{run_parallel, PipelineError};
use crate::agent::{AgentRuntime, AgentTrace};
use crate::dates::DateRange;
use crate::ingest::Hub;
use crate::tools::ToolRegistry;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolStats {
    pub invocations: usize,
    pub informative_results: usize,
    pub distinct_risk_types: usize,
}

impl ToolStats {
    pub fn score(&self) -> usize {
        self.informative_results + self.distinct_risk_types
    }
}

/// Per-tool tallies, keyed by tool name.
pub type ToolEffectiveness = BTreeMap<String, ToolStats>;

/// One identification task and what came of it.
#[derive(Debug, Clone)]
pub struct IdentifyTask {
    pub hub_id: String,
    pub interval: DateRange,
    pub trace: AgentTrace,
    /// `None` when the task failed and is left out of the tallies.
    pub findings: Option<Vec<RiskFinding>>,
}

#[derive(Debug, Clone)]
pub struct IdentifyOutcome {
    /// `(risk_type, frequency)`, frequency descending then name.
    pub ranked_risks: Vec<(String, usize)>,
    pub effectiveness: ToolEffectiveness,
    pub tasks: Vec<IdentifyTask>,
}

impl IdentifyOutcome {
    pub fn failed_tasks(&self) -> usize {
        self.tasks.iter().filter(|t| t.findings.is_none()).count()
    }
}

pub fn identify_task_id(hub_id: &str, interval: &DateRange) -> String {
    format!("identify-{hub_id}-{}", interval.start)
}

pub fn identify_prompt(hub: &Hub, interval: &DateRange) -> String {
    format!(
        "[task identify/{id}/{start}] Identify the supply-chain risks that affected logistic hub {id} in {state} \
         (latitude {lat}, longitude {lon}) between {start} and {end} (end exclusive). Gather evidence with the tools. \
         Finish with a Final Answer containing a fenced ```json block: a list of objects with keys \"risk_type\", \
         \"explanation\" and \"evidence_tool\" (the tool whose observation supports the risk). Use [] if you find no risk.",
        id = hub.id,
        state = hub.state,
        lat = hub.latitude,
        lon = hub.longitude,
        start = interval.start,
        end = interval.end,
    )
}

pub fn validate_intervals(intervals: &[DateRange]) -> Result<(), PipelineError> {
    if intervals.is_empty() {
        return Err(PipelineError::Intervals("no intervals given".into()));
    }
    for (i, a) in intervals.iter().enumerate() {
        if a.is_empty() {
            return Err(PipelineError::Intervals(format!("interval {a} is empty")));
        }
        if let Some(b) = intervals[i + 1..].iter().find(|b| a.overlaps(b)) {
            return Err(PipelineError::Intervals(format!("intervals {a} and {b} overlap")));
        }
    }
    Ok(())
}

/// Runs one agent task per (hub, interval) and tallies the findings.
pub fn identify_risk_types(
    hubs: &[Hub],
    intervals: &[DateRange],
    runtime: &AgentRuntime,
    registry: &ToolRegistry,
    vocabulary: &RiskVocabulary,
    parallelism: usize,
) -> Result<IdentifyOutcome, PipelineError> {
    validate_intervals(intervals)?;
    if hubs.is_empty() {
        return Err(PipelineError::NoHubs);
    }
    if registry.is_empty() {
        return Err(PipelineError::Tools("tool registry is empty".into()));
    }
    let allowed: Vec<String> = registry.names().into_iter().map(str::to_string).collect();
    let jobs: Vec<(&Hub, &DateRange)> = hubs.iter().flat_map(|h| intervals.iter().map(move |i| (h, i))).collect();
    let tasks = run_parallel(parallelism, &jobs, |(hub, interval)| {
        let trace = runtime.run(&identify_task_id(&hub.id, interval), &identify_prompt(hub, interval), registry);
        let findings = match findings_from_trace(&trace, &hub.id, interval.start, vocabulary, &allowed) {
            Ok(f) => Some(f),
            Err(e) => {
                log::warn!("{}: {e}", trace.task_id);
                None
            }
        };
        IdentifyTask {
            hub_id: hub.id.clone(),
            interval: **interval,
            trace,
            findings,
        }
    })?;

    let mut frequency: BTreeMap<String, usize> = BTreeMap::new();
    for t in &tasks {
        let Some(findings) = &t.findings else { continue };
        let types: BTreeSet<&str> = findings.iter().map(|f| f.risk_type.as_str()).collect();
        for r in types {
            *frequency.entry(r.to_string()).or_default() += 1;
        }
    }
    let mut ranked_risks: Vec<(String, usize)> = frequency.into_iter().collect();
    ranked_risks.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let tallied: Vec<(&AgentTrace, &[RiskFinding])> = tasks
        .iter()
        .filter_map(|t| t.findings.as_deref().map(|f| (&t.trace, f)))
        .collect();
    let effectiveness = tally_effectiveness(&tallied, &allowed);
    Ok(IdentifyOutcome {
        ranked_risks,
        effectiveness,
        tasks,
    })
}

/// Invocations count dispatch steps of registered tools; a step is
/// informative when its tool is cited by a finding of the same task;
/// distinct risk types are counted over all findings citing the tool.
pub fn tally_effectiveness(tasks: &[(&AgentTrace, &[RiskFinding])], tool_names: &[String]) -> ToolEffectiveness {
    let mut stats: ToolEffectiveness = tool_names.iter().map(|n| (n.clone(), ToolStats::default())).collect();
    let mut types: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (trace, findings) in tasks {
        let cited: BTreeSet<&str> = findings.iter().map(|f| f.evidence_tool.as_str()).collect();
        for inv in trace.invocations() {
            if let Some(s) = stats.get_mut(&inv.tool_name) {
                s.invocations += 1;
                if cited.contains(inv.tool_name.as_str()) {
                    s.informative_results += 1;
                }
            }
        }
        for f in findings.iter() {
            types.entry(f.evidence_tool.as_str()).or_default().insert(f.risk_type.as_str());
        }
    }
    for (tool, set) in types {
        if let Some(s) = stats.get_mut(tool) {
            s.distinct_risk_types = set.len();
        }
    }
    stats
}

/// Top `k` tools by informative results plus distinct risk types, ties
/// broken alphabetically.
pub fn select_tools(effectiveness: &ToolEffectiveness, k: usize) -> Result<Vec<String>, PipelineError> {
    if k == 0 || k > effectiveness.len() {
        return Err(PipelineError::BadSelection { k, tools: effectiveness.len() });
    }
    let mut ranked: Vec<(&String, &ToolStats)> = effectiveness.iter().collect();
    ranked.sort_by(|a, b| b.1.score().cmp(&a.1.score()).then_with(|| a.0.cmp(b.0)));
    Ok(ranked.into_iter().take(k).map(|(n, _)| n.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn d(m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, m, day).unwrap()
    }

    #[test]
    fn interval_validation() {
        assert!(validate_intervals(&[]).is_err());
        let a = DateRange::span(d(1, 1), 7);
        let b = DateRange::span(d(1, 5), 7);
        assert!(validate_intervals(&[a, b]).is_err());
        assert!(validate_intervals(&[a, DateRange::span(d(1, 8), 7)]).is_ok());
        assert!(validate_intervals(&[DateRange::span(d(1, 1), 0)]).is_err());
    }

    fn stats(inf: usize, distinct: usize) -> ToolStats {
        ToolStats {
            invocations: inf,
            informative_results: inf,
            distinct_risk_types: distinct,
        }
    }

    #[test]
    fn selection_ranks_and_breaks_ties_alphabetically() {
        let eff: ToolEffectiveness = [
            ("traffic_status".to_string(), stats(5, 1)),
            ("storm_events".to_string(), stats(0, 0)),
            ("news_headlines".to_string(), stats(0, 0)),
        ]
        .into_iter()
        .collect();
        assert_eq!(select_tools(&eff, 1).unwrap(), ["traffic_status"]);
        assert_eq!(select_tools(&eff, 2).unwrap(), ["traffic_status", "news_headlines"]);
        assert!(select_tools(&eff, 4).is_err());
        assert!(select_tools(&eff, 0).is_err());
    }
}
