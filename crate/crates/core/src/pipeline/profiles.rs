use std::collections::BTreeMap;
use std::path::Path;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use super::assess::DailyAssessment;
use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearlyRiskProfile {
    pub hub_id: String,
    pub year: i32,
    pub counts: BTreeMap<String, u64>,
}

impl YearlyRiskProfile {
    pub fn count(&self, risk_type: &str) -> u64 {
        self.counts.get(risk_type).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Finding counts per hub and risk type. Every hub in `hub_ids` gets a
/// profile (all zeros without findings) with a key for every vocabulary
/// type; output is sorted by hub id.
pub fn aggregate_yearly(
    assessments: &[DailyAssessment],
    hub_ids: &[String],
    year: i32,
    vocabulary: &[String],
) -> Result<Vec<YearlyRiskProfile>, PipelineError> {
    let zeros: BTreeMap<String, u64> = vocabulary.iter().map(|r| (r.clone(), 0)).collect();
    let mut by_hub: BTreeMap<String, BTreeMap<String, u64>> =
        hub_ids.iter().map(|h| (h.clone(), zeros.clone())).collect();
    for a in assessments {
        if a.date.year() != year {
            return Err(PipelineError::YearMismatch {
                hub_id: a.hub_id.clone(),
                date: a.date,
                year,
            });
        }
        let counts = by_hub.entry(a.hub_id.clone()).or_insert_with(|| zeros.clone());
        for f in &a.findings {
            *counts.entry(f.risk_type.clone()).or_default() += 1;
        }
    }
    Ok(by_hub
        .into_iter()
        .map(|(hub_id, counts)| YearlyRiskProfile { hub_id, year, counts })
        .collect())
}

/// Column order for a profile table: `vocabulary`, then any other risk
/// type present in the profiles, sorted.
pub fn profile_columns(profiles: &[YearlyRiskProfile], vocabulary: &[String]) -> Vec<String> {
    let mut columns = vocabulary.to_vec();
    let mut extra: Vec<&String> = profiles
        .iter()
        .flat_map(|p| p.counts.keys())
        .filter(|r| !vocabulary.contains(r))
        .collect();
    extra.sort();
    extra.dedup();
    columns.extend(extra.into_iter().cloned());
    columns
}

pub fn write_profiles_csv(path: &Path, profiles: &[YearlyRiskProfile], columns: &[String]) -> Result<(), PipelineError> {
    let io = |e: csv::Error| PipelineError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header = vec!["hub_id".to_string()];
    header.extend(columns.iter().cloned());
    w.write_record(&header).map_err(io)?;
    for p in profiles {
        let mut row = vec![p.hub_id.clone()];
        row.extend(columns.iter().map(|c| p.count(c).to_string()));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Reads a profile table back; returns its columns and profiles.
pub fn read_profiles_csv(path: &Path, year: i32) -> Result<(Vec<String>, Vec<YearlyRiskProfile>), PipelineError> {
    let bad = |msg: String| PipelineError::Io(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.get(0) != Some("hub_id") {
        return Err(bad("first column must be hub_id".into()));
    }
    let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut profiles = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let hub_id = rec.get(0).unwrap_or_default().to_string();
        let mut counts = BTreeMap::new();
        for (c, raw) in columns.iter().zip(rec.iter().skip(1)) {
            let n: u64 = raw
                .trim()
                .parse()
                .map_err(|_| bad(format!("row {}: column {c}: {raw:?} is not a count", i + 2)))?;
            counts.insert(c.clone(), n);
        }
        profiles.push(YearlyRiskProfile { hub_id, year, counts });
    }
    Ok((columns, profiles))
}
