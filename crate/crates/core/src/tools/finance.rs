use std::path::PathBuf;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    read_fixture, required, reply_json, window, Args, Endpoint, Source, ToolError, ToolResult, ToolSpec,
    FINANCIAL_SNAPSHOT, WINDOW_DOC_END, WINDOW_DOC_START,
};
use crate::dates::{parse_date, DateRange};
use crate::gateway::HttpClient;

/// Percent change beyond which a series counts as moving.
const FLAT_BAND_PCT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Rising,
    Falling,
    Flat,
}

impl Trend {
    pub fn as_str(self) -> &'static str {
        match self {
            Trend::Rising => "rising",
            Trend::Falling => "falling",
            Trend::Flat => "flat",
        }
    }
}

/// Trend and percent change from the first to the last value. `None` for
/// an empty series or a zero first value.
pub fn financial_trend(values: &[f64]) -> Option<(Trend, f64)> {
    let (&first, &last) = (values.first()?, values.last()?);
    if first == 0.0 {
        return None;
    }
    let pct = (last - first) / first.abs() * 100.0;
    let trend = if pct > FLAT_BAND_PCT {
        Trend::Rising
    } else if pct < -FLAT_BAND_PCT {
        Trend::Falling
    } else {
        Trend::Flat
    };
    Some((trend, pct))
}

enum Backend {
    Fixture(PathBuf),
    Live(Endpoint, HttpClient),
}

pub struct FinanceTool {
    backend: Backend,
}

fn valid_series_id(id: &str) -> bool {
    id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.') && !id.starts_with('.')
}

impl FinanceTool {
    pub fn fixture(dir: impl Into<PathBuf>) -> Self {
        Self {
            backend: Backend::Fixture(dir.into()),
        }
    }

    pub fn live(endpoint: Endpoint, http: HttpClient) -> Self {
        Self {
            backend: Backend::Live(endpoint, http),
        }
    }

    pub fn spec() -> ToolSpec {
        ToolSpec::new(
            FINANCIAL_SNAPSHOT,
            "Economic indicator series over a date window with its trend (rising/falling/flat) and percent change.",
        )
        .required("series_id", "Series identifier, e.g. GARETAILNQGSP.")
        .required("start", WINDOW_DOC_START)
        .optional("end", WINDOW_DOC_END)
    }

    fn observations(&self, series: &str, window: &DateRange) -> Result<(Vec<(NaiveDate, f64)>, Source), ToolError> {
        if !valid_series_id(series) {
            return Err(ToolError::SeriesNotFound(series.to_string()));
        }
        match &self.backend {
            Backend::Fixture(dir) => {
                let path = dir.join(format!("{series}.csv"));
                let text = read_fixture(&path)?.ok_or_else(|| ToolError::SeriesNotFound(series.to_string()))?;
                let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
                let mut out = Vec::new();
                for rec in rdr.records() {
                    let rec = rec.map_err(|e| ToolError::Failed(format!("{}: {e}", path.display())))?;
                    if let Some(obs) = observation(rec.get(0).unwrap_or(""), rec.get(1).unwrap_or(""))
                        .map_err(|e| ToolError::Failed(format!("{}: {e}", path.display())))?
                    {
                        out.push(obs);
                    }
                }
                Ok((out, Source::Fixture))
            }
            Backend::Live(endpoint, http) => {
                let (start, end) = (window.start.to_string(), window.end.to_string());
                let last = window.end.pred_opt().unwrap_or(window.end).to_string();
                let reply = endpoint.get(http, &[("series", series), ("start", &start), ("end", &end), ("last", &last)])?;
                if matches!(reply.status, 400 | 404) {
                    return Err(ToolError::SeriesNotFound(series.to_string()));
                }
                let doc = reply_json(&reply, FINANCIAL_SNAPSHOT)?;
                let rows = doc
                    .get("observations")
                    .and_then(Value::as_array)
                    .ok_or_else(|| ToolError::Failed("response lacks an `observations` array".into()))?;
                let mut out = Vec::new();
                for row in rows {
                    let date = row.get("date").and_then(Value::as_str).unwrap_or("");
                    let value = match row.get("value") {
                        Some(Value::String(s)) => s.clone(),
                        Some(Value::Number(n)) => n.to_string(),
                        _ => String::new(),
                    };
                    if let Some(obs) = observation(date, &value).map_err(ToolError::Failed)? {
                        out.push(obs);
                    }
                }
                Ok((out, Source::Live))
            }
        }
    }

    pub fn run(&self, args: &Args) -> Result<ToolResult, ToolError> {
        let series = required(args, "series_id")?;
        let window = window(args)?;
        let empty = || ToolError::EmptyWindow {
            series: series.to_string(),
            window: window.to_string(),
        };
        if window.is_empty() {
            return Err(empty());
        }
        let (mut obs, source) = self.observations(series, &window)?;
        obs.retain(|(d, _)| window.contains(*d));
        obs.sort_by_key(|(d, _)| *d);
        if obs.is_empty() {
            return Err(empty());
        }
        let values: Vec<f64> = obs.iter().map(|(_, v)| *v).collect();
        let (trend, pct) = financial_trend(&values).ok_or_else(|| ToolError::ZeroBaseline(series.to_string()))?;
        let (first, last) = (obs[0], obs[obs.len() - 1]);
        let narrative = format!(
            "Series {series} between {} and {} (end exclusive): {} observation(s), first {} on {}, last {} on {}; \
             change {pct:+.1}% ({}).",
            window.start,
            window.end,
            obs.len(),
            first.1,
            first.0,
            last.1,
            last.0,
            trend.as_str()
        );
        let records = json!({
            "series_id": series,
            "values": obs.iter().map(|(d, v)| json!({"date": d.to_string(), "value": v})).collect::<Vec<_>>(),
            "trend": trend,
            "pct_change": pct,
        });
        Ok(ToolResult::new(records, narrative, source))
    }
}

/// One `(date, value)` row; missing values (".", "") are skipped.
fn observation(date: &str, value: &str) -> Result<Option<(NaiveDate, f64)>, String> {
    let value = value.trim();
    if value.is_empty() || value == "." {
        return Ok(None);
    }
    let d = parse_date(date).map_err(|e| e.to_string())?;
    let v: f64 = value.parse().map_err(|_| format!("bad value {value:?} on {date}"))?;
    Ok(Some((d, v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trend_examples() {
        assert_eq!(financial_trend(&[100.0, 100.0, 100.0]), Some((Trend::Flat, 0.0)));
        let (t, p) = financial_trend(&[100.0, 110.0]).unwrap();
        assert_eq!(t, Trend::Rising);
        assert!((p - 10.0).abs() < 1e-12);
        assert_eq!(financial_trend(&[200.0, 150.0]), Some((Trend::Falling, -25.0)));
        assert_eq!(financial_trend(&[0.0, 1.0]), None);
        assert_eq!(financial_trend(&[]), None);
        // negative base uses |first|
        assert_eq!(financial_trend(&[-100.0, -50.0]), Some((Trend::Rising, 50.0)));
    }

    fn args(pairs: &[(&str, &str)]) -> Args {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn fixture_series_in_window() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("GDP.csv"),
            "date,value\n2024-01-01,100\n2024-02-01,.\n2024-03-01,110\n2024-06-01,500\n",
        )
        .unwrap();
        std::fs::write(dir.path().join("ZERO.csv"), "date,value\n2024-01-01,0\n2024-02-01,3\n").unwrap();
        let tool = FinanceTool::fixture(dir.path());
        let r = tool
            .run(&args(&[("series_id", "GDP"), ("start", "2024-01-01"), ("end", "2024-04-01")]))
            .unwrap();
        assert_eq!(r.records["trend"], "rising");
        assert_eq!(r.records["values"].as_array().unwrap().len(), 2);
        assert!(r.narrative.contains("change +10.0% (rising)"), "{}", r.narrative);
        assert!(r.narrative.contains("Series GDP between 2024-01-01 and 2024-04-01"));

        let err = tool
            .run(&args(&[("series_id", "GDP"), ("start", "2024-04-01"), ("end", "2024-05-01")]))
            .unwrap_err();
        assert!(matches!(err, ToolError::EmptyWindow { .. }));
        let err = tool
            .run(&args(&[("series_id", "GDP"), ("start", "2024-04-01"), ("end", "2024-04-01")]))
            .unwrap_err();
        assert!(matches!(err, ToolError::EmptyWindow { .. }));
        let err = tool.run(&args(&[("series_id", "NOPE"), ("start", "2024-01-01")])).unwrap_err();
        assert!(matches!(err, ToolError::SeriesNotFound(_)));
        let err = tool.run(&args(&[("series_id", "../GDP"), ("start", "2024-01-01")])).unwrap_err();
        assert!(matches!(err, ToolError::SeriesNotFound(_)));
        let err = tool
            .run(&args(&[("series_id", "ZERO"), ("start", "2024-01-01"), ("end", "2024-03-01")]))
            .unwrap_err();
        assert!(matches!(err, ToolError::ZeroBaseline(_)));
    }

    proptest! {
        // Reversal flips the trend whenever the move exceeds the flat band
        // in both directions (the reversed change is relative to the other
        // endpoint, so one direction alone does not suffice).
        #[test]
        fn reversal_antisymmetry(values in prop::collection::vec(-1e4f64..1e4, 2..12)) {
            prop_assume!(values[0] != 0.0 && values[values.len() - 1] != 0.0);
            let reversed: Vec<f64> = values.iter().rev().copied().collect();
            let (t, p) = financial_trend(&values).unwrap();
            let (tr, pr) = financial_trend(&reversed).unwrap();
            if p.abs() > FLAT_BAND_PCT && pr.abs() > FLAT_BAND_PCT {
                let flipped = match t { Trend::Rising => Trend::Falling, Trend::Falling => Trend::Rising, Trend::Flat => Trend::Flat };
                prop_assert_eq!(tr, flipped);
            }
            prop_assert_eq!(p.signum() == pr.signum() && p != 0.0, false);
        }
    }
}
