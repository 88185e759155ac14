use std::fmt::Write as _;
use std::path::PathBuf;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    read_fixture, required, reply_json, window, Args, Endpoint, Source, ToolError, ToolResult, ToolSpec, NEWS_HEADLINES,
    WINDOW_DOC_END, WINDOW_DOC_START,
};
use crate::gateway::HttpClient;

const TOP: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Headline {
    pub date: NaiveDate,
    pub title: String,
    pub outlet: String,
}

enum Backend {
    Fixture(PathBuf),
    Live(Endpoint, HttpClient),
}

pub struct NewsTool {
    backend: Backend,
}

fn matches_query(title: &str, query: &str) -> bool {
    title.to_lowercase().contains(&query.to_lowercase())
}

impl NewsTool {
    pub fn fixture(path: impl Into<PathBuf>) -> Self {
        Self {
            backend: Backend::Fixture(path.into()),
        }
    }

    pub fn live(endpoint: Endpoint, http: HttpClient) -> Self {
        Self {
            backend: Backend::Live(endpoint, http),
        }
    }

    pub fn spec() -> ToolSpec {
        ToolSpec::new(
            NEWS_HEADLINES,
            "Recent news headlines whose title contains a query, for emerging risks such as closures, strikes or accidents.",
        )
        .required("query", "Text the headline must contain (case-insensitive).")
        .required("start", WINDOW_DOC_START)
        .optional("end", WINDOW_DOC_END)
    }

    fn fetch(&self, query: &str, start: &str, end: &str, last: &str) -> Result<(Vec<Headline>, Source), ToolError> {
        match &self.backend {
            Backend::Fixture(path) => {
                let Some(text) = read_fixture(path)? else {
                    return Ok((Vec::new(), Source::Fixture));
                };
                let mut out = Vec::new();
                for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                    let h: Headline = serde_json::from_str(line)
                        .map_err(|e| ToolError::Failed(format!("{}: line {}: {e}", path.display(), i + 1)))?;
                    out.push(h);
                }
                Ok((out, Source::Fixture))
            }
            Backend::Live(endpoint, http) => {
                let reply = endpoint.get(http, &[("query", query), ("start", start), ("end", end), ("last", last)])?;
                let doc = reply_json(&reply, NEWS_HEADLINES)?;
                let articles = doc
                    .get("articles")
                    .and_then(Value::as_array)
                    .ok_or_else(|| ToolError::Failed("response lacks an `articles` array".into()))?;
                let out = articles
                    .iter()
                    .filter_map(|a| {
                        let published = a.get("publishedAt")?.as_str()?;
                        let date = crate::dates::parse_date(published.get(..10)?).ok()?;
                        Some(Headline {
                            date,
                            title: a.get("title")?.as_str()?.to_string(),
                            outlet: a
                                .pointer("/source/name")
                                .and_then(Value::as_str)
                                .unwrap_or("unknown")
                                .to_string(),
                        })
                    })
                    .collect();
                Ok((out, Source::Live))
            }
        }
    }

    pub fn run(&self, args: &Args) -> Result<ToolResult, ToolError> {
        let query = required(args, "query")?;
        let window = window(args)?;
        let last = window.end.pred_opt().unwrap_or(window.end).to_string();
        let (all, source) = self.fetch(query, &window.start.to_string(), &window.end.to_string(), &last)?;
        let mut hits: Vec<Headline> = all
            .into_iter()
            .filter(|h| window.contains(h.date) && matches_query(&h.title, query))
            .collect();
        hits.sort_by_key(|h| h.date);

        let mut text = format!(
            "{} headline(s) matching \"{query}\" between {} and {} (end exclusive)",
            hits.len(),
            window.start,
            window.end
        );
        if hits.is_empty() {
            text.push('.');
        } else {
            text.push(':');
            for h in hits.iter().take(TOP) {
                let _ = write!(text, " {} {} ({});", h.date, h.title, h.outlet);
            }
            if hits.len() > TOP {
                let _ = write!(text, " and {} more.", hits.len() - TOP);
            }
        }
        let records = serde_json::json!({ "headlines": hits });
        Ok(ToolResult::new(records, text, source))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(pairs: &[(&str, &str)]) -> Args {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    fn tool() -> (tempfile::TempDir, NewsTool) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("news.ndjson");
        std::fs::write(
            &path,
            [
                r#"{"date":"2024-05-07","title":"Storm closes I-75 near Macon","outlet":"Telegraph"}"#,
                r#"{"date":"2024-05-06","title":"Port of Savannah volumes rise","outlet":"Journal"}"#,
                r#"{"date":"2024-05-06","title":"Severe storm warning for Albany","outlet":"Herald"}"#,
                r#"{"date":"2024-05-08","title":"Fuel prices steady","outlet":"Journal"}"#,
                r#"{"date":"2024-06-01","title":"Storm season outlook","outlet":"Herald"}"#,
            ]
            .join("\n"),
        )
        .unwrap();
        (dir, NewsTool::fixture(path))
    }

    #[test]
    fn substring_and_window_filter() {
        let (_d, t) = tool();
        let r = t
            .run(&args(&[("query", "storm"), ("start", "2024-05-01"), ("end", "2024-05-31")]))
            .unwrap();
        let hs: Vec<Headline> = serde_json::from_value(r.records["headlines"].clone()).unwrap();
        assert_eq!(hs.len(), 2);
        assert_eq!(hs[0].title, "Severe storm warning for Albany");
        assert!(r.narrative.starts_with("2 headline(s) matching \"storm\""));
    }

    #[test]
    fn no_match_and_empty_window() {
        let (_d, t) = tool();
        let r = t.run(&args(&[("query", "tariff"), ("start", "2024-05-01"), ("end", "2024-05-31")])).unwrap();
        assert_eq!(r.records["headlines"], serde_json::json!([]));
        assert!(r.narrative.starts_with("0 headline(s)"));
        let r = t.run(&args(&[("query", "storm"), ("start", "2024-05-06"), ("end", "2024-05-06")])).unwrap();
        assert_eq!(r.records["headlines"], serde_json::json!([]));
    }
}
