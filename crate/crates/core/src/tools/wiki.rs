use std::path::PathBuf;

use serde_json::{json, Value};

use super::{read_fixture, required, reply_json, Args, Endpoint, Source, ToolError, ToolResult, ToolSpec, WIKI_SUMMARY};
use crate::gateway::HttpClient;

/// Public page-summary endpoint; `{title}` is the page title.
pub const WIKI_SUMMARY_URL: &str = "https://en.wikipedia.org/api/rest_v1/page/summary/{title}";
pub const WIKI_NARRATIVE_CHARS: usize = 1200;

enum Backend {
    Fixture(PathBuf),
    Live(Endpoint, HttpClient),
}

pub struct WikiTool {
    backend: Backend,
}

/// "DeKalb County, Georgia" → "dekalb-county-georgia".
pub fn place_slug(place: &str) -> String {
    let mut slug = String::new();
    for c in place.chars() {
        if c.is_alphanumeric() {
            slug.extend(c.to_lowercase());
        } else if !slug.is_empty() && !slug.ends_with('-') {
            slug.push('-');
        }
    }
    slug.truncate(slug.trim_end_matches('-').len());
    slug
}

/// Title, extract and page URL from a page-summary document.
fn parse_summary(v: &Value) -> Option<(String, String, String)> {
    let extract = v.get("extract")?.as_str()?.trim().to_string();
    if extract.is_empty() {
        return None;
    }
    let title = v.get("title").and_then(Value::as_str).unwrap_or_default().to_string();
    let url = v
        .pointer("/content_urls/desktop/page")
        .or_else(|| v.get("source_url"))
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    Some((title, extract, url))
}

impl WikiTool {
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
            WIKI_SUMMARY,
            "Encyclopedia summary of a place: geography, economy, climate and infrastructure context.",
        )
        .required("place", "Page title, e.g. \"DeKalb County, Georgia\".")
    }

    pub fn run(&self, args: &Args) -> Result<ToolResult, ToolError> {
        let place = required(args, "place")?;
        let (doc, source) = match &self.backend {
            Backend::Fixture(dir) => {
                let path = dir.join(format!("{}.json", place_slug(place)));
                let text = read_fixture(&path)?.ok_or_else(|| ToolError::NotFound(place.to_string()))?;
                let doc: Value = serde_json::from_str(&text)
                    .map_err(|e| ToolError::Failed(format!("{}: {e}", path.display())))?;
                (doc, Source::Fixture)
            }
            Backend::Live(endpoint, http) => {
                let title = place.replace(' ', "_");
                let reply = endpoint.get(http, &[("title", &title)])?;
                if reply.status == 404 {
                    return Err(ToolError::NotFound(place.to_string()));
                }
                (reply_json(&reply, WIKI_SUMMARY)?, Source::Live)
            }
        };
        let (title, extract, url) = parse_summary(&doc).ok_or_else(|| ToolError::NotFound(place.to_string()))?;
        let narrative: String = extract.chars().take(WIKI_NARRATIVE_CHARS).collect();
        Ok(ToolResult::new(
            json!({"title": title, "summary": extract, "source_url": url}),
            narrative,
            source,
        ))
    }
}
