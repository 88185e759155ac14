//! Tool registry and the seven risk-analysis tools. Every tool has a
//! fixture adapter reading local files and, where a remote service
//! exists, a live adapter over HTTP.

mod finance;
mod hub_info;
mod news;
mod notebook;
mod registry;
mod storms;
mod traffic;
mod wiki;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::agent::{Notebook, NotebookError};
use crate::dates::DateRange;
use crate::gateway::{GatewayError, HttpClient, HttpReply};
use crate::ingest::{Hub, StormEventIndex};

pub use finance::{financial_trend, FinanceTool, Trend};
pub use hub_info::HubInfoTool;
pub use news::{Headline, NewsTool};
pub use notebook::NotebookTool;
pub use registry::{ArgumentSpec, Args, Source, ToolHandler, ToolRegistry, ToolResult, ToolSpec};
pub use storms::{storm_narrative, StormTool, DEFAULT_RADIUS_KM};
pub use traffic::{
    classify_traffic_severity, render_traffic_narrative, Severity, TrafficFlow, TrafficTool,
    TRAFFIC_TEMPLATE,
};
pub use wiki::{place_slug, WikiTool, WIKI_NARRATIVE_CHARS, WIKI_SUMMARY_URL};

pub const HUB_INFO: &str = "hub_info";
pub const WIKI_SUMMARY: &str = "wiki_summary";
pub const FINANCIAL_SNAPSHOT: &str = "financial_snapshot";
pub const STORM_EVENTS: &str = "storm_events";
pub const NEWS_HEADLINES: &str = "news_headlines";
pub const TRAFFIC_STATUS: &str = "traffic_status";
pub const NOTEBOOK: &str = "notebook";

/// Tool names in registration order.
pub const TOOL_NAMES: [&str; 7] = [
    HUB_INFO,
    WIKI_SUMMARY,
    FINANCIAL_SNAPSHOT,
    STORM_EVENTS,
    NEWS_HEADLINES,
    TRAFFIC_STATUS,
    NOTEBOOK,
];

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("tool {0:?} is already registered")]
    DuplicateTool(String),
    #[error("unknown tool {name}; available: {available}")]
    UnknownTool { name: String, available: String },
    #[error("missing required argument `{argument}` for {tool}; usage: {usage}")]
    MissingArgument { tool: String, argument: String, usage: String },
    #[error("unexpected argument `{argument}` for {tool}; usage: {usage}")]
    UnexpectedArgument { tool: String, argument: String, usage: String },
    #[error("invalid argument `{argument}`: {reason}")]
    InvalidArgument { argument: String, reason: String },
    #[error("no hub matching {0}")]
    HubNotFound(String),
    #[error("no encyclopedia entry for {0:?}")]
    NotFound(String),
    #[error("financial series {0:?} not found")]
    SeriesNotFound(String),
    #[error("series {series} has no observations in {window}")]
    EmptyWindow { series: String, window: String },
    #[error("series {0} starts at zero; percentage change is undefined")]
    ZeroBaseline(String),
    #[error("storm event index not loaded")]
    IndexNotLoaded,
    #[error("no traffic coverage at {lat},{lon}")]
    NoCoverage { lat: f64, lon: f64 },
    #[error("free-flow speed must be positive, got {0}")]
    InvalidFreeFlow(f64),
    #[error("no live endpoint configured for {0}")]
    NotConfigured(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("{0}")]
    Failed(String),
    #[error(transparent)]
    Notebook(#[from] NotebookError),
}

impl From<GatewayError> for ToolError {
    fn from(e: GatewayError) -> Self {
        ToolError::Transport(e.to_string())
    }
}

/// A live service: URL template with `{placeholder}`s and the environment
/// variable holding its API key (substituted as `{api_key}`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoint {
    pub url_template: String,
    #[serde(default)]
    pub api_key_env: Option<String>,
}

impl Endpoint {
    pub fn new(url_template: impl Into<String>) -> Self {
        Self {
            url_template: url_template.into(),
            api_key_env: None,
        }
    }

    fn api_key(&self) -> Option<String> {
        self.api_key_env.as_deref().and_then(|v| std::env::var(v).ok())
    }

    /// Fills placeholders with percent-encoded values.
    pub fn url(&self, vars: &[(&str, &str)]) -> String {
        let mut url = self.url_template.clone();
        for (name, value) in vars {
            url = url.replace(&format!("{{{name}}}"), &encode(value));
        }
        if let Some(key) = self.api_key() {
            url = url.replace("{api_key}", &encode(&key));
        }
        url
    }

    /// GET with the API key as a bearer token unless the template already
    /// carries it in the URL.
    fn get(&self, http: &HttpClient, vars: &[(&str, &str)]) -> Result<HttpReply, ToolError> {
        let key = self.api_key();
        let bearer = key.as_deref().filter(|_| !self.url_template.contains("{api_key}"));
        Ok(http.get(&self.url(vars), bearer)?)
    }
}

fn encode(value: &str) -> String {
    url::form_urlencoded::byte_serialize(value.as_bytes()).collect()
}

/// Live endpoints per tool. Only the encyclopedia has a default.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiveEndpoints {
    pub wiki_summary: Option<Endpoint>,
    pub financial_snapshot: Option<Endpoint>,
    pub news_headlines: Option<Endpoint>,
    pub traffic_status: Option<Endpoint>,
}

/// Everything needed to build the registry.
#[derive(Clone)]
pub struct ToolContext {
    pub hubs: Arc<Vec<Hub>>,
    pub storms: Option<Arc<StormEventIndex>>,
    pub offline: bool,
    pub fixtures_dir: PathBuf,
    pub endpoints: LiveEndpoints,
    pub http: HttpClient,
    pub radius_km: f64,
    pub notebook: Option<Arc<Notebook>>,
    pub notebook_batch_tokens: usize,
}

/// Registers the seven tools in [`TOOL_NAMES`] order.
pub fn build_registry(ctx: &ToolContext) -> Result<ToolRegistry, ToolError> {
    let mut reg = ToolRegistry::new();
    let fixtures = ctx.fixtures_dir.as_path();

    let hub = HubInfoTool::new(ctx.hubs.clone());
    reg.register(HubInfoTool::spec(), move |a: &Args| hub.run(a))?;

    let wiki = if ctx.offline {
        WikiTool::fixture(fixtures.join("wiki"))
    } else {
        let ep = ctx.endpoints.wiki_summary.clone().unwrap_or_else(|| Endpoint::new(WIKI_SUMMARY_URL));
        WikiTool::live(ep, ctx.http.clone())
    };
    reg.register(WikiTool::spec(), move |a: &Args| wiki.run(a))?;

    let finance = if ctx.offline {
        Some(FinanceTool::fixture(fixtures.join("finance")))
    } else {
        ctx.endpoints.financial_snapshot.clone().map(|ep| FinanceTool::live(ep, ctx.http.clone()))
    };
    reg.register(FinanceTool::spec(), move |a: &Args| match &finance {
        Some(t) => t.run(a),
        None => Err(ToolError::NotConfigured(FINANCIAL_SNAPSHOT.into())),
    })?;

    let storms = StormTool::new(ctx.storms.clone(), ctx.radius_km);
    reg.register(StormTool::spec(), move |a: &Args| storms.run(a))?;

    let news = if ctx.offline {
        Some(NewsTool::fixture(fixtures.join("news.ndjson")))
    } else {
        ctx.endpoints.news_headlines.clone().map(|ep| NewsTool::live(ep, ctx.http.clone()))
    };
    reg.register(NewsTool::spec(), move |a: &Args| match &news {
        Some(t) => t.run(a),
        None => Err(ToolError::NotConfigured(NEWS_HEADLINES.into())),
    })?;

    let traffic = if ctx.offline {
        Some(TrafficTool::fixture(fixtures.join("traffic.json")))
    } else {
        ctx.endpoints.traffic_status.clone().map(|ep| TrafficTool::live(ep, ctx.http.clone()))
    };
    reg.register(TrafficTool::spec(), move |a: &Args| match &traffic {
        Some(t) => t.run(a),
        None => Err(ToolError::NotConfigured(TRAFFIC_STATUS.into())),
    })?;

    let nb = NotebookTool::new(ctx.notebook.clone(), ctx.notebook_batch_tokens);
    reg.register(NotebookTool::spec(), move |a: &Args| nb.run(a))?;
    Ok(reg)
}

fn arg<'a>(args: &'a Args, name: &str) -> Option<&'a str> {
    args.get(name).map(|v| v.trim()).filter(|v| !v.is_empty())
}

fn invalid(argument: &str, reason: impl Into<String>) -> ToolError {
    ToolError::InvalidArgument {
        argument: argument.to_string(),
        reason: reason.into(),
    }
}

fn required<'a>(args: &'a Args, name: &str) -> Result<&'a str, ToolError> {
    arg(args, name).ok_or_else(|| invalid(name, "must not be empty"))
}

fn number(args: &Args, name: &str) -> Result<f64, ToolError> {
    let raw = required(args, name)?;
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| invalid(name, format!("{raw:?} is not a number")))
}

fn coordinates(args: &Args) -> Result<(f64, f64), ToolError> {
    let (lat, lon) = (number(args, "lat")?, number(args, "lon")?);
    if !(-90.0..=90.0).contains(&lat) {
        return Err(invalid("lat", format!("{lat} is outside [-90, 90]")));
    }
    if !(-180.0..=180.0).contains(&lon) {
        return Err(invalid("lon", format!("{lon} is outside [-180, 180]")));
    }
    Ok((lat, lon))
}

fn date(args: &Args, name: &str) -> Result<NaiveDate, ToolError> {
    let raw = required(args, name)?;
    crate::dates::parse_date(raw).map_err(|e| invalid(name, e.to_string()))
}

/// `start` (inclusive) and optional `end` (exclusive, default start + 1 day).
fn window(args: &Args) -> Result<DateRange, ToolError> {
    let start = date(args, "start")?;
    let end = match arg(args, "end") {
        Some(_) => date(args, "end")?,
        None => start.succ_opt().ok_or_else(|| invalid("start", "date out of range"))?,
    };
    DateRange::new(start, end).map_err(|e| invalid("end", e.to_string()))
}

const WINDOW_DOC_START: &str = "First day, YYYY-MM-DD.";
const WINDOW_DOC_END: &str = "Day after the last day, YYYY-MM-DD (exclusive); defaults to start + 1 day.";

fn read_fixture(path: &Path) -> Result<Option<String>, ToolError> {
    match std::fs::read_to_string(path) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(ToolError::Failed(format!("cannot read {}: {e}", path.display()))),
    }
}

fn reply_json(reply: &HttpReply, what: &str) -> Result<Value, ToolError> {
    if !reply.is_success() {
        return Err(ToolError::Transport(format!("{what}: HTTP {}", reply.status)));
    }
    Ok(reply.json()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(pairs: &[(&str, &str)]) -> Args {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn window_defaults_to_one_day() {
        let w = window(&args(&[("start", "2024-05-06")])).unwrap();
        assert_eq!(w.len_days(), 1);
        let w = window(&args(&[("start", "2024-05-06"), ("end", "2024-05-06")])).unwrap();
        assert!(w.is_empty());
        assert!(window(&args(&[("start", "2024-05-06"), ("end", "2024-05-01")])).is_err());
        assert!(window(&args(&[("start", "May 6")])).is_err());
    }

    #[test]
    fn coordinates_are_range_checked() {
        assert!(coordinates(&args(&[("lat", "33.7"), ("lon", "-84.2")])).is_ok());
        assert!(coordinates(&args(&[("lat", "95"), ("lon", "0")])).is_err());
        assert!(coordinates(&args(&[("lat", "NaN"), ("lon", "0")])).is_err());
    }

    #[test]
    fn endpoint_encodes_placeholders() {
        let ep = Endpoint::new("http://x/search?q={query}&from={start}");
        assert_eq!(
            ep.url(&[("query", "storm & flood"), ("start", "2024-05-06")]),
            "http://x/search?q=storm+%26+flood&from=2024-05-06"
        );
    }
}
