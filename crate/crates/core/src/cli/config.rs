//! Run configuration: a TOML file of flat keys plus per-tool endpoint
//! tables, overridden by command-line flags.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;

use super::CliError;
use crate::analytics::{Linkage, StopRule};
use crate::dates::{parse_date, DateRange};
use crate::gateway::{ModelBackendConfig, RateLimiter};
use crate::pipeline::{DEFAULT_PARALLELISM, DEFAULT_RISK_COLUMNS};
use crate::tools::{LiveEndpoints, DEFAULT_RADIUS_KM};

pub const DEFAULT_MODEL: &str = "gpt-4o";
pub const DEFAULT_TOOL_COUNT: usize = 3;
pub const DEFAULT_CLUSTERS: usize = 2;
pub const DEFAULT_NOTEBOOK_BATCH_TOKENS: usize = 2_000;

/// One source of settings. Every key is optional; layers are merged with
/// [`ConfigLayer::over`].
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub year: Option<i32>,
    pub hubs: Option<PathBuf>,
    pub storms: Option<PathBuf>,
    pub fixtures: Option<PathBuf>,
    pub offline: Option<bool>,
    /// `scripted:<rules file>` or `http:<chat completions url>`.
    pub backend: Option<String>,
    pub model: Option<String>,
    pub response_path: Option<String>,
    pub radius_km: Option<f64>,
    /// `start..end`, end exclusive.
    pub intervals: Option<Vec<String>>,
    pub selected_tools: Option<Vec<String>>,
    pub tool_count: Option<usize>,
    pub clusters: Option<usize>,
    pub distance_threshold: Option<f64>,
    pub linkage: Option<String>,
    pub risk_columns: Option<Vec<String>>,
    pub focus: Option<Vec<String>>,
    pub out: Option<PathBuf>,
    pub parallelism: Option<usize>,
    pub from: Option<String>,
    /// Exclusive.
    pub to: Option<String>,
    pub max_steps: Option<usize>,
    pub requests_per_second: Option<f64>,
    pub notebook_batch_tokens: Option<usize>,
    pub endpoints: Option<LiveEndpoints>,
}

impl ConfigLayer {
    /// Reads a config file; relative paths in it are taken from the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
        let mut layer: ConfigLayer = toml::from_str(&text).map_err(|e| CliError::input(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        layer.rebase(base);
        Ok(layer)
    }

    fn rebase(&mut self, base: &Path) {
        for p in [&mut self.hubs, &mut self.storms, &mut self.fixtures, &mut self.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(b) = &mut self.backend {
            if let Some(rules) = b.strip_prefix("scripted:") {
                if Path::new(rules).is_relative() {
                    *b = format!("scripted:{}", base.join(rules).display());
                }
            }
        }
    }

    /// `self` wins wherever it has a value. The cluster stop rule is taken
    /// as a pair so a flag can switch between `clusters` and
    /// `distance_threshold`.
    pub fn over(self, lower: ConfigLayer) -> ConfigLayer {
        let stop_from_self = self.clusters.is_some() || self.distance_threshold.is_some();
        let (clusters, distance_threshold) = if stop_from_self {
            (self.clusters, self.distance_threshold)
        } else {
            (lower.clusters, lower.distance_threshold)
        };
        ConfigLayer {
            year: self.year.or(lower.year),
            hubs: self.hubs.or(lower.hubs),
            storms: self.storms.or(lower.storms),
            fixtures: self.fixtures.or(lower.fixtures),
            offline: self.offline.or(lower.offline),
            backend: self.backend.or(lower.backend),
            model: self.model.or(lower.model),
            response_path: self.response_path.or(lower.response_path),
            radius_km: self.radius_km.or(lower.radius_km),
            intervals: self.intervals.or(lower.intervals),
            selected_tools: self.selected_tools.or(lower.selected_tools),
            tool_count: self.tool_count.or(lower.tool_count),
            clusters,
            distance_threshold,
            linkage: self.linkage.or(lower.linkage),
            risk_columns: self.risk_columns.or(lower.risk_columns),
            focus: self.focus.or(lower.focus),
            out: self.out.or(lower.out),
            parallelism: self.parallelism.or(lower.parallelism),
            from: self.from.or(lower.from),
            to: self.to.or(lower.to),
            max_steps: self.max_steps.or(lower.max_steps),
            requests_per_second: self.requests_per_second.or(lower.requests_per_second),
            notebook_batch_tokens: self.notebook_batch_tokens.or(lower.notebook_batch_tokens),
            endpoints: self.endpoints.or(lower.endpoints),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub year: i32,
    pub hubs_path: PathBuf,
    pub storm_csv_path: Option<PathBuf>,
    pub fixtures_dir: PathBuf,
    pub offline: bool,
    pub backend: Option<ModelBackendConfig>,
    pub radius_km: f64,
    pub intervals: Vec<DateRange>,
    pub selected_tools: Option<Vec<String>>,
    pub tool_count: usize,
    pub stop: StopRule,
    pub linkage: Linkage,
    pub risk_columns: Vec<String>,
    pub focus: Vec<String>,
    pub output_dir: PathBuf,
    pub parallelism: usize,
    /// Days assessed by `assess`.
    pub assess_range: DateRange,
    pub max_steps: usize,
    pub requests_per_second: f64,
    pub notebook_batch_tokens: usize,
    pub endpoints: LiveEndpoints,
}

fn parse_backend(raw: &str, model: &str, response_path: Option<&str>) -> Result<ModelBackendConfig, CliError> {
    if let Some(rules) = raw.strip_prefix("scripted:") {
        return Ok(ModelBackendConfig::scripted(rules));
    }
    if let Some(url) = raw.strip_prefix("http:") {
        let mut cfg = ModelBackendConfig::http(url, model);
        if let (Some(p), ModelBackendConfig::HttpChat { response_path, .. }) = (response_path, &mut cfg) {
            *response_path = p.to_string();
        }
        return Ok(cfg);
    }
    Err(CliError::Config(format!(
        "backend {raw:?} must be scripted:<rules file> or http:<url>"
    )))
}

fn parse_interval(raw: &str) -> Result<DateRange, CliError> {
    raw.parse()
        .map_err(|e| CliError::Config(format!("interval {raw:?}: {e}")))
}

fn date_key(name: &str, raw: Option<&str>, default: NaiveDate) -> Result<NaiveDate, CliError> {
    match raw {
        None => Ok(default),
        Some(r) => parse_date(r).map_err(|e| CliError::Config(format!("{name}: {e}"))),
    }
}

fn require_file(what: &str, path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{what} file {} does not exist", path.display())))
    }
}

impl RunConfig {
    /// Applies defaults and validates. Referenced input files must exist.
    pub fn resolve(layer: ConfigLayer) -> Result<Self, CliError> {
        let year = layer
            .year
            .ok_or_else(|| CliError::Config("year is not set (--year or `year` in the config file)".into()))?;
        let hubs_path = layer
            .hubs
            .ok_or_else(|| CliError::Config("hubs file is not set (--hubs or `hubs`)".into()))?;
        require_file("hubs", &hubs_path)?;
        if let Some(s) = &layer.storms {
            require_file("storm events", s)?;
        }
        let offline = layer.offline.unwrap_or(false);
        let fixtures_dir = layer.fixtures.unwrap_or_else(|| PathBuf::from("fixtures"));
        if offline && !fixtures_dir.is_dir() {
            return Err(CliError::Config(format!(
                "fixtures directory {} does not exist",
                fixtures_dir.display()
            )));
        }
        let model = layer.model.as_deref().unwrap_or(DEFAULT_MODEL);
        let backend = layer
            .backend
            .as_deref()
            .map(|b| parse_backend(b, model, layer.response_path.as_deref()))
            .transpose()?;
        if let Some(ModelBackendConfig::Scripted { script_path, .. }) = &backend {
            require_file("scripted backend rules", script_path)?;
        }

        let radius_km = layer.radius_km.unwrap_or(DEFAULT_RADIUS_KM);
        if !(radius_km.is_finite() && radius_km > 0.0) {
            return Err(CliError::Config(format!("radius_km must be positive, got {radius_km}")));
        }
        let intervals = match &layer.intervals {
            Some(raw) => raw.iter().map(|r| parse_interval(r)).collect::<Result<Vec<_>, _>>()?,
            None => DateRange::seasonal_windows(year),
        };

        let stop = match (layer.clusters, layer.distance_threshold) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("set either clusters or distance_threshold, not both".into()))
            }
            (_, Some(t)) => StopRule::DistanceThreshold(t),
            (k, None) => StopRule::Clusters(k.unwrap_or(DEFAULT_CLUSTERS)),
        };
        let linkage = match &layer.linkage {
            Some(l) => l.parse::<Linkage>().map_err(|e| CliError::Config(e.to_string()))?,
            None => Linkage::default(),
        };

        let risk_columns = layer
            .risk_columns
            .unwrap_or_else(|| DEFAULT_RISK_COLUMNS.map(String::from).to_vec());
        if risk_columns.is_empty() {
            return Err(CliError::Config("risk_columns is empty".into()));
        }
        let parallelism = layer.parallelism.unwrap_or(DEFAULT_PARALLELISM);
        if parallelism == 0 {
            return Err(CliError::Config("parallelism must be at least 1".into()));
        }
        let tool_count = layer.tool_count.unwrap_or(DEFAULT_TOOL_COUNT);
        if tool_count == 0 {
            return Err(CliError::Config("tool_count must be at least 1".into()));
        }

        let year_range = DateRange::year(year);
        let from = date_key("from", layer.from.as_deref(), year_range.start)?;
        let to = date_key("to", layer.to.as_deref(), year_range.end)?;
        let assess_range = DateRange::new(from, to).map_err(|e| CliError::Config(format!("from/to: {e}")))?;
        if assess_range.is_empty() || !assess_range.within_year(year) {
            return Err(CliError::Config(format!("assessment days {assess_range} must be a non-empty range within {year}")));
        }

        Ok(RunConfig {
            year,
            hubs_path,
            storm_csv_path: layer.storms,
            fixtures_dir,
            offline,
            backend,
            radius_km,
            intervals,
            selected_tools: layer.selected_tools,
            tool_count,
            stop,
            linkage,
            risk_columns,
            focus: layer.focus.unwrap_or_default(),
            output_dir: layer.out.unwrap_or_else(|| PathBuf::from("out")),
            parallelism,
            assess_range,
            max_steps: layer.max_steps.unwrap_or(crate::agent::DEFAULT_MAX_STEPS),
            requests_per_second: layer.requests_per_second.unwrap_or(RateLimiter::DEFAULT_RPS),
            notebook_batch_tokens: layer.notebook_batch_tokens.unwrap_or(DEFAULT_NOTEBOOK_BATCH_TOKENS),
            endpoints: layer.endpoints.unwrap_or_default(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("hubs.csv"), "id,state,lat,lon\n").unwrap();
        std::fs::write(dir.path().join("rules.txt"), "* => Thought: x\\nFinal Answer: []\n").unwrap();
        let cfg = dir.path().join("hubrisk.toml");
        std::fs::write(
            &cfg,
            "year = 2024\nhubs = \"hubs.csv\"\nbackend = \"scripted:rules.txt\"\nclusters = 3\nparallelism = 2\n\
             [endpoints.traffic_status]\nurl_template = \"https://x/{lat},{lon}?key={api_key}\"\napi_key_env = \"TRAFFIC_KEY\"\n",
        )
        .unwrap();
        (dir, cfg)
    }

    #[test]
    fn file_paths_are_relative_to_the_file() {
        let (dir, cfg) = setup();
        let rc = RunConfig::resolve(ConfigLayer::load(&cfg).unwrap()).unwrap();
        assert_eq!(rc.hubs_path, dir.path().join("hubs.csv"));
        assert_eq!(rc.backend, Some(ModelBackendConfig::scripted(dir.path().join("rules.txt"))));
        assert_eq!(rc.stop, StopRule::Clusters(3));
        assert_eq!(rc.intervals.len(), 4);
        assert_eq!(rc.assess_range, DateRange::year(2024));
        assert_eq!(rc.endpoints.traffic_status.unwrap().api_key_env.as_deref(), Some("TRAFFIC_KEY"));
    }

    #[test]
    fn flags_override_file_and_defaults() {
        let (_dir, cfg) = setup();
        let flags = ConfigLayer {
            parallelism: Some(5),
            distance_threshold: Some(0.4),
            ..Default::default()
        };
        let rc = RunConfig::resolve(flags.over(ConfigLayer::load(&cfg).unwrap())).unwrap();
        assert_eq!(rc.parallelism, 5);
        assert_eq!(rc.stop, StopRule::DistanceThreshold(0.4));
        assert_eq!(rc.linkage, Linkage::Average);
        assert_eq!(rc.radius_km, DEFAULT_RADIUS_KM);
    }

    #[test]
    fn validation_errors() {
        let (dir, cfg) = setup();
        let base = || ConfigLayer::load(&cfg).unwrap();
        let missing = ConfigLayer {
            hubs: Some(dir.path().join("nope.csv")),
            ..Default::default()
        };
        let err = RunConfig::resolve(missing.over(base())).unwrap_err().to_string();
        assert!(err.contains("nope.csv"), "{err}");
        for bad in [
            ConfigLayer { parallelism: Some(0), ..Default::default() },
            ConfigLayer { intervals: Some(vec!["2024-01-10..2024-01-01".into()]), ..Default::default() },
            ConfigLayer { backend: Some("grpc:x".into()), ..Default::default() },
            ConfigLayer { from: Some("2023-12-01".into()), ..Default::default() },
            ConfigLayer { linkage: Some("ward".into()), ..Default::default() },
        ] {
            assert!(RunConfig::resolve(bad.over(base())).is_err());
        }
        assert!(toml::from_str::<ConfigLayer>("colour = 1").is_err());
    }
}
