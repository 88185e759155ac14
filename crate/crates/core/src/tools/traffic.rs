use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{coordinates, read_fixture, reply_json, Args, Endpoint, Source, ToolError, ToolResult, ToolSpec, TRAFFIC_STATUS};
use crate::gateway::HttpClient;

pub const TRAFFIC_TEMPLATE: &str = include_str!("../../templates/traffic.txt");

/// Fixture keys match a query coordinate within this many degrees.
const COORD_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficFlow {
    pub current_speed_kmh: f64,
    pub free_flow_speed_kmh: f64,
    pub current_travel_time_s: f64,
    pub free_flow_travel_time_s: f64,
    pub confidence: f64,
}

impl TrafficFlow {
    pub fn validate(&self) -> Result<(), ToolError> {
        if self.free_flow_speed_kmh.is_nan() || self.free_flow_speed_kmh <= 0.0 {
            return Err(ToolError::InvalidFreeFlow(self.free_flow_speed_kmh));
        }
        let nonneg = [
            ("current_speed_kmh", self.current_speed_kmh),
            ("current_travel_time_s", self.current_travel_time_s),
            ("free_flow_travel_time_s", self.free_flow_travel_time_s),
        ];
        for (name, v) in nonneg {
            if !v.is_finite() || v < 0.0 {
                return Err(ToolError::Failed(format!("traffic {name} must be nonnegative, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(ToolError::Failed(format!(
                "traffic confidence must lie in [0, 1], got {}",
                self.confidence
            )));
        }
        Ok(())
    }

    /// Extra travel time over free flow, clamped at zero.
    pub fn delay_s(&self) -> f64 {
        (self.current_travel_time_s - self.free_flow_travel_time_s).max(0.0)
    }

    pub fn speed_ratio(&self) -> f64 {
        self.current_speed_kmh / self.free_flow_speed_kmh
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    FreeFlow,
    Light,
    Moderate,
    SevereJam,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::FreeFlow => "free_flow",
            Severity::Light => "light",
            Severity::Moderate => "moderate",
            Severity::SevereJam => "severe_jam",
        }
    }

    pub fn phrase(self) -> &'static str {
        match self {
            Severity::FreeFlow => "free-flowing (no delay)",
            Severity::Light => "light traffic (minor delay)",
            Severity::Moderate => "moderate traffic jam (medium delay)",
            Severity::SevereJam => "severe traffic jam (long delay)",
        }
    }
}

pub fn classify_traffic_severity(current_speed_kmh: f64, free_flow_speed_kmh: f64) -> Result<Severity, ToolError> {
    if free_flow_speed_kmh.is_nan() || free_flow_speed_kmh <= 0.0 {
        return Err(ToolError::InvalidFreeFlow(free_flow_speed_kmh));
    }
    let r = current_speed_kmh / free_flow_speed_kmh;
    Ok(if r < 0.25 {
        Severity::SevereJam
    } else if r < 0.5 {
        Severity::Moderate
    } else if r < 0.8 {
        Severity::Light
    } else {
        Severity::FreeFlow
    })
}

pub fn render_traffic_narrative(template: &str, lat: f64, lon: f64, flow: &TrafficFlow, severity: Severity) -> String {
    template
        .trim_end()
        .replace("{lat}", &lat.to_string())
        .replace("{lon}", &lon.to_string())
        .replace("{severity}", severity.phrase())
        .replace("{current_speed}", &flow.current_speed_kmh.to_string())
        .replace("{free_flow_speed}", &flow.free_flow_speed_kmh.to_string())
        .replace("{current_travel_time}", &format!("{:.0}", flow.current_travel_time_s))
        .replace("{delay}", &format!("{:.0}", flow.delay_s()))
        .replace("{free_flow_travel_time}", &format!("{:.0}", flow.free_flow_travel_time_s))
        .replace("{confidence}", &format!("{:.1}", flow.confidence))
}

enum Backend {
    Fixture(PathBuf),
    Live(Endpoint, HttpClient),
}

pub struct TrafficTool {
    backend: Backend,
    template: String,
}

fn fixture_lookup(doc: &Value, lat: f64, lon: f64) -> Result<Option<TrafficFlow>, ToolError> {
    let map = doc
        .as_object()
        .ok_or_else(|| ToolError::Failed("traffic fixture must be a JSON object keyed by \"lat,lon\"".into()))?;
    for (key, flow) in map {
        let Some((klat, klon)) = key.split_once(',') else { continue };
        let (Ok(klat), Ok(klon)) = (klat.trim().parse::<f64>(), klon.trim().parse::<f64>()) else {
            continue;
        };
        if (klat - lat).abs() <= COORD_TOLERANCE && (klon - lon).abs() <= COORD_TOLERANCE {
            let flow: TrafficFlow = serde_json::from_value(flow.clone())
                .map_err(|e| ToolError::Failed(format!("traffic fixture entry {key}: {e}")))?;
            return Ok(Some(flow));
        }
    }
    Ok(None)
}

fn live_flow(doc: &Value) -> Option<TrafficFlow> {
    let seg = doc.get("flowSegmentData")?;
    let num = |k: &str| seg.get(k).and_then(Value::as_f64);
    Some(TrafficFlow {
        current_speed_kmh: num("currentSpeed")?,
        free_flow_speed_kmh: num("freeFlowSpeed")?,
        current_travel_time_s: num("currentTravelTime")?,
        free_flow_travel_time_s: num("freeFlowTravelTime")?,
        confidence: num("confidence").unwrap_or(1.0),
    })
}

impl TrafficTool {
    pub fn fixture(path: impl Into<PathBuf>) -> Self {
        Self {
            backend: Backend::Fixture(path.into()),
            template: TRAFFIC_TEMPLATE.to_string(),
        }
    }

    pub fn live(endpoint: Endpoint, http: HttpClient) -> Self {
        Self {
            backend: Backend::Live(endpoint, http),
            template: TRAFFIC_TEMPLATE.to_string(),
        }
    }

    pub fn spec() -> ToolSpec {
        ToolSpec::new(
            TRAFFIC_STATUS,
            "Current road traffic flow at a coordinate: speeds, travel times, delay and congestion severity.",
        )
        .required("lat", "Latitude in degrees.")
        .required("lon", "Longitude in degrees.")
    }

    fn flow(&self, lat: f64, lon: f64) -> Result<(TrafficFlow, Source), ToolError> {
        let no_coverage = || ToolError::NoCoverage { lat, lon };
        match &self.backend {
            Backend::Fixture(path) => {
                let text = read_fixture(path)?.ok_or_else(no_coverage)?;
                let doc: Value = serde_json::from_str(&text)
                    .map_err(|e| ToolError::Failed(format!("{}: {e}", path.display())))?;
                let flow = fixture_lookup(&doc, lat, lon)?.ok_or_else(no_coverage)?;
                Ok((flow, Source::Fixture))
            }
            Backend::Live(endpoint, http) => {
                let reply = endpoint.get(http, &[("lat", &lat.to_string()), ("lon", &lon.to_string())])?;
                if (400..500).contains(&reply.status) {
                    return Err(no_coverage());
                }
                let doc = reply_json(&reply, TRAFFIC_STATUS)?;
                let flow = live_flow(&doc)
                    .ok_or_else(|| ToolError::Failed("response lacks flowSegmentData speeds and travel times".into()))?;
                Ok((flow, Source::Live))
            }
        }
    }

    pub fn run(&self, args: &Args) -> Result<ToolResult, ToolError> {
        let (lat, lon) = coordinates(args)?;
        let (flow, source) = self.flow(lat, lon)?;
        flow.validate()?;
        let severity = classify_traffic_severity(flow.current_speed_kmh, flow.free_flow_speed_kmh)?;
        let narrative = render_traffic_narrative(&self.template, lat, lon, &flow, severity);
        let records = json!({
            "coordinates": [lat, lon],
            "flow": flow,
            "severity": severity,
            "delay_s": flow.delay_s(),
        });
        Ok(ToolResult::new(records, narrative, source))
    }
}
