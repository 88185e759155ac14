use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use super::{arg, coordinates, invalid, window, Args, Source, ToolError, ToolResult, ToolSpec, STORM_EVENTS};
use super::{WINDOW_DOC_END, WINDOW_DOC_START};
use crate::dates::DateRange;
use crate::ingest::{events_near, LatLon, StormEvent, StormEventIndex};

pub const DEFAULT_RADIUS_KM: f64 = 50.0;

pub struct StormTool {
    index: Option<Arc<StormEventIndex>>,
    default_radius_km: f64,
}

/// Counts per event type, total damage and casualties.
pub fn storm_narrative(events: &[StormEvent], point: LatLon, radius_km: f64, window: &DateRange) -> String {
    let mut text = format!(
        "Found {} events within {radius_km} km of ({}, {}) between {} and {} (end exclusive)",
        events.len(),
        point.lat,
        point.lon,
        window.start,
        window.end
    );
    if events.is_empty() {
        text.push('.');
        return text;
    }
    let mut by_type: BTreeMap<&str, usize> = BTreeMap::new();
    for e in events {
        *by_type.entry(e.event_type.as_str()).or_default() += 1;
    }
    let counts: Vec<String> = by_type.iter().map(|(t, n)| format!("{t} {n}")).collect();
    let damage: f64 = events.iter().map(|e| e.property_damage_usd).sum();
    let injuries: u32 = events.iter().map(|e| e.injuries).sum();
    let fatalities: u32 = events.iter().map(|e| e.fatalities).sum();
    let _ = write!(
        text,
        ": {}. Total property damage ${damage:.0}; injuries {injuries}; fatalities {fatalities}.",
        counts.join(", ")
    );
    text
}

impl StormTool {
    pub fn new(index: Option<Arc<StormEventIndex>>, default_radius_km: f64) -> Self {
        Self {
            index,
            default_radius_km,
        }
    }

    pub fn spec() -> ToolSpec {
        ToolSpec::new(
            STORM_EVENTS,
            "Historical NOAA storm events (type, property damage, injuries, fatalities) near a coordinate.",
        )
        .required("lat", "Latitude in degrees.")
        .required("lon", "Longitude in degrees.")
        .optional("radius_km", "Search radius in km (default 50).")
        .required("start", WINDOW_DOC_START)
        .optional("end", WINDOW_DOC_END)
    }

    pub fn run(&self, args: &Args) -> Result<ToolResult, ToolError> {
        let index = self.index.as_ref().ok_or(ToolError::IndexNotLoaded)?;
        let (lat, lon) = coordinates(args)?;
        let radius_km = match arg(args, "radius_km") {
            None => self.default_radius_km,
            Some(raw) => raw
                .parse::<f64>()
                .ok()
                .filter(|r| r.is_finite() && *r >= 0.0)
                .ok_or_else(|| invalid("radius_km", format!("{raw:?} is not a nonnegative number")))?,
        };
        let window = window(args)?;
        let point = LatLon::new(lat, lon);
        let events = events_near(index, point, radius_km, &window);
        let narrative = storm_narrative(&events, point, radius_km, &window);
        let records = serde_json::to_value(&events).map_err(|e| ToolError::Failed(e.to_string()))?;
        Ok(ToolResult::new(records, narrative, Source::Fixture))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn ev(day: u32, ty: &str, lat: f64, damage: f64) -> StormEvent {
        StormEvent {
            event_type: ty.into(),
            begin_time: Utc.with_ymd_and_hms(2024, 5, day, 12, 0, 0).unwrap(),
            latitude: lat,
            longitude: -84.0,
            property_damage_usd: damage,
            injuries: 1,
            fatalities: 0,
            state: "Georgia".into(),
        }
    }

    fn args(pairs: &[(&str, &str)]) -> Args {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    fn tool() -> StormTool {
        // 0.1° of latitude is about 11.1 km
        let idx = StormEventIndex::from_events(vec![
            ev(7, "Hail", 33.1, 5000.0),
            ev(6, "Tornado", 33.0, 2.5e6),
            ev(8, "Flood", 33.5, 0.0),
        ]);
        StormTool::new(Some(Arc::new(idx)), DEFAULT_RADIUS_KM)
    }

    #[test]
    fn radius_selects_two_of_three_in_time_order() {
        let r = tool()
            .run(&args(&[
                ("lat", "33.0"),
                ("lon", "-84.0"),
                ("radius_km", "20"),
                ("start", "2024-05-01"),
                ("end", "2024-06-01"),
            ]))
            .unwrap();
        let back: Vec<StormEvent> = serde_json::from_value(r.records).unwrap();
        let types: Vec<_> = back.iter().map(|e| e.event_type.as_str()).collect();
        assert_eq!(types, ["Tornado", "Hail"]);
        assert!(r.narrative.starts_with("Found 2 events within 20 km of (33, -84)"));
        assert!(r.narrative.contains("Hail 1, Tornado 1"));
        assert!(r.narrative.contains("$2505000"));
    }

    #[test]
    fn window_without_events_says_zero() {
        let r = tool()
            .run(&args(&[("lat", "33.0"), ("lon", "-84.0"), ("start", "2024-01-01")]))
            .unwrap();
        assert!(r.narrative.contains("0 events"));
        assert_eq!(r.records, serde_json::json!([]));
    }

    #[test]
    fn zero_radius_misses_offset_events() {
        let r = tool()
            .run(&args(&[
                ("lat", "33.05"),
                ("lon", "-84.0"),
                ("radius_km", "0"),
                ("start", "2024-05-01"),
                ("end", "2024-06-01"),
            ]))
            .unwrap();
        assert_eq!(r.records, serde_json::json!([]));
    }

    #[test]
    fn missing_index() {
        let t = StormTool::new(None, 50.0);
        assert!(matches!(
            t.run(&args(&[("lat", "1"), ("lon", "1"), ("start", "2024-01-01")])),
            Err(ToolError::IndexNotLoaded)
        ));
    }
}
