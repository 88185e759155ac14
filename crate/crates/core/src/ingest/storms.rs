//! NOAA Storm Events "details" CSV ingestion and the day-bucketed index
//! the storm tool queries.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime, Utc};
use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use super::geo::{haversine_km, LatLon};
use super::IngestError;
use crate::dates::DateRange;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StormEvent {
    pub event_type: String,
    pub begin_time: DateTime<Utc>,
    pub latitude: f64,
    pub longitude: f64,
    pub property_damage_usd: f64,
    pub injuries: u32,
    pub fatalities: u32,
    pub state: String,
}

impl StormEvent {
    pub fn location(&self) -> LatLon {
        LatLon::new(self.latitude, self.longitude)
    }

    pub fn begin_date(&self) -> NaiveDate {
        self.begin_time.date_naive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedRow {
    /// 1-based line in the CSV (header is line 1).
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StormEventIndex {
    events: Vec<StormEvent>,
    by_day: BTreeMap<NaiveDate, Vec<usize>>,
    skipped: Vec<SkippedRow>,
}

impl StormEventIndex {
    pub fn from_events(events: Vec<StormEvent>) -> Self {
        let mut by_day: BTreeMap<NaiveDate, Vec<usize>> = BTreeMap::new();
        for (i, e) in events.iter().enumerate() {
            by_day.entry(e.begin_date()).or_default().push(i);
        }
        Self {
            events,
            by_day,
            skipped: Vec::new(),
        }
    }

    pub fn events(&self) -> &[StormEvent] {
        &self.events
    }

    pub fn by_day(&self) -> &BTreeMap<NaiveDate, Vec<usize>> {
        &self.by_day
    }

    pub fn skipped(&self) -> &[SkippedRow] {
        &self.skipped
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Distinct canonical event types, sorted.
    pub fn event_types(&self) -> Vec<String> {
        let mut types: Vec<String> = self.events.iter().map(|e| e.event_type.clone()).collect();
        types.sort();
        types.dedup();
        types
    }
}

/// Events beginning within `radius_km` of `point` on a day in `window`,
/// ordered by begin time, then event type.
pub fn events_near(index: &StormEventIndex, point: LatLon, radius_km: f64, window: &DateRange) -> Vec<StormEvent> {
    if window.is_empty() {
        return Vec::new();
    }
    let mut hits: Vec<&StormEvent> = index
        .by_day
        .range(window.start..window.end)
        .flat_map(|(_, ids)| ids.iter().map(|&i| &index.events[i]))
        .filter(|e| haversine_km(point, e.location()) <= radius_km)
        .collect();
    hits.sort_by(|a, b| {
        a.begin_time
            .cmp(&b.begin_time)
            .then_with(|| a.event_type.cmp(&b.event_type))
    });
    hits.into_iter().cloned().collect()
}

/// "THUNDERSTORM  WIND" → "Thunderstorm Wind".
pub fn canonical_event_type(raw: &str) -> String {
    raw.split_whitespace()
        .map(|word| {
            let mut chars = word.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().chain(chars.flat_map(char::to_lowercase)).collect(),
                None => String::new(),
            }
        })
        .collect::<Vec<String>>()
        .join(" ")
}

/// NOAA damage strings: "" → 0, "10.00K" → 10000, "2.5M" → 2.5e6,
/// "1B" → 1e9, "250" → 250.
pub fn parse_damage(raw: &str) -> Result<f64, String> {
    let s = raw.trim();
    if s.is_empty() {
        return Ok(0.0);
    }
    let last = s.chars().last().expect("non-empty");
    let (number, multiplier) = if last.is_ascii_digit() || last == '.' {
        (s, 1.0)
    } else {
        let m = match last.to_ascii_uppercase() {
            'K' => 1e3,
            'M' => 1e6,
            'B' => 1e9,
            _ => return Err(format!("unrecognized damage suffix in {raw:?}")),
        };
        (&s[..s.len() - last.len_utf8()], m)
    };
    let value: f64 = number
        .parse()
        .map_err(|_| format!("non-numeric damage amount {raw:?}"))?;
    if !value.is_finite() || value < 0.0 {
        return Err(format!("damage must be a nonnegative number, got {raw:?}"));
    }
    Ok(value * multiplier)
}

/// Hours east of UTC for a NOAA `CZ_TIMEZONE` value such as "EST-5".
fn utc_offset_hours(zone: &str) -> Option<i64> {
    let zone = zone.trim().to_ascii_uppercase();
    if zone.is_empty() {
        return Some(0);
    }
    if let Some(pos) = zone.find(['-', '+']) {
        if let Ok(h) = zone[pos..].parse::<i64>() {
            return Some(h);
        }
    }
    let h = match zone.as_str() {
        "UTC" | "GMT" => 0,
        "AST" | "EDT" => -4,
        "EST" | "CDT" => -5,
        "CST" | "MDT" => -6,
        "MST" | "PDT" => -7,
        "PST" | "AKDT" => -8,
        "AKST" => -9,
        "HST" => -10,
        "SST" => -11,
        "CHST" => 10,
        _ => return None,
    };
    Some(h)
}

fn parse_begin_time(raw: &str, year: Option<i32>, zone: &str) -> Result<DateTime<Utc>, String> {
    let raw = raw.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Ok(t.with_timezone(&Utc));
    }
    let local = ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
        .or_else(|| {
            let t = NaiveDateTime::parse_from_str(raw, "%d-%b-%y %H:%M:%S").ok()?;
            // two-digit years are ambiguous; YEAR carries the century
            match year {
                Some(y) => t.with_year(y),
                None => Some(t),
            }
        })
        .ok_or_else(|| format!("unrecognized BEGIN_DATE_TIME {raw:?}"))?;
    let offset = utc_offset_hours(zone).ok_or_else(|| format!("unrecognized CZ_TIMEZONE {zone:?}"))?;
    Ok((local - Duration::hours(offset)).and_utc())
}

const REQUIRED: [&str; 8] = [
    "EVENT_TYPE",
    "BEGIN_DATE_TIME",
    "BEGIN_LAT",
    "BEGIN_LON",
    "DAMAGE_PROPERTY",
    "INJURIES_DIRECT",
    "DEATHS_DIRECT",
    "STATE",
];

/// Loads a NOAA details CSV (gzip-compressed when the name ends in `.gz`).
/// Rows that cannot become events are skipped and recorded in
/// [`StormEventIndex::skipped`].
pub fn load_storm_csv(path: &Path) -> Result<StormEventIndex, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz")) {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    read_storm_csv(reader, path)
}

pub fn read_storm_csv<R: Read>(reader: R, path: &Path) -> Result<StormEventIndex, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| IngestError::parse(path, 1, "header", e))?
        .clone();
    if header.is_empty() || header.iter().all(str::is_empty) {
        return Err(IngestError::EmptyFile(path.to_path_buf()));
    }
    let columns: HashMap<String, usize> = header
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().to_ascii_uppercase(), i))
        .collect();
    for name in REQUIRED {
        if !columns.contains_key(name) {
            return Err(IngestError::parse(path, 1, name, "required column missing"));
        }
    }

    let mut events = Vec::new();
    let mut skipped = Vec::new();
    let mut rows = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        rows += 1;
        let line = i + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                skipped.push(SkippedRow {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let row = Row { rec: &rec, columns: &columns };
        match storm_event_from_row(&row) {
            Ok(ev) => events.push(ev),
            Err(reason) => skipped.push(SkippedRow { line, reason }),
        }
    }
    if rows == 0 {
        return Err(IngestError::EmptyFile(path.to_path_buf()));
    }
    if !skipped.is_empty() {
        log::warn!(
            "{}: skipped {} malformed storm row(s)",
            path.display(),
            skipped.len()
        );
    }
    let mut index = StormEventIndex::from_events(events);
    index.skipped = skipped;
    Ok(index)
}

struct Row<'a> {
    rec: &'a csv::StringRecord,
    columns: &'a HashMap<String, usize>,
}

impl<'a> Row<'a> {
    fn get(&self, name: &str) -> &'a str {
        self.columns.get(name).and_then(|&i| self.rec.get(i)).unwrap_or("").trim()
    }
}

fn storm_event_from_row(row: &Row<'_>) -> Result<StormEvent, String> {
    let get = |name: &str| row.get(name);
    let (lat_raw, lon_raw) = (get("BEGIN_LAT"), get("BEGIN_LON"));
    if lat_raw.is_empty() || lon_raw.is_empty() {
        return Err("missing BEGIN_LAT/BEGIN_LON".into());
    }
    let latitude: f64 = lat_raw.parse().map_err(|_| format!("bad BEGIN_LAT {lat_raw:?}"))?;
    let longitude: f64 = lon_raw.parse().map_err(|_| format!("bad BEGIN_LON {lon_raw:?}"))?;
    if !LatLon::new(latitude, longitude).in_range() {
        return Err(format!("coordinates out of range: {latitude}, {longitude}"));
    }
    let event_type = canonical_event_type(get("EVENT_TYPE"));
    if event_type.is_empty() {
        return Err("missing EVENT_TYPE".into());
    }
    let year = match get("YEAR") {
        "" => None,
        y => Some(y.parse::<i32>().map_err(|_| format!("bad YEAR {y:?}"))?),
    };
    let begin_time = parse_begin_time(get("BEGIN_DATE_TIME"), year, get("CZ_TIMEZONE"))?;
    let count = |name: &str| -> Result<u32, String> {
        match get(name) {
            "" => Ok(0),
            v => v.parse().map_err(|_| format!("bad {name} {v:?}")),
        }
    };
    Ok(StormEvent {
        event_type,
        begin_time,
        latitude,
        longitude,
        property_damage_usd: parse_damage(get("DAMAGE_PROPERTY"))?,
        injuries: count("INJURIES_DIRECT")?,
        fatalities: count("DEATHS_DIRECT")?,
        state: canonical_event_type(get("STATE")),
    })
}
