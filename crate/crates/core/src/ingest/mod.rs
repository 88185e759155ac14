//! Hub definitions, NOAA storm-event ingestion and spatial queries.

mod geo;
mod hubs;
mod storms;

use std::path::PathBuf;

use thiserror::Error;

pub use geo::{haversine_km, BoundingBox, LatLon, EARTH_RADIUS_KM};
pub use hubs::{load_hubs, read_hubs, Hub};
pub use storms::{
    canonical_event_type, events_near, load_storm_csv, parse_damage, read_storm_csv, SkippedRow,
    StormEvent, StormEventIndex,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: row {row}, column {column}: {reason}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        reason: String,
    },
    #[error("duplicate hub id {id:?} at row {row}")]
    DuplicateId { row: usize, id: String },
    #[error("row {row}: {column} = {value} is out of range")]
    Range { row: usize, column: String, value: f64 },
    #[error("{0}: file has no data rows")]
    EmptyFile(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IngestError {
    fn parse(path: &std::path::Path, row: usize, column: &str, reason: impl std::fmt::Display) -> Self {
        IngestError::Parse {
            path: path.to_path_buf(),
            row,
            column: column.to_string(),
            reason: reason.to_string(),
        }
    }
}
