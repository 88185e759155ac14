use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::geo::LatLon;
use super::IngestError;

/// A candidate logistic hub.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hub {
    pub id: String,
    pub state: String,
    pub latitude: f64,
    pub longitude: f64,
}

impl Hub {
    pub fn location(&self) -> LatLon {
        LatLon::new(self.latitude, self.longitude)
    }
}

const HEADER: [&str; 4] = ["id", "state", "lat", "lon"];

/// Reads an `id,state,lat,lon` CSV, keeping file order.
pub fn load_hubs(path: &Path) -> Result<Vec<Hub>, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_hubs(file, path)
}

pub fn read_hubs<R: std::io::Read>(reader: R, path: &Path) -> Result<Vec<Hub>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| IngestError::parse(path, 1, "header", e))?
        .clone();
    let names: Vec<_> = header.iter().collect();
    if names != HEADER {
        return Err(IngestError::parse(
            path,
            1,
            "header",
            format!("expected `{}`, found `{}`", HEADER.join(","), names.join(",")),
        ));
    }

    let mut hubs = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| IngestError::parse(path, row, "row", e))?;
        let field = |idx: usize| rec.get(idx).unwrap_or("");
        let id = field(0).to_string();
        if id.is_empty() {
            return Err(IngestError::parse(path, row, "id", "empty id"));
        }
        let coord = |idx: usize, name: &str| -> Result<f64, IngestError> {
            field(idx)
                .parse::<f64>()
                .map_err(|e| IngestError::parse(path, row, name, format!("{:?}: {e}", field(idx))))
        };
        let lat = coord(2, "lat")?;
        let lon = coord(3, "lon")?;
        if !(-90.0..=90.0).contains(&lat) {
            return Err(IngestError::Range {
                row,
                column: "lat".into(),
                value: lat,
            });
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(IngestError::Range {
                row,
                column: "lon".into(),
                value: lon,
            });
        }
        if !seen.insert(id.clone()) {
            return Err(IngestError::DuplicateId { row, id });
        }
        hubs.push(Hub {
            id,
            state: field(1).to_string(),
            latitude: lat,
            longitude: lon,
        });
    }
    Ok(hubs)
}
