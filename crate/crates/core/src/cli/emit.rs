//! Output files of the four commands, with readers for each so results can
//! be checked by re-reading them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::CliError;
use crate::analytics::{ClusterAssignment, ClusterSummary, Linkage, SimilarityMatrix};
use crate::ingest::{BoundingBox, Hub};
use crate::pipeline::{ToolEffectiveness, ToolStats};

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::input(path, e)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::input(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::input(path, e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(&r).map_err(csv_err(path))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::input(path, e.error()))?;
    write_text(path, &String::from_utf8_lossy(&bytes))
}

/// Header and rows of a CSV file, checking the header matches `expected`
/// when given.
fn read_rows(path: &Path, expected: Option<&[&str]>) -> Result<(Vec<String>, Vec<csv::StringRecord>), CliError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = r.headers().map_err(csv_err(path))?.iter().map(str::to_string).collect();
    if let Some(exp) = expected {
        if header != exp {
            return Err(CliError::input(path, format!("expected header {}, found {}", exp.join(","), header.join(","))));
        }
    }
    let rows = r.records().collect::<Result<Vec<_>, _>>().map_err(csv_err(path))?;
    Ok((header, rows))
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, i: usize, what: &str) -> Result<T, CliError> {
    let raw = rec.get(i).unwrap_or("");
    raw.trim()
        .parse()
        .map_err(|_| CliError::input(path, format!("line {}: bad {what} {raw:?}", rec.position().map_or(0, |p| p.line()))))
}

pub fn write_risk_types(path: &Path, ranked: &[(String, usize)]) -> Result<(), CliError> {
    write_rows(path, &["risk_type", "frequency"], ranked.iter().map(|(r, n)| vec![r.clone(), n.to_string()]))
}

pub fn read_risk_types(path: &Path) -> Result<Vec<(String, usize)>, CliError> {
    let (_, rows) = read_rows(path, Some(&["risk_type", "frequency"]))?;
    rows.iter()
        .map(|r| Ok((r.get(0).unwrap_or("").to_string(), field(path, r, 1, "frequency")?)))
        .collect()
}

const EFFECTIVENESS_HEADER: [&str; 5] = ["tool", "invocations", "informative_results", "distinct_risk_types", "score"];

/// Rows sorted by score descending, then tool name.
pub fn write_tool_effectiveness(path: &Path, eff: &ToolEffectiveness) -> Result<(), CliError> {
    let mut rows: Vec<(&String, &ToolStats)> = eff.iter().collect();
    rows.sort_by(|a, b| b.1.score().cmp(&a.1.score()).then_with(|| a.0.cmp(b.0)));
    write_rows(
        path,
        &EFFECTIVENESS_HEADER,
        rows.into_iter().map(|(t, s)| {
            vec![
                t.clone(),
                s.invocations.to_string(),
                s.informative_results.to_string(),
                s.distinct_risk_types.to_string(),
                s.score().to_string(),
            ]
        }),
    )
}

pub fn read_tool_effectiveness(path: &Path) -> Result<ToolEffectiveness, CliError> {
    let (_, rows) = read_rows(path, Some(&EFFECTIVENESS_HEADER))?;
    rows.iter()
        .map(|r| {
            let stats = ToolStats {
                invocations: field(path, r, 1, "invocations")?,
                informative_results: field(path, r, 2, "informative_results")?,
                distinct_risk_types: field(path, r, 3, "distinct_risk_types")?,
            };
            Ok((r.get(0).unwrap_or("").to_string(), stats))
        })
        .collect()
}

pub fn write_selected_tools(path: &Path, tools: &[String]) -> Result<(), CliError> {
    let mut text = tools.join("\n");
    text.push('\n');
    write_text(path, &text)
}

pub fn read_selected_tools(path: &Path) -> Result<Vec<String>, CliError> {
    Ok(read_text(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

/// Square matrix with a `hub_id` header column. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_similarity(path: &Path, s: &SimilarityMatrix) -> Result<(), CliError> {
    let mut header = vec!["hub_id"];
    header.extend(s.hub_ids.iter().map(String::as_str));
    write_rows(
        path,
        &header,
        s.hub_ids.iter().zip(&s.values).map(|(id, row)| {
            let mut r = vec![id.clone()];
            r.extend(row.iter().map(f64::to_string));
            r
        }),
    )
}

pub fn read_similarity(path: &Path) -> Result<SimilarityMatrix, CliError> {
    let (header, rows) = read_rows(path, None)?;
    if header.first().map(String::as_str) != Some("hub_id") {
        return Err(CliError::input(path, "first column must be hub_id"));
    }
    let hub_ids: Vec<String> = header[1..].to_vec();
    let mut values = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        if r.get(0) != hub_ids.get(i).map(String::as_str) {
            return Err(CliError::input(path, format!("row {} is not {}", i + 1, hub_ids.get(i).map_or("-", |s| s))));
        }
        values.push((1..=hub_ids.len()).map(|j| field(path, r, j, "similarity")).collect::<Result<Vec<f64>, _>>()?);
    }
    if values.len() != hub_ids.len() {
        return Err(CliError::input(path, "matrix is not square"));
    }
    Ok(SimilarityMatrix { hub_ids, values })
}

pub fn write_clusters(path: &Path, a: &ClusterAssignment) -> Result<(), CliError> {
    write_rows(
        path,
        &["hub_id", "cluster"],
        a.hub_ids.iter().zip(&a.labels).map(|(h, l)| vec![h.clone(), l.to_string()]),
    )
}

/// The linkage is not stored in the file; the caller supplies it.
pub fn read_clusters(path: &Path, linkage: Linkage) -> Result<ClusterAssignment, CliError> {
    let (_, rows) = read_rows(path, Some(&["hub_id", "cluster"]))?;
    let mut hub_ids = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for r in &rows {
        hub_ids.push(r.get(0).unwrap_or("").to_string());
        let label: usize = field(path, r, 1, "cluster")?;
        if label == 0 {
            return Err(CliError::input(path, "cluster labels start at 1"));
        }
        labels.push(label);
    }
    let k = labels.iter().copied().max().unwrap_or(0);
    Ok(ClusterAssignment {
        hub_ids,
        labels,
        k,
        linkage,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub hub_ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Colour-scale hints.
    pub min: f64,
    pub max: f64,
}

impl Heatmap {
    pub fn from_similarity(s: &SimilarityMatrix) -> Self {
        let all = s.values.iter().flatten().copied();
        Self {
            hub_ids: s.hub_ids.clone(),
            values: s.values.clone(),
            min: all.clone().fold(f64::INFINITY, f64::min),
            max: all.fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::input(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::input(path, e))
}

/// One row of the cluster map.
#[derive(Debug, Clone, PartialEq)]
pub struct HubFeature {
    pub hub_id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub cluster: usize,
    pub top_risk: Option<String>,
}

/// A point per hub, labelled with its cluster and that cluster's top risk.
pub fn hub_features(
    hubs: &[Hub],
    assignment: &ClusterAssignment,
    summaries: &[ClusterSummary],
) -> Result<Vec<HubFeature>, CliError> {
    let top: BTreeMap<usize, &str> = summaries
        .iter()
        .filter_map(|s| s.top_risks.first().map(|(r, _)| (s.label, r.as_str())))
        .collect();
    assignment
        .hub_ids
        .iter()
        .zip(&assignment.labels)
        .map(|(id, &label)| {
            let hub = hubs
                .iter()
                .find(|h| &h.id == id)
                .ok_or_else(|| CliError::Config(format!("hub {id} is not in the hubs file")))?;
            Ok(HubFeature {
                hub_id: id.clone(),
                latitude: hub.latitude,
                longitude: hub.longitude,
                cluster: label,
                top_risk: top.get(&label).map(|r| r.to_string()),
            })
        })
        .collect()
}

pub fn geojson(features: &[HubFeature]) -> Value {
    let features: Vec<Value> = features
        .iter()
        .map(|f| {
            json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [f.longitude, f.latitude]},
                "properties": {"hub_id": f.hub_id, "cluster": f.cluster, "top_risk": f.top_risk},
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

/// Parses a FeatureCollection of hub points, rejecting anything that is
/// not structurally valid GeoJSON of that shape.
pub fn parse_geojson(value: &Value) -> Result<Vec<HubFeature>, String> {
    if value["type"] != "FeatureCollection" {
        return Err("top level is not a FeatureCollection".into());
    }
    let features = value["features"].as_array().ok_or("features is not a list")?;
    features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            if f["type"] != "Feature" || f["geometry"]["type"] != "Point" {
                return Err(format!("feature {i} is not a Point feature"));
            }
            let c = f["geometry"]["coordinates"].as_array().ok_or(format!("feature {i} has no coordinates"))?;
            let (lon, lat) = match c.as_slice() {
                [lon, lat] => (lon.as_f64(), lat.as_f64()),
                _ => (None, None),
            };
            let (Some(lon), Some(lat)) = (lon, lat) else {
                return Err(format!("feature {i} coordinates must be [longitude, latitude]"));
            };
            if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
                return Err(format!("feature {i} coordinates out of range"));
            }
            let p = &f["properties"];
            Ok(HubFeature {
                hub_id: p["hub_id"].as_str().ok_or(format!("feature {i} lacks hub_id"))?.to_string(),
                latitude: lat,
                longitude: lon,
                cluster: p["cluster"].as_u64().ok_or(format!("feature {i} lacks cluster"))? as usize,
                top_risk: p["top_risk"].as_str().map(str::to_string),
            })
        })
        .collect()
}

fn fmt_mean(m: f64) -> String {
    let s = format!("{m:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Plain-text summary, one section per cluster.
pub fn render_report(year: i32, summaries: &[ClusterSummary], hubs: &[Hub], linkage: Linkage) -> String {
    let n: usize = summaries.iter().map(|s| s.size).sum();
    let mut out = format!(
        "Hub risk clusters for {year}\n{n} hubs in {} cluster(s), {linkage} linkage\n",
        summaries.len()
    );
    for s in summaries {
        let _ = writeln!(out, "\nCluster {}: {} hub(s)", s.label, s.size);
        let _ = writeln!(out, "  members: {}", s.members.join(", "));
        let top = if s.top_risks.is_empty() {
            "none".to_string()
        } else {
            s.top_risks
                .iter()
                .map(|(r, m)| format!("{r} (mean {})", fmt_mean(*m)))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let _ = writeln!(out, "  top risks: {top}");
        let points = hubs.iter().filter(|h| s.members.contains(&h.id)).map(Hub::location);
        if let Some(b) = BoundingBox::of(points) {
            let _ = writeln!(
                out,
                "  bounding box: lat {:.4} to {:.4}, lon {:.4} to {:.4}",
                b.min_lat, b.max_lat, b.min_lon, b.max_lon
            );
        }
    }
    out
}

pub fn write_report(path: &Path, text: &str) -> Result<(), CliError> {
    write_text(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim() -> SimilarityMatrix {
        SimilarityMatrix {
            hub_ids: vec!["a".into(), "b".into(), "c".into()],
            values: vec![
                vec![1.0, 0.1 + 0.2, -1.0 / 3.0],
                vec![0.1 + 0.2, 1.0, 2.0f64.sqrt() / 7.0],
                vec![-1.0 / 3.0, 2.0f64.sqrt() / 7.0, 1.0],
            ],
        }
    }

    #[test]
    fn similarity_and_heatmap_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("similarity.csv");
        write_similarity(&p, &sim()).unwrap();
        assert_eq!(read_similarity(&p).unwrap(), sim());

        let h = Heatmap::from_similarity(&sim());
        assert_eq!((h.min, h.max), (-1.0 / 3.0, 1.0));
        let hp = dir.path().join("heatmap.json");
        write_json(&hp, &h).unwrap();
        assert_eq!(read_json::<Heatmap>(&hp).unwrap(), h);
    }

    #[test]
    fn small_tables_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ranked = vec![("Tornado".to_string(), 6), ("Traffic Jam, heavy".to_string(), 2)];
        let p = dir.path().join("risk_types.csv");
        write_risk_types(&p, &ranked).unwrap();
        assert_eq!(read_risk_types(&p).unwrap(), ranked);

        let eff: ToolEffectiveness = [
            ("storm_events".to_string(), ToolStats { invocations: 9, informative_results: 6, distinct_risk_types: 3 }),
            ("notebook".to_string(), ToolStats::default()),
        ]
        .into_iter()
        .collect();
        let p = dir.path().join("tool_effectiveness.csv");
        write_tool_effectiveness(&p, &eff).unwrap();
        assert!(read_text(&p).unwrap().lines().nth(1).unwrap().starts_with("storm_events,9,6,3,9"));
        assert_eq!(read_tool_effectiveness(&p).unwrap(), eff);

        let tools = vec!["storm_events".to_string(), "traffic_status".to_string()];
        let p = dir.path().join("selected_tools.txt");
        write_selected_tools(&p, &tools).unwrap();
        assert_eq!(read_selected_tools(&p).unwrap(), tools);

        let a = ClusterAssignment {
            hub_ids: vec!["h1".into(), "h2".into(), "h3".into()],
            labels: vec![1, 2, 1],
            k: 2,
            linkage: Linkage::Complete,
        };
        let p = dir.path().join("clusters.csv");
        write_clusters(&p, &a).unwrap();
        assert_eq!(read_clusters(&p, Linkage::Complete).unwrap(), a);
    }

    #[test]
    fn geojson_structure_and_round_trip() {
        let feats = vec![
            HubFeature { hub_id: "h1".into(), latitude: 33.75, longitude: -84.39, cluster: 1, top_risk: Some("Traffic Jam".into()) },
            HubFeature { hub_id: "h2".into(), latitude: 31.2, longitude: -83.1, cluster: 2, top_risk: None },
        ];
        let v = geojson(&feats);
        assert_eq!(v["features"][0]["geometry"]["coordinates"], json!([-84.39, 33.75]));
        assert_eq!(parse_geojson(&v).unwrap(), feats);
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(parse_geojson(&serde_json::from_str(&text).unwrap()).unwrap(), feats);

        let mut swapped = v.clone();
        swapped["features"][0]["geometry"]["coordinates"] = json!([33.75, -184.39]);
        assert!(parse_geojson(&swapped).is_err());
        assert!(parse_geojson(&json!({"type": "Feature"})).is_err());
    }

    #[test]
    fn report_sections() {
        let hubs = vec![
            Hub { id: "h1".into(), state: "Georgia".into(), latitude: 33.0, longitude: -84.0 },
            Hub { id: "h2".into(), state: "Georgia".into(), latitude: 34.5, longitude: -83.25 },
        ];
        let s = ClusterSummary {
            label: 1,
            size: 2,
            members: vec!["h1".into(), "h2".into()],
            mean_counts: vec![("Traffic Jam".into(), 12.5)],
            top_risks: vec![("Traffic Jam".into(), 12.5)],
        };
        let text = render_report(2024, &[s], &hubs, Linkage::Average);
        assert_eq!(text.matches("\nCluster ").count(), 1);
        assert!(text.contains("top risks: Traffic Jam (mean 12.5)"));
        assert!(text.contains("bounding box: lat 33.0000 to 34.5000, lon -84.0000 to -83.2500"));
    }
}
