mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

use common::fixture_dir;
use hubrisk::dates::DateRange;
use hubrisk::ingest::{events_near, haversine_km, load_hubs, load_storm_csv};
use serde_json::Value;

fn hubrisk(out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hubrisk"))
        .arg("--config")
        .arg(fixture_dir().join("hubrisk.toml"))
        .arg("--out")
        .arg(out)
        .args(extra)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, extra: &[&str]) -> String {
    let o = hubrisk(out, extra);
    assert!(o.status.success(), "{extra:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn fails(out: &Path, extra: &[&str], code: i32) -> String {
    let o = hubrisk(out, extra);
    assert_eq!(o.status.code(), Some(code), "{extra:?}: {}", String::from_utf8_lossy(&o.stdout));
    String::from_utf8(o.stderr).unwrap()
}

fn checkpoint(out: &Path, hub: &str, day: &str) -> std::path::PathBuf {
    out.join("assessments").join(hub).join(format!("{day}.json"))
}

#[test]
fn assess_resumes_from_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(out, &["identify"]);
    let first = ok(out, &["assess"]);
    assert!(first.contains("assessments: 120 executed, 0 reused, 1 flagged"), "{first}");
    let profiles = std::fs::read(out.join("profiles_2024.csv")).unwrap();

    let again = ok(out, &["assess"]);
    assert!(again.contains("assessments: 0 executed, 120 reused, 1 flagged"), "{again}");

    for (hub, day) in [("h001", "2024-05-03"), ("h007", "2024-05-01"), ("h012", "2024-05-10")] {
        std::fs::remove_file(checkpoint(out, hub, day)).unwrap();
    }
    std::fs::write(checkpoint(out, "h009", "2024-05-02"), "{ truncated").unwrap();
    let resumed = ok(out, &["assess"]);
    assert!(resumed.contains("assessments: 4 executed, 116 reused, 1 flagged"), "{resumed}");
    assert_eq!(std::fs::read(out.join("profiles_2024.csv")).unwrap(), profiles);

    let flagged: Value =
        serde_json::from_str(&std::fs::read_to_string(checkpoint(out, "h009", "2024-05-06")).unwrap()).unwrap();
    assert_eq!(flagged["flagged"], true);
    assert_eq!(flagged["findings"], Value::Array(vec![]));
    assert!(out.join("traces/assess-h009-2024-05-06-retry.json").is_file());
}

#[test]
fn late_local_event_lands_on_next_utc_day() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(out, &["--selected-tools", "storm_events,traffic_status,wiki_summary", "assess"]);
    let cp: Value =
        serde_json::from_str(&std::fs::read_to_string(checkpoint(out, "h011", "2024-05-05")).unwrap()).unwrap();
    let types: Vec<&str> = cp["findings"].as_array().unwrap().iter().map(|f| f["risk_type"].as_str().unwrap()).collect();
    assert!(types.contains(&"Thunderstorm Wind"), "{types:?}");
}

#[test]
fn cluster_outputs_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(out, &["identify"]);
    ok(out, &["assess"]);
    let clusters = ok(out, &["cluster"]);
    assert!(clusters.contains("cluster 1: 6 hub(s)") && clusters.contains("cluster 2: 6 hub(s)"), "{clusters}");

    let geo: Value = serde_json::from_str(&std::fs::read_to_string(out.join("clusters.geojson")).unwrap()).unwrap();
    assert_eq!(geo["type"], "FeatureCollection");
    let features = geo["features"].as_array().unwrap();
    assert_eq!(features.len(), 12);
    let labels: BTreeSet<u64> = features.iter().map(|f| f["properties"]["cluster"].as_u64().unwrap()).collect();
    assert_eq!(labels, BTreeSet::from([1, 2]));
    let atlanta = features.iter().find(|f| f["properties"]["hub_id"] == "h001").unwrap();
    assert_eq!(atlanta["geometry"]["coordinates"], serde_json::json!([-84.388, 33.749]));
    assert_eq!(atlanta["properties"]["top_risk"], "Traffic Jam");

    let heatmap: Value = serde_json::from_str(&std::fs::read_to_string(out.join("heatmap.json")).unwrap()).unwrap();
    assert_eq!(heatmap["values"].as_array().unwrap().len(), 12);

    let report = ok(out, &["report"]);
    assert!(report.contains("top risks: Traffic Jam"), "{report}");
    assert!(report.contains("members: h001, h002, h003, h004, h005, h006"), "{report}");
    assert_eq!(std::fs::read_to_string(out.join("report.txt")).unwrap(), report);
}

#[test]
fn distance_threshold_and_linkage_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(out, &["--selected-tools", "storm_events,traffic_status", "assess"]);
    let zero = ok(out, &["--distance-threshold", "0", "--linkage", "complete", "cluster"]);
    // only hubs with identical counts on the clustering columns merge at distance 0
    let csv = std::fs::read_to_string(out.join("profiles_2024.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let cols: Vec<usize> = ["Thunderstorm Wind", "Tornado", "Flash Flood", "Traffic Jam"]
        .iter()
        .map(|c| header.iter().position(|h| h == c).unwrap())
        .collect();
    let distinct: BTreeSet<Vec<String>> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            cols.iter().map(|&i| f[i].to_string()).collect()
        })
        .collect();
    assert!(zero.contains("cluster 1: 6 hub(s)"), "{zero}");
    assert_eq!(zero.matches("hub(s)").count(), distinct.len(), "{zero}");
    let one = ok(out, &["--distance-threshold", "2", "cluster"]);
    assert!(one.contains("cluster 1: 12 hub(s)"), "{one}");
}

#[test]
fn identify_counts_match_a_brute_force_storm_scan() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(out, &["identify"]);
    let ranked = std::fs::read_to_string(out.join("risk_types.csv")).unwrap();
    let freq = |t: &str| -> usize {
        ranked
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{t},")))
            .map_or(0, |n| n.parse().unwrap())
    };

    let fx = fixture_dir();
    let hubs = load_hubs(&fx.join("hubs.csv")).unwrap();
    let storms = load_storm_csv(&fx.join("storms.csv")).unwrap();
    for t in ["Thunderstorm Wind", "Tornado", "Flash Flood", "Hail"] {
        let mut tasks = 0;
        for h in &hubs {
            let p = h.location();
            for w in DateRange::seasonal_windows(2024) {
                let brute = storms.events().iter().any(|e| {
                    e.event_type == t && w.contains(e.begin_date()) && haversine_km(p, e.location()) <= 50.0
                });
                assert_eq!(brute, events_near(&storms, p, 50.0, &w).iter().any(|e| e.event_type == t));
                tasks += usize::from(brute);
            }
        }
        assert_eq!(freq(t), tasks, "{t}");
    }
}

#[test]
fn usage_and_input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let err = fails(out, &["assess"], 1);
    assert!(err.contains("run `identify` first"), "{err}");
    let err = fails(out, &["cluster"], 1);
    assert!(err.contains("run `assess` first"), "{err}");
    let err = fails(out, &["--linkage", "ward", "cluster"], 1);
    assert!(err.contains("unknown linkage"), "{err}");
    let err = fails(out, &["--intervals", "2024-03-10..2024-03-01", "identify"], 1);
    assert!(err.contains("2024-03-10"), "{err}");
    let err = fails(out, &["--selected-tools", "teleporter", "assess"], 1);
    assert!(err.contains("teleporter"), "{err}");
    let err = fails(out, &["--risk-columns", "Volcano", "--selected-tools", "storm_events", "cluster"], 1);
    assert!(err.contains("run `assess` first") || err.contains("Volcano"), "{err}");

    let o = Command::new(env!("CARGO_BIN_EXE_hubrisk")).arg("identify").output().unwrap();
    assert_eq!(o.status.code(), Some(1));

    let bad = out.join("bad.toml");
    std::fs::write(&bad, "year = 2024\nhubs = \"x.csv\"\ncolour = \"red\"\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hubrisk")).arg("--config").arg(&bad).arg("identify").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn single_hub_profiles_cannot_be_clustered() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    std::fs::write(
        out.join("profiles_2024.csv"),
        "hub_id,Thunderstorm Wind,Tornado,Flash Flood,Traffic Jam\nh001,0,0,0,10\n",
    )
    .unwrap();
    let err = fails(out, &["cluster"], 1);
    assert!(err.contains("at least 2 hubs"), "{err}");
}
