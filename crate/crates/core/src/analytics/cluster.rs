use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AnalyticsError, SimilarityMatrix};
use crate::pipeline::YearlyRiskProfile;

/// Linkage distances closer than this count as tied.
pub const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Average,
    Single,
    Complete,
}

impl Linkage {
    pub const ALL: [Linkage; 3] = [Linkage::Average, Linkage::Single, Linkage::Complete];

    pub fn as_str(self) -> &'static str {
        match self {
            Linkage::Average => "average",
            Linkage::Single => "single",
            Linkage::Complete => "complete",
        }
    }
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Linkage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "average" => Ok(Linkage::Average),
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            other => Err(format!("unknown linkage {other:?} (expected average, single or complete)")),
        }
    }
}

/// When agglomeration stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Merge until exactly this many clusters remain.
    Clusters(usize),
    /// Merge while the closest pair is at most this far apart.
    DistanceThreshold(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub hub_ids: Vec<String>,
    /// `labels[i]` in `1..=k` is the cluster of `hub_ids[i]`.
    pub labels: Vec<usize>,
    pub k: usize,
    pub linkage: Linkage,
}

impl ClusterAssignment {
    pub fn label_of(&self, hub_id: &str) -> Option<usize> {
        self.hub_ids.iter().position(|h| h == hub_id).map(|i| self.labels[i])
    }

    /// Hub ids of cluster `label`, in assignment order.
    pub fn members(&self, label: usize) -> Vec<&str> {
        self.hub_ids
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l == label)
            .map(|(h, _)| h.as_str())
            .collect()
    }

    /// The partition as sets of hub ids, independent of labels and order.
    pub fn partition(&self) -> BTreeSet<BTreeSet<String>> {
        (1..=self.k)
            .map(|l| self.members(l).into_iter().map(str::to_string).collect())
            .collect()
    }
}

/// Cluster with the default stop rule of exactly `k` clusters.
pub fn agglomerative_cluster(s: &SimilarityMatrix, k: usize, linkage: Linkage) -> Result<ClusterAssignment, AnalyticsError> {
    agglomerative_cluster_with(s, StopRule::Clusters(k), linkage)
}

/// Bottom-up merging on `D = clamp(1 − S, 0, 2)` with Lance–Williams
/// updates. Among pairs within [`TIE_EPS`] of the minimum, the pair whose
/// (smaller, larger) lowest member indices sort first is merged.
pub fn agglomerative_cluster_with(
    s: &SimilarityMatrix,
    stop: StopRule,
    linkage: Linkage,
) -> Result<ClusterAssignment, AnalyticsError> {
    let n = s.hub_ids.len();
    if s.values.len() != n || s.values.iter().any(|r| r.len() != n) {
        return Err(AnalyticsError::Shape(format!("similarity matrix is not {n}×{n}")));
    }
    match stop {
        StopRule::Clusters(k) if k == 0 || k > n => return Err(AnalyticsError::BadK { k, n }),
        StopRule::DistanceThreshold(t) if !(t.is_finite() && t >= 0.0) => return Err(AnalyticsError::BadThreshold(t)),
        _ => {}
    }
    if n == 0 {
        return Err(AnalyticsError::TooFewHubs(0));
    }

    let mut dist: Vec<Vec<f64>> = s
        .values
        .iter()
        .map(|row| row.iter().map(|v| (1.0 - v).clamp(0.0, 2.0)).collect())
        .collect();
    // active clusters, identified by their lowest member index
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mut active = n;

    loop {
        if let StopRule::Clusters(k) = stop {
            if active <= k {
                break;
            }
        }
        if active == 1 {
            break;
        }
        let live: Vec<usize> = (0..n).filter(|&i| members[i].is_some()).collect();
        let mut best = f64::INFINITY;
        for (a, &i) in live.iter().enumerate() {
            for &j in &live[a + 1..] {
                best = best.min(dist[i][j]);
            }
        }
        if let StopRule::DistanceThreshold(t) = stop {
            if best > t {
                break;
            }
        }
        // live is ascending, so the first qualifying pair is the tie-break winner
        let (i, j) = live
            .iter()
            .enumerate()
            .flat_map(|(a, &i)| live[a + 1..].iter().map(move |&j| (i, j)))
            .find(|&(i, j)| dist[i][j] <= best + TIE_EPS)
            .expect("at least two live clusters");

        let (ni, nj) = (
            members[i].as_ref().map_or(0, Vec::len) as f64,
            members[j].as_ref().map_or(0, Vec::len) as f64,
        );
        for &m in live.iter().filter(|&&m| m != i && m != j) {
            let (dmi, dmj) = (dist[m][i], dist[m][j]);
            let d = match linkage {
                Linkage::Average => (ni * dmi + nj * dmj) / (ni + nj),
                Linkage::Single => dmi.min(dmj),
                Linkage::Complete => dmi.max(dmj),
            };
            dist[m][i] = d;
            dist[i][m] = d;
        }
        let absorbed = members[j].take().expect("live cluster");
        members[i].as_mut().expect("live cluster").extend(absorbed);
        active -= 1;
    }

    let groups: Vec<Vec<usize>> = members.into_iter().flatten().collect();
    Ok(canonical_assignment(&s.hub_ids, &groups, linkage))
}

/// Labels 1..=k ordered by each cluster's lexicographically smallest hub id.
fn canonical_assignment(hub_ids: &[String], groups: &[Vec<usize>], linkage: Linkage) -> ClusterAssignment {
    let mut keyed: Vec<(&str, &Vec<usize>)> = groups
        .iter()
        .map(|g| (g.iter().map(|&i| hub_ids[i].as_str()).min().expect("non-empty cluster"), g))
        .collect();
    keyed.sort();
    let mut labels = vec![0; hub_ids.len()];
    for (label, (_, g)) in keyed.iter().enumerate() {
        for &i in g.iter() {
            labels[i] = label + 1;
        }
    }
    ClusterAssignment {
        hub_ids: hub_ids.to_vec(),
        labels,
        k: groups.len(),
        linkage,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub label: usize,
    pub size: usize,
    pub members: Vec<String>,
    /// Mean raw count per risk type, in column order.
    pub mean_counts: Vec<(String, f64)>,
    /// Up to three nonzero means, descending, ties alphabetical.
    pub top_risks: Vec<(String, f64)>,
}

pub fn cluster_summary(
    assignment: &ClusterAssignment,
    profiles: &[YearlyRiskProfile],
) -> Result<Vec<ClusterSummary>, AnalyticsError> {
    let mut columns: Vec<String> = Vec::new();
    for p in profiles {
        for r in p.counts.keys() {
            if !columns.contains(r) {
                columns.push(r.clone());
            }
        }
    }
    let mut by_label: BTreeMap<usize, Vec<&YearlyRiskProfile>> = BTreeMap::new();
    for p in profiles {
        let label = assignment
            .label_of(&p.hub_id)
            .ok_or_else(|| AnalyticsError::Coverage(p.hub_id.clone()))?;
        by_label.entry(label).or_default().push(p);
    }
    let mut out = Vec::new();
    for (label, group) in by_label {
        let size = group.len();
        let mean_counts: Vec<(String, f64)> = columns
            .iter()
            .map(|r| {
                let total: u64 = group.iter().map(|p| p.count(r)).sum();
                (r.clone(), total as f64 / size as f64)
            })
            .collect();
        let mut top: Vec<(String, f64)> = mean_counts.iter().filter(|(_, m)| *m > 0.0).cloned().collect();
        top.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        top.truncate(3);
        out.push(ClusterSummary {
            label,
            size,
            members: group.iter().map(|p| p.hub_id.clone()).collect(),
            mean_counts,
            top_risks: top,
        });
    }
    Ok(out)
}
