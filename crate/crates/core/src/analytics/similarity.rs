use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::pipeline::YearlyRiskProfile;

/// Rows whose norm falls below this are treated as the zero vector.
const ZERO_NORM: f64 = 1e-12;
/// Columns whose std is below this fraction of their magnitude are constant.
const ZERO_SPREAD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileMatrix {
    pub hub_ids: Vec<String>,
    pub risk_types: Vec<String>,
    /// `values[i]` is the row of `hub_ids[i]`.
    pub values: Vec<Vec<f64>>,
}

impl ProfileMatrix {
    /// Raw counts, one row per profile in input order, columns in
    /// `vocabulary` order. Risk types absent from a profile count as 0.
    pub fn from_profiles(profiles: &[YearlyRiskProfile], vocabulary: &[String]) -> Self {
        Self {
            hub_ids: profiles.iter().map(|p| p.hub_id.clone()).collect(),
            risk_types: vocabulary.to_vec(),
            values: profiles
                .iter()
                .map(|p| vocabulary.iter().map(|r| p.count(r) as f64).collect())
                .collect(),
        }
    }

    fn check(&self) -> Result<(), AnalyticsError> {
        if self.values.len() != self.hub_ids.len() {
            return Err(AnalyticsError::Shape(format!(
                "{} rows for {} hubs",
                self.values.len(),
                self.hub_ids.len()
            )));
        }
        let d = self.risk_types.len();
        if let Some(i) = self.values.iter().position(|r| r.len() != d) {
            return Err(AnalyticsError::Shape(format!("row {i} has {} columns, expected {d}", self.values[i].len())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub hub_ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    pub fn len(&self) -> usize {
        self.hub_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hub_ids.is_empty()
    }
}

/// Column-wise z-scores of the raw profile counts.
pub fn standardize(profiles: &[YearlyRiskProfile], vocabulary: &[String]) -> Result<ProfileMatrix, AnalyticsError> {
    standardize_matrix(&ProfileMatrix::from_profiles(profiles, vocabulary))
}

/// `(x − mean) / s` per column with the sample (n − 1) standard deviation;
/// constant columns become zeros.
pub fn standardize_matrix(m: &ProfileMatrix) -> Result<ProfileMatrix, AnalyticsError> {
    m.check()?;
    let n = m.values.len();
    if n < 2 {
        return Err(AnalyticsError::TooFewHubs(n));
    }
    if m.risk_types.is_empty() {
        return Err(AnalyticsError::EmptyVocabulary);
    }
    let mut out = m.values.clone();
    for j in 0..m.risk_types.len() {
        let column: Vec<f64> = m.values.iter().map(|r| r[j]).collect();
        let mean = column.iter().sum::<f64>() / n as f64;
        let var = column.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        let scale = column.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for (i, row) in out.iter_mut().enumerate() {
            row[j] = if sd <= ZERO_SPREAD * scale || sd == 0.0 {
                0.0
            } else {
                (column[i] - mean) / sd
            };
        }
    }
    Ok(ProfileMatrix {
        hub_ids: m.hub_ids.clone(),
        risk_types: m.risk_types.clone(),
        values: out,
    })
}

/// Pairwise cosine similarity of the rows. Zero rows have similarity 0 to
/// every other row and 1 to themselves.
pub fn cosine_similarity_matrix(m: &ProfileMatrix) -> Result<SimilarityMatrix, AnalyticsError> {
    m.check()?;
    let n = m.values.len();
    if n < 2 {
        return Err(AnalyticsError::TooFewHubs(n));
    }
    let norms: Vec<f64> = m.values.iter().map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        s[i][i] = 1.0;
        for j in (i + 1)..n {
            let v = if norms[i] < ZERO_NORM || norms[j] < ZERO_NORM {
                0.0
            } else {
                let dot: f64 = m.values[i].iter().zip(&m.values[j]).map(|(a, b)| a * b).sum();
                (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0)
            };
            s[i][j] = v;
            s[j][i] = v;
        }
    }
    Ok(SimilarityMatrix {
        hub_ids: m.hub_ids.clone(),
        values: s,
    })
}
