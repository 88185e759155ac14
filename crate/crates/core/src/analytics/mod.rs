//! Risk-profile analytics: column z-scores, cosine similarity between
//! hubs, agglomerative clustering and per-cluster summaries.

mod cluster;
mod similarity;

use thiserror::Error;

pub use cluster::{
    agglomerative_cluster, agglomerative_cluster_with, cluster_summary, ClusterAssignment, ClusterSummary, Linkage,
    StopRule, TIE_EPS,
};
pub use similarity::{cosine_similarity_matrix, standardize, standardize_matrix, ProfileMatrix, SimilarityMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("need at least 2 hubs, got {0}")]
    TooFewHubs(usize),
    #[error("risk vocabulary is empty")]
    EmptyVocabulary,
    #[error("cluster count {k} must lie in 1..={n}")]
    BadK { k: usize, n: usize },
    #[error("distance threshold must be a finite nonnegative number, got {0}")]
    BadThreshold(f64),
    #[error("hub {0:?} is missing from the cluster assignment")]
    Coverage(String),
    #[error("malformed matrix: {0}")]
    Shape(String),
}
