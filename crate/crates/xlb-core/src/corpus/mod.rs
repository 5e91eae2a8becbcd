//! Dataset construction: labeled, balanced, split JSONL corpora from mined
//! function pairs, plus comment stripping, statistics, and classification
//! metrics.

mod dataset;
mod metrics;
mod stats;
mod strip;

pub use dataset::{build_dataset, split_dataset, DatasetError};
pub use metrics::{score, MetricReport, ScoreError};
pub use stats::{compute_stats, DatasetStats, Histogram, StatsError};
pub use strip::strip_comments;

use serde::{Deserialize, Serialize};

use crate::detect::Mechanism;
use crate::source_model::Language;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

/// One labeled function instance in the exported JSONL corpus.
///
/// Every pair contributes exactly two records, one per label, and both
/// carry the same split so a buggy function and its fix never straddle
/// train/test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub pair_id: String,
    pub repo: String,
    pub commit: String,
    pub parent_commit: String,
    pub file: String,
    pub language: Language,
    pub function_name: String,
    pub mechanisms: Vec<Mechanism>,
    /// 1 = buggy, 0 = clean.
    pub label: u8,
    pub code: String,
    pub security: bool,
    /// `null` until a split is assigned.
    pub split: Option<Split>,
}
