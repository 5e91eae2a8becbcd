//! Dataset characterization: counts, language mix, security subset, and
//! length distributions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::source_model::Language;

use super::{strip_comments, DatasetRecord};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("cannot compute statistics of an empty dataset")]
    EmptyDataset,
}

/// Function length in lines, measured on comment-stripped code.
pub const LINE_BUCKETS: [&str; 3] = ["<60", "60-200", ">200"];
/// Whitespace-token count buckets.
pub const TOKEN_BUCKETS: [&str; 4] = ["<128", "128-255", "256-511", ">=512"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub labels: Vec<String>,
    pub counts: Vec<usize>,
}

impl Histogram {
    fn new(labels: &[&str]) -> Histogram {
        Histogram {
            labels: labels.iter().map(|s| s.to_string()).collect(),
            counts: vec![0; labels.len()],
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub pair_count: usize,
    pub record_count: usize,
    /// Pairs per language.
    pub language_pairs: BTreeMap<Language, usize>,
    /// Percentages of `pair_count`, full precision.
    pub language_percentages: BTreeMap<Language, f64>,
    pub security_pair_count: usize,
    /// Distinct fix commits among security pairs.
    pub security_commit_count: usize,
    /// Line-length distribution of buggy (label 1) records.
    pub buggy_line_histogram: Histogram,
    /// Line-length distribution of clean (label 0) records.
    pub clean_line_histogram: Histogram,
    pub buggy_token_histogram: Histogram,
    pub clean_token_histogram: Histogram,
}

fn line_bucket(lines: usize) -> usize {
    if lines < 60 {
        0
    } else if lines <= 200 {
        1
    } else {
        2
    }
}

fn token_bucket(tokens: usize) -> usize {
    if tokens < 128 {
        0
    } else if tokens < 256 {
        1
    } else if tokens < 512 {
        2
    } else {
        3
    }
}

/// Computes all dataset statistics. Lengths are always measured on
/// comment-stripped code, whatever the dataset's own `with_comments`
/// setting, so datasets built either way report comparable numbers.
pub fn compute_stats(records: &[DatasetRecord]) -> Result<DatasetStats, StatsError> {
    if records.is_empty() {
        return Err(StatsError::EmptyDataset);
    }

    let mut pairs: BTreeMap<&str, &DatasetRecord> = BTreeMap::new();
    for r in records {
        pairs.entry(&r.pair_id).or_insert(r);
    }
    let pair_count = pairs.len();

    let mut language_pairs: BTreeMap<Language, usize> = BTreeMap::new();
    let mut security_pairs = 0usize;
    let mut security_commits: BTreeSet<(&str, &str)> = BTreeSet::new();
    for rep in pairs.values() {
        *language_pairs.entry(rep.language).or_insert(0) += 1;
        if rep.security {
            security_pairs += 1;
            security_commits.insert((&rep.repo, &rep.commit));
        }
    }
    let language_percentages = language_pairs
        .iter()
        .map(|(l, n)| (*l, *n as f64 * 100.0 / pair_count as f64))
        .collect();

    let mut buggy_lines = Histogram::new(&LINE_BUCKETS);
    let mut clean_lines = Histogram::new(&LINE_BUCKETS);
    let mut buggy_tokens = Histogram::new(&TOKEN_BUCKETS);
    let mut clean_tokens = Histogram::new(&TOKEN_BUCKETS);
    for r in records {
        let stripped = strip_comments(&r.code, r.language);
        let lines = if stripped.is_empty() {
            0
        } else {
            stripped.lines().count()
        };
        let tokens = stripped.split_whitespace().count();
        let (line_hist, token_hist) = if r.label == 1 {
            (&mut buggy_lines, &mut buggy_tokens)
        } else {
            (&mut clean_lines, &mut clean_tokens)
        };
        line_hist.counts[line_bucket(lines)] += 1;
        token_hist.counts[token_bucket(tokens)] += 1;
    }

    Ok(DatasetStats {
        pair_count,
        record_count: records.len(),
        language_pairs,
        language_percentages,
        security_pair_count: security_pairs,
        security_commit_count: security_commits.len(),
        buggy_line_histogram: buggy_lines,
        clean_line_histogram: clean_lines,
        buggy_token_histogram: buggy_tokens,
        clean_token_histogram: clean_tokens,
    })
}

#[cfg(test)]
mod tests {
    use super::super::dataset::tests::sample_pair;
    use super::super::{build_dataset, DatasetRecord};
    use super::*;

    fn dataset(py: usize, java: usize) -> Vec<DatasetRecord> {
        let mut pairs = Vec::new();
        for n in 0..py {
            pairs.push(sample_pair(n, Language::Python));
        }
        for n in 0..java {
            pairs.push(sample_pair(py + n, Language::Java));
        }
        build_dataset(&pairs, true)
    }

    #[test]
    fn language_percentages_exact() {
        let stats = compute_stats(&dataset(8, 2)).unwrap();
        assert_eq!(stats.pair_count, 10);
        assert_eq!(stats.record_count, 20);
        assert_eq!(stats.language_pairs[&Language::Python], 8);
        assert!((stats.language_percentages[&Language::Python] - 80.0).abs() < 1e-9);
        assert!((stats.language_percentages[&Language::Java] - 20.0).abs() < 1e-9);
        let total: f64 = stats.language_percentages.values().sum();
        assert!((total - 100.0).abs() < 0.01);
    }

    #[test]
    fn line_buckets_split_at_60_and_200() {
        // Functions of exactly 10, 59, 60, and 201 stripped lines.
        let mut pairs = Vec::new();
        for (n, lines) in [10usize, 59, 60, 201].iter().enumerate() {
            let mut p = sample_pair(n, Language::Python);
            let body: String = (0..lines - 1).map(|i| format!("    x{i} = {i}\n")).collect();
            p.buggy_code = format!("def f{n}():\n{body}");
            p.clean_code = format!("def f{n}():\n{body}    pass\n");
            pairs.push(p);
        }
        let records = build_dataset(&pairs, true);
        let stats = compute_stats(&records).unwrap();
        assert_eq!(stats.buggy_line_histogram.counts, vec![2, 1, 1]);
        assert_eq!(stats.buggy_line_histogram.total(), 4);
    }

    #[test]
    fn security_subset_counts_pairs_and_commits() {
        // sample_pair marks every fifth pair security; each has its own sha.
        let stats = compute_stats(&dataset(10, 0)).unwrap();
        assert_eq!(stats.security_pair_count, 2);
        assert_eq!(stats.security_commit_count, 2);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert!(matches!(compute_stats(&[]), Err(StatsError::EmptyDataset)));
    }

    #[test]
    fn bucket_counts_sum_to_population() {
        let records = dataset(7, 3);
        let stats = compute_stats(&records).unwrap();
        let buggy = records.iter().filter(|r| r.label == 1).count();
        let clean = records.len() - buggy;
        assert_eq!(stats.buggy_line_histogram.total(), buggy);
        assert_eq!(stats.clean_line_histogram.total(), clean);
        assert_eq!(stats.buggy_token_histogram.total(), buggy);
        assert_eq!(stats.clean_token_histogram.total(), clean);
    }
}
