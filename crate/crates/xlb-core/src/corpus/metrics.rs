//! Binary classification metrics for bug-detection experiments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("labels and scores differ in length: {labels} vs {scores}")]
    LengthMismatch { labels: usize, scores: usize },
    #[error("cannot score an empty prediction set")]
    Empty,
    #[error("labels must be 0 or 1, found {0}")]
    InvalidLabel(u8),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Absent when only one class is present.
    pub auc: Option<f64>,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Thresholded classification metrics plus AUC.
///
/// A score at or above `threshold` predicts the positive class. AUC is the
/// exact rank statistic — the probability that a random positive outscores
/// a random negative, ties counted one half — computed with midranks; with
/// a single class it is reported absent and everything else still computed.
pub fn score(labels: &[u8], scores: &[f64], threshold: f64) -> Result<MetricReport, ScoreError> {
    if labels.len() != scores.len() {
        return Err(ScoreError::LengthMismatch {
            labels: labels.len(),
            scores: scores.len(),
        });
    }
    if labels.is_empty() {
        return Err(ScoreError::Empty);
    }
    if let Some(bad) = labels.iter().find(|l| **l > 1) {
        return Err(ScoreError::InvalidLabel(*bad));
    }

    let (mut tp, mut tn, mut fp, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (label, s) in labels.iter().zip(scores) {
        let predicted = *s >= threshold;
        match (*label == 1, predicted) {
            (true, true) => tp += 1,
            (true, false) => fn_ += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
        }
    }

    let accuracy = (tp + tn) as f64 / (tp + tn + fp + fn_) as f64;
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };

    Ok(MetricReport {
        accuracy,
        precision,
        recall,
        f1,
        auc: rank_auc(labels, scores),
        tp,
        tn,
        fp,
        fn_,
    })
}

/// Mann-Whitney AUC via midranks: `(Σ ranks⁺ − n⁺(n⁺+1)/2) / (n⁺ n⁻)`.
fn rank_auc(labels: &[u8], scores: &[f64]) -> Option<f64> {
    let n_pos = labels.iter().filter(|l| **l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(std::cmp::Ordering::Equal));

    // Midranks over tie groups; ranks are 1-based.
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }

    let n_pos_f = n_pos as f64;
    Some((rank_sum_pos - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testsupport::pairwise_auc;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn perfect_separation_scores_one_everywhere() {
        let report = score(&[1, 0], &[0.9, 0.1], 0.5).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.precision, 1.0);
        assert_eq!(report.recall, 1.0);
        assert_eq!(report.f1, 1.0);
        assert_eq!(report.auc, Some(1.0));
    }

    #[test]
    fn hand_worked_confusion_matrix() {
        // tp=1, fp=1, fn=0, tn=1: precision 1/2, recall 1, f1 = 2·0.5·1/1.5.
        let report = score(&[1, 0, 0], &[0.9, 0.8, 0.1], 0.5).unwrap();
        assert_eq!((report.tp, report.fp, report.fn_, report.tn), (1, 1, 0, 1));
        assert!((report.precision - 0.5).abs() < 1e-12);
        assert!((report.recall - 1.0).abs() < 1e-12);
        assert!((report.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn all_negative_predictions_zero_precision_without_panic() {
        let report = score(&[1, 1, 0], &[0.1, 0.2, 0.3], 0.5).unwrap();
        assert_eq!(report.tp, 0);
        assert_eq!(report.precision, 0.0);
        assert_eq!(report.recall, 0.0);
        assert_eq!(report.f1, 0.0);
    }

    #[test]
    fn single_class_reports_absent_auc() {
        let report = score(&[1, 1], &[0.9, 0.4], 0.5).unwrap();
        assert_eq!(report.auc, None);
        assert!((report.accuracy - 0.5).abs() < 1e-12);
    }

    #[test]
    fn report_is_internally_consistent() {
        let labels = [1, 0, 1, 1, 0, 0, 1, 0];
        let scores = [0.9, 0.8, 0.7, 0.3, 0.2, 0.6, 0.55, 0.1];
        let r = score(&labels, &scores, 0.5).unwrap();
        let total = r.tp + r.tn + r.fp + r.fn_;
        assert_eq!(total, labels.len());
        assert_eq!(r.accuracy, (r.tp + r.tn) as f64 / total as f64);
        assert_eq!(r.precision, r.tp as f64 / (r.tp + r.fp) as f64);
        assert_eq!(r.recall, r.tp as f64 / (r.tp + r.fn_) as f64);
    }

    #[test]
    fn rank_auc_equals_pairwise_enumeration_exactly() {
        let mut rng = StdRng::seed_from_u64(7);
        for case in 0..50 {
            let n = 200;
            let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1)).collect();
            // Quantized scores force plenty of ties.
            let scores: Vec<f64> = (0..n)
                .map(|_| (rng.random_range(0..=20) as f64) / 20.0)
                .collect();
            let got = score(&labels, &scores, 0.5).unwrap().auc;
            let expected = pairwise_auc(&labels, &scores);
            assert_eq!(got, expected, "case {case}");
        }
    }

    #[test]
    fn auc_negation_symmetry() {
        let mut rng = StdRng::seed_from_u64(11);
        let labels: Vec<u8> = (0..100).map(|_| rng.random_range(0..=1)).collect();
        let scores: Vec<f64> = (0..100).map(|_| rng.random()).collect();
        let auc = score(&labels, &scores, 0.5).unwrap().auc.unwrap();
        let neg_scores: Vec<f64> = scores.iter().map(|s| -s).collect();
        let flipped: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
        let auc2 = score(&flipped, &neg_scores, 0.5).unwrap().auc.unwrap();
        assert!((auc - auc2).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&auc));
    }

    #[test]
    fn input_validation() {
        assert!(matches!(
            score(&[1], &[0.5, 0.6], 0.5),
            Err(ScoreError::LengthMismatch { .. })
        ));
        assert!(matches!(score(&[], &[], 0.5), Err(ScoreError::Empty)));
        assert!(matches!(
            score(&[2], &[0.5], 0.5),
            Err(ScoreError::InvalidLabel(2))
        ));
    }
}
