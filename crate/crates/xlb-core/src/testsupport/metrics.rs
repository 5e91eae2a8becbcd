//! Brute-force pairwise AUC reference.

/// AUC as the literal probability that a random positive outscores a random
/// negative, ties counted one half — computed by comparing every
/// positive/negative pair. Quadratic, for test use only.
pub fn pairwise_auc(labels: &[u8], scores: &[f64]) -> Option<f64> {
    assert_eq!(labels.len(), scores.len());
    let positives: Vec<f64> = labels
        .iter()
        .zip(scores)
        .filter(|(l, _)| **l == 1)
        .map(|(_, s)| *s)
        .collect();
    let negatives: Vec<f64> = labels
        .iter()
        .zip(scores)
        .filter(|(l, _)| **l == 0)
        .map(|(_, s)| *s)
        .collect();
    if positives.is_empty() || negatives.is_empty() {
        return None;
    }
    let mut wins = 0.0f64;
    for p in &positives {
        for n in &negatives {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    Some(wins / (positives.len() as f64 * negatives.len() as f64))
}
