//! Building and splitting the labeled corpus.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::miner::FunctionPair;

use super::{strip_comments, DatasetRecord, Split};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("records already carry split assignments")]
    AlreadySplit,
    #[error("ratios must be positive and sum to 1, got {0:?}")]
    BadRatios((f64, f64, f64)),
}

fn normalize_endings(text: &str) -> String {
    text.replace("\r\n", "\n").replace('\r', "\n")
}

/// Emits two records per pair: label 1 carries the buggy version, label 0
/// the clean one. Exact-duplicate pairs (same buggy and clean text after
/// line-ending normalization) collapse to their first occurrence. With
/// `with_comments = false` the code fields are comment-stripped; pairs
/// where either side strips to nothing are dropped.
pub fn build_dataset(pairs: &[FunctionPair], with_comments: bool) -> Vec<DatasetRecord> {
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    let mut records = Vec::with_capacity(pairs.len() * 2);

    for pair in pairs {
        let buggy = normalize_endings(&pair.buggy_code);
        let clean = normalize_endings(&pair.clean_code);
        if !seen.insert((buggy.clone(), clean.clone())) {
            log::debug!("dropping exact duplicate of pair {}", pair.pair_id);
            continue;
        }
        let (buggy, clean) = if with_comments {
            (buggy, clean)
        } else {
            let b = strip_comments(&buggy, pair.language);
            let c = strip_comments(&clean, pair.language);
            if b.is_empty() || c.is_empty() {
                log::warn!(
                    "pair {} is empty after comment stripping; dropped",
                    pair.pair_id
                );
                continue;
            }
            (b, c)
        };
        for (label, code) in [(1u8, buggy), (0u8, clean)] {
            records.push(DatasetRecord {
                id: format!("{}:{}", pair.pair_id, label),
                pair_id: pair.pair_id.clone(),
                repo: pair.repo.clone(),
                commit: pair.sha.clone(),
                parent_commit: pair.parent_sha.clone(),
                file: pair.file.clone(),
                language: pair.language,
                function_name: pair.qualified_name.clone(),
                mechanisms: pair.mechanisms.iter().copied().collect(),
                label,
                code,
                security: pair.is_security,
                split: None,
            });
        }
    }

    records.sort_by(|a, b| (&a.pair_id, a.label).cmp(&(&b.pair_id, b.label)));
    records
}

/// Assigns train/valid/test splits at pair level.
///
/// Pair ids are shuffled with a deterministic generator seeded by `seed`;
/// the first ⌊r_train·P⌋ pairs go to train, the next ⌊r_valid·P⌋ to valid,
/// and the remainder to test. Both records of a pair share the split.
pub fn split_dataset(
    records: &[DatasetRecord],
    seed: u64,
    ratios: (f64, f64, f64),
) -> Result<Vec<DatasetRecord>, DatasetError> {
    let (r_train, r_valid, r_test) = ratios;
    let sum = r_train + r_valid + r_test;
    if !(r_train > 0.0 && r_valid > 0.0 && r_test > 0.0 && (sum - 1.0).abs() < 1e-9) {
        return Err(DatasetError::BadRatios(ratios));
    }
    if records.iter().any(|r| r.split.is_some()) {
        return Err(DatasetError::AlreadySplit);
    }

    let mut pair_ids: Vec<String> = records
        .iter()
        .map(|r| r.pair_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pair_ids.shuffle(&mut rng);

    let total = pair_ids.len();
    let n_train = (r_train * total as f64).floor() as usize;
    let n_valid = (r_valid * total as f64).floor() as usize;

    let mut assignment = std::collections::BTreeMap::new();
    for (idx, pair_id) in pair_ids.into_iter().enumerate() {
        let split = if idx < n_train {
            Split::Train
        } else if idx < n_train + n_valid {
            Split::Valid
        } else {
            Split::Test
        };
        assignment.insert(pair_id, split);
    }

    Ok(records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.split = Some(assignment[&r.pair_id]);
            r
        })
        .collect())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::detect::Mechanism;
    use crate::source_model::Language;
    use std::collections::BTreeMap;

    pub(crate) fn sample_pair(n: usize, language: Language) -> FunctionPair {
        let (buggy, clean) = match language {
            Language::Python => (
                format!("def f{n}(x):\n    # fetch\n    r = lib.get(x)\n    return r\n"),
                format!("def f{n}(x):\n    # fetch safely\n    r = lib.get(x or 0)\n    return r\n"),
            ),
            Language::Java => (
                format!("int f{n}(int x) {{\n    // fetch\n    return lib.get(x);\n}}\n"),
                format!("int f{n}(int x) {{\n    // fetch safely\n    return lib.get(Math.max(x, 0));\n}}\n"),
            ),
        };
        FunctionPair {
            pair_id: FunctionPair::make_id("o/r", &format!("sha{n}"), "src/m", &format!("f{n}")),
            repo: "o/r".into(),
            sha: format!("sha{n}"),
            parent_sha: format!("psha{n}"),
            file: "src/m".into(),
            language,
            qualified_name: format!("f{n}"),
            mechanisms: [Mechanism::Ctypes].into_iter().collect(),
            buggy_code: buggy,
            clean_code: clean,
            is_security: n % 5 == 0,
        }
    }

    #[test]
    fn one_pair_two_records_balanced() {
        let records = build_dataset(&[sample_pair(1, Language::Python)], true);
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].pair_id, records[1].pair_id);
        let labels: Vec<u8> = records.iter().map(|r| r.label).collect();
        assert_eq!(labels, vec![0, 1]);
        assert!(records.iter().all(|r| r.split.is_none()));
    }

    #[test]
    fn byte_identical_pairs_are_deduplicated() {
        let a = sample_pair(1, Language::Python);
        let mut b = sample_pair(2, Language::Python);
        b.buggy_code = a.buggy_code.clone();
        b.clean_code = a.clean_code.clone();
        let records = build_dataset(&[a, b], true);
        assert_eq!(records.len(), 2);
    }

    #[test]
    fn crlf_only_differences_also_deduplicate() {
        let a = sample_pair(1, Language::Python);
        let mut b = sample_pair(2, Language::Python);
        b.buggy_code = a.buggy_code.replace('\n', "\r\n");
        b.clean_code = a.clean_code.clone();
        let records = build_dataset(&[a, b], true);
        assert_eq!(records.len(), 2);
    }

    #[test]
    fn no_comments_build_strips_all_records() {
        let pairs: Vec<FunctionPair> = (0..5)
            .map(|n| sample_pair(n, if n % 2 == 0 { Language::Python } else { Language::Java }))
            .collect();
        let records = build_dataset(&pairs, false);
        assert_eq!(records.len(), 10);
        for r in &records {
            assert!(!r.code.contains("# fetch") && !r.code.contains("// fetch"));
            assert!(!r.code.is_empty());
        }
    }

    #[test]
    fn comment_only_function_is_dropped_when_stripping() {
        let mut p = sample_pair(1, Language::Python);
        p.buggy_code = "# nothing but comments\n".into();
        let records = build_dataset(&[p], false);
        assert!(records.is_empty());
    }

    #[test]
    fn split_sizes_follow_floor_arithmetic() {
        let pairs: Vec<FunctionPair> = (0..10).map(|n| sample_pair(n, Language::Python)).collect();
        let records = build_dataset(&pairs, true);
        let split = split_dataset(&records, 7, (0.8, 0.1, 0.1)).unwrap();
        let mut by_split: BTreeMap<Split, BTreeSet<&str>> = BTreeMap::new();
        for r in &split {
            by_split.entry(r.split.unwrap()).or_default().insert(&r.pair_id);
        }
        assert_eq!(by_split[&Split::Train].len(), 8);
        assert_eq!(by_split[&Split::Valid].len(), 1);
        assert_eq!(by_split[&Split::Test].len(), 1);
    }

    #[test]
    fn both_records_of_a_pair_share_the_split() {
        let pairs: Vec<FunctionPair> = (0..37).map(|n| sample_pair(n, Language::Java)).collect();
        let records = build_dataset(&pairs, true);
        let split = split_dataset(&records, 3, (0.8, 0.1, 0.1)).unwrap();
        let mut per_pair: BTreeMap<&str, BTreeSet<Split>> = BTreeMap::new();
        for r in &split {
            per_pair.entry(&r.pair_id).or_default().insert(r.split.unwrap());
        }
        assert!(per_pair.values().all(|s| s.len() == 1));
    }

    #[test]
    fn same_seed_same_assignment_different_seed_same_sizes() {
        let pairs: Vec<FunctionPair> = (0..50).map(|n| sample_pair(n, Language::Python)).collect();
        let records = build_dataset(&pairs, true);
        let a = split_dataset(&records, 42, (0.8, 0.1, 0.1)).unwrap();
        let b = split_dataset(&records, 42, (0.8, 0.1, 0.1)).unwrap();
        assert_eq!(a, b);

        let c = split_dataset(&records, 43, (0.8, 0.1, 0.1)).unwrap();
        let count = |rs: &[DatasetRecord], s: Split| {
            rs.iter().filter(|r| r.split == Some(s)).count()
        };
        for s in [Split::Train, Split::Valid, Split::Test] {
            assert_eq!(count(&a, s), count(&c, s));
        }
    }

    #[test]
    fn double_split_is_rejected() {
        let records = build_dataset(&[sample_pair(1, Language::Python)], true);
        let once = split_dataset(&records, 1, (0.8, 0.1, 0.1)).unwrap();
        assert!(matches!(
            split_dataset(&once, 1, (0.8, 0.1, 0.1)),
            Err(DatasetError::AlreadySplit)
        ));
    }

    #[test]
    fn bad_ratios_are_rejected() {
        let records = build_dataset(&[sample_pair(1, Language::Python)], true);
        assert!(split_dataset(&records, 1, (0.8, 0.1, 0.2)).is_err());
        assert!(split_dataset(&records, 1, (1.0, 0.0, 0.0)).is_err());
    }
}
