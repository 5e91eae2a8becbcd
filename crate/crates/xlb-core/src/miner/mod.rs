//! GitHub mining pipeline: from repository search to buggy/clean
//! function pairs.
//!
//! The pipeline runs five steps per repository: filter repositories by
//! stars and language mix, collect closed bug-labeled issues, match commits
//! whose titles reference those issues, extract the cross-language
//! functions a fix commit changed (buggy version from the first parent,
//! clean version from the fix), and repeat across all repositories.
//!
//! All remote access goes through the [`api::RepoApi`] trait; the
//! [`github`] implementation talks to the REST API with disk caching and
//! rate-limit awareness, while [`fixture`] serves a local universe of
//! scripted repositories for offline runs and tests. Work units are
//! checkpointed so interrupted runs resume without repeating work.

pub mod api;
pub mod extract;
pub mod fixture;
pub mod git;
pub mod github;
pub mod pipeline;

pub use api::RepoApi;
pub use extract::extract_pairs;
pub use fixture::FixtureApi;
pub use github::GithubApi;
pub use pipeline::{
    filter_bug_issues, filter_repositories, match_fix_commits, run_pipeline, PipelineOutcome,
};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::detect::Mechanism;
use crate::source_model::Language;

#[derive(Debug, Error)]
pub enum MinerError {
    #[error("authentication failed: {0}")]
    ApiAuth(String),
    #[error("rate limited; retry after {retry_after_secs}s")]
    RateLimited { retry_after_secs: u64 },
    #[error("api unavailable: {0}")]
    ApiUnavailable(String),
    #[error("git {action} failed: {detail}")]
    Git { action: String, detail: String },
    #[error("checkout failed for {repo}@{sha}: {detail}")]
    CheckoutFailed {
        repo: String,
        sha: String,
        detail: String,
    },
    #[error("invalid criteria: {0}")]
    InvalidCriteria(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Language pairs a mined repository may match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepoLanguagePair {
    PythonC,
    JavaC,
    JavaPython,
}

impl RepoLanguagePair {
    pub const ALL: [RepoLanguagePair; 3] = [
        RepoLanguagePair::PythonC,
        RepoLanguagePair::JavaC,
        RepoLanguagePair::JavaPython,
    ];

    /// The two sides of the pair as GitHub language names; C and C++ count
    /// as one side.
    pub fn sides(self) -> (&'static [&'static str], &'static [&'static str]) {
        match self {
            RepoLanguagePair::PythonC => (&["Python"], &["C", "C++"]),
            RepoLanguagePair::JavaC => (&["Java"], &["C", "C++"]),
            RepoLanguagePair::JavaPython => (&["Java"], &["Python"]),
        }
    }
}

/// Filtering and matching knobs for the mining pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningCriteria {
    pub min_stars: u64,
    pub language_pairs: BTreeSet<RepoLanguagePair>,
    /// Minimum fraction of the repository's bytes each side must hold.
    pub min_language_share: f64,
    pub bug_keywords: Vec<String>,
    pub security_keywords: Vec<String>,
    /// Regexes extracting issue numbers from commit titles; the first
    /// capture group must be the number.
    pub issue_id_patterns: Vec<String>,
}

impl Default for MiningCriteria {
    fn default() -> Self {
        MiningCriteria {
            min_stars: 500,
            language_pairs: RepoLanguagePair::ALL.into_iter().collect(),
            min_language_share: 0.05,
            bug_keywords: [
                "bug", "fix", "error", "fault", "defect", "crash", "leak", "wrong", "broken",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            security_keywords: [
                "security",
                "vulnerability",
                "cve",
                "overflow",
                "exploit",
                "injection",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            issue_id_patterns: ["#(\\d+)", "\\bGH-(\\d+)\\b", "\\bgh-(\\d+)\\b"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

impl MiningCriteria {
    pub fn validate(&self) -> Result<(), MinerError> {
        if !(self.min_language_share > 0.0 && self.min_language_share < 1.0) {
            return Err(MinerError::InvalidCriteria(format!(
                "min_language_share must be in (0, 1), got {}",
                self.min_language_share
            )));
        }
        if self.bug_keywords.is_empty() || self.security_keywords.is_empty() {
            return Err(MinerError::InvalidCriteria(
                "keyword lists must be non-empty".to_string(),
            ));
        }
        if self.language_pairs.is_empty() {
            return Err(MinerError::InvalidCriteria(
                "at least one language pair required".to_string(),
            ));
        }
        for p in &self.issue_id_patterns {
            regex::Regex::new(p).map_err(|e| {
                MinerError::InvalidCriteria(format!("bad issue id pattern `{p}`: {e}"))
            })?;
        }
        Ok(())
    }
}

/// A repository that passed Step 1 filtering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepoRecord {
    /// `owner/name`.
    pub full_name: String,
    pub stars: u64,
    pub language_bytes: BTreeMap<String, u64>,
    pub matched_pair: RepoLanguagePair,
    pub default_branch: String,
    /// Description shown on the manual non-software review list.
    #[serde(default)]
    pub description: String,
    /// Where to clone from; a local path for fixture universes.
    pub clone_url: String,
}

/// A closed, bug-labeled issue (Step 2).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueRecord {
    pub repo: String,
    pub number: u64,
    pub state: String,
    pub labels: Vec<String>,
    pub title: String,
    pub body: String,
    pub is_bug: bool,
    pub is_security: bool,
}

/// A commit whose title references at least one bug issue (Step 3).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitMatch {
    pub repo: String,
    pub sha: String,
    /// First parent of `sha`.
    pub parent_sha: String,
    pub title: String,
    pub issue_numbers: Vec<u64>,
    pub is_security: bool,
}

/// One buggy/clean function pair (Step 4 output).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionPair {
    /// Stable hash of (repo, sha, file, qualified_name).
    pub pair_id: String,
    pub repo: String,
    pub sha: String,
    pub parent_sha: String,
    pub file: String,
    pub language: Language,
    pub qualified_name: String,
    pub mechanisms: BTreeSet<Mechanism>,
    /// Parent-commit version of the function.
    pub buggy_code: String,
    /// Fix-commit version of the function.
    pub clean_code: String,
    pub is_security: bool,
}

impl FunctionPair {
    pub fn make_id(repo: &str, sha: &str, file: &str, qualified_name: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(repo.as_bytes());
        hasher.update(b"\x1f");
        hasher.update(sha.as_bytes());
        hasher.update(b"\x1f");
        hasher.update(file.as_bytes());
        hasher.update(b"\x1f");
        hasher.update(qualified_name.as_bytes());
        hex::encode(&hasher.finalize()[..16])
    }
}
