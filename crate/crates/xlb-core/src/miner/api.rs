//! Remote-API abstraction for the mining pipeline.
//!
//! Both the real code-host client and the offline fixture universe serve
//! the same three queries: candidate repositories with their language byte
//! breakdown, a repository's issues, and its commit list.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{MinerError, MiningCriteria};

/// Repository metadata before criteria filtering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRepo {
    pub full_name: String,
    pub stars: u64,
    pub language_bytes: BTreeMap<String, u64>,
    pub default_branch: String,
    #[serde(default)]
    pub description: String,
    pub clone_url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawIssue {
    pub number: u64,
    pub state: String,
    #[serde(default)]
    pub labels: Vec<String>,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub body: String,
    /// Pull requests share the issues endpoint and are excluded.
    #[serde(default)]
    pub is_pull_request: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCommit {
    pub sha: String,
    pub parents: Vec<String>,
    pub title: String,
}

pub trait RepoApi: Send + Sync {
    /// Repositories worth considering under `criteria` (the caller applies
    /// the star/share filters; implementations may pre-narrow the search).
    fn candidate_repositories(&self, criteria: &MiningCriteria)
        -> Result<Vec<RawRepo>, MinerError>;

    fn issues(&self, full_name: &str) -> Result<Vec<RawIssue>, MinerError>;

    fn commits(&self, full_name: &str) -> Result<Vec<RawCommit>, MinerError>;
}
