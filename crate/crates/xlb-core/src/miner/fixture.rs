//! Offline fixture universe: a local directory standing in for the code
//! host, so the full pipeline runs without network access.
//!
//! Layout: `<root>/universe.json` describes the repositories (metadata,
//! issues, and the relative path of each scripted git repository):
//!
//! ```json
//! {
//!   "repos": [
//!     {
//!       "full_name": "fixture/alpha",
//!       "stars": 800,
//!       "language_bytes": { "Python": 60000, "C": 40000 },
//!       "default_branch": "master",
//!       "description": "synthetic ctypes project",
//!       "path": "alpha",
//!       "issues": [
//!         { "number": 1, "state": "closed", "labels": ["bug"],
//!           "title": "crash in fetch", "body": "segfault" }
//!       ]
//!     }
//!   ]
//! }
//! ```
//!
//! Commit listings come from `git log` on the scripted repository itself,
//! which keeps the universe self-consistent.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::api::{RawCommit, RawIssue, RawRepo, RepoApi};
use super::git::GitRepo;
use super::{MinerError, MiningCriteria};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct UniverseSpec {
    repos: Vec<UniverseRepo>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct UniverseRepo {
    full_name: String,
    stars: u64,
    language_bytes: BTreeMap<String, u64>,
    #[serde(default = "default_branch")]
    default_branch: String,
    #[serde(default)]
    description: String,
    path: String,
    #[serde(default)]
    issues: Vec<FixtureIssue>,
}

fn default_branch() -> String {
    "master".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FixtureIssue {
    number: u64,
    state: String,
    #[serde(default)]
    labels: Vec<String>,
    #[serde(default)]
    title: String,
    #[serde(default)]
    body: String,
}

pub struct FixtureApi {
    root: PathBuf,
    spec: UniverseSpec,
}

impl FixtureApi {
    pub fn load(root: &Path) -> Result<FixtureApi, MinerError> {
        let manifest = root.join("universe.json");
        let text = std::fs::read_to_string(&manifest).map_err(|e| MinerError::Io {
            path: manifest.display().to_string(),
            source: e,
        })?;
        let spec: UniverseSpec = serde_json::from_str(&text)
            .map_err(|e| MinerError::ApiUnavailable(format!("malformed universe.json: {e}")))?;
        Ok(FixtureApi {
            root: root.to_path_buf(),
            spec,
        })
    }

    fn repo(&self, full_name: &str) -> Result<&UniverseRepo, MinerError> {
        self.spec
            .repos
            .iter()
            .find(|r| r.full_name == full_name)
            .ok_or_else(|| MinerError::ApiUnavailable(format!("unknown fixture repo {full_name}")))
    }

    fn repo_dir(&self, repo: &UniverseRepo) -> PathBuf {
        self.root.join(&repo.path)
    }
}

impl RepoApi for FixtureApi {
    fn candidate_repositories(
        &self,
        _criteria: &MiningCriteria,
    ) -> Result<Vec<RawRepo>, MinerError> {
        Ok(self
            .spec
            .repos
            .iter()
            .map(|r| RawRepo {
                full_name: r.full_name.clone(),
                stars: r.stars,
                language_bytes: r.language_bytes.clone(),
                default_branch: r.default_branch.clone(),
                description: r.description.clone(),
                clone_url: self.repo_dir(r).display().to_string(),
            })
            .collect())
    }

    fn issues(&self, full_name: &str) -> Result<Vec<RawIssue>, MinerError> {
        Ok(self
            .repo(full_name)?
            .issues
            .iter()
            .map(|i| RawIssue {
                number: i.number,
                state: i.state.clone(),
                labels: i.labels.clone(),
                title: i.title.clone(),
                body: i.body.clone(),
                is_pull_request: false,
            })
            .collect())
    }

    fn commits(&self, full_name: &str) -> Result<Vec<RawCommit>, MinerError> {
        let repo = self.repo(full_name)?;
        let git = GitRepo::open(&self.repo_dir(repo));
        Ok(git
            .log()?
            .into_iter()
            .map(|e| RawCommit {
                sha: e.sha,
                parents: e.parents,
                title: e.title,
            })
            .collect())
    }
}
