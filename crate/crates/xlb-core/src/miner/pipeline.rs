//! Pipeline steps 1–3 and the checkpointed orchestration of step 5.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::detect::PatternConfig;

use super::api::{RawCommit, RawRepo, RepoApi};
use super::git::GitRepo;
use super::{
    extract_pairs, CommitMatch, FunctionPair, IssueRecord, MinerError, MiningCriteria,
    RepoLanguagePair, RepoRecord,
};

/// Step 1: star and language-share filtering.
///
/// A repository matches a language pair when each side holds strictly more
/// than `min_language_share` of its total bytes (C and C++ bytes count
/// together as one side). When several pairs match, the one with the
/// largest combined share wins. Every surviving record is also a candidate
/// for the manual non-software review; nothing is auto-rejected for that.
pub fn filter_repositories(
    api: &dyn RepoApi,
    criteria: &MiningCriteria,
) -> Result<Vec<RepoRecord>, MinerError> {
    criteria.validate()?;
    let mut records = Vec::new();
    for raw in api.candidate_repositories(criteria)? {
        if raw.stars < criteria.min_stars {
            continue;
        }
        if let Some(pair) = match_language_pair(&raw, criteria) {
            records.push(RepoRecord {
                full_name: raw.full_name,
                stars: raw.stars,
                language_bytes: raw.language_bytes,
                matched_pair: pair,
                default_branch: raw.default_branch,
                description: raw.description,
                clone_url: raw.clone_url,
            });
        }
    }
    records.sort_by(|a, b| a.full_name.cmp(&b.full_name));
    Ok(records)
}

fn match_language_pair(raw: &RawRepo, criteria: &MiningCriteria) -> Option<RepoLanguagePair> {
    let total: u64 = raw.language_bytes.values().sum();
    if total == 0 {
        return None;
    }
    let share_of = |names: &[&str]| -> f64 {
        let bytes: u64 = names
            .iter()
            .filter_map(|n| raw.language_bytes.get(*n))
            .sum();
        bytes as f64 / total as f64
    };
    let mut best: Option<(f64, RepoLanguagePair)> = None;
    // Fixed iteration order makes the tie-break deterministic.
    for pair in RepoLanguagePair::ALL {
        if !criteria.language_pairs.contains(&pair) {
            continue;
        }
        let (a, b) = pair.sides();
        let (share_a, share_b) = (share_of(a), share_of(b));
        if share_a > criteria.min_language_share && share_b > criteria.min_language_share {
            let combined = share_a + share_b;
            if best.map_or(true, |(s, _)| combined > s) {
                best = Some((combined, pair));
            }
        }
    }
    best.map(|(_, p)| p)
}

/// Step 2: closed issues carrying at least one bug keyword in labels,
/// title, or body. Security keywords set the `is_security` flag and count
/// as bug evidence themselves — security issues are high-severity bugs and
/// form a subset of the corpus, not a separate stream.
pub fn filter_bug_issues(
    api: &dyn RepoApi,
    repo: &RepoRecord,
    criteria: &MiningCriteria,
) -> Result<Vec<IssueRecord>, MinerError> {
    let mut records = Vec::new();
    for issue in api.issues(&repo.full_name)? {
        if issue.is_pull_request || !issue.state.eq_ignore_ascii_case("closed") {
            continue;
        }
        let haystacks: Vec<&str> = issue
            .labels
            .iter()
            .map(String::as_str)
            .chain([issue.title.as_str(), issue.body.as_str()])
            .collect();
        let is_security = keyword_match(&haystacks, &criteria.security_keywords);
        let is_bug = is_security || keyword_match(&haystacks, &criteria.bug_keywords);
        if !is_bug {
            continue;
        }
        records.push(IssueRecord {
            repo: repo.full_name.clone(),
            number: issue.number,
            state: issue.state,
            labels: issue.labels,
            title: issue.title,
            body: issue.body,
            is_bug,
            is_security,
        });
    }
    records.sort_by_key(|i| i.number);
    Ok(records)
}

/// Case-insensitive whole-word match of any keyword in any haystack.
fn keyword_match(haystacks: &[&str], keywords: &[String]) -> bool {
    keywords.iter().any(|kw| {
        let kw = kw.to_lowercase();
        haystacks.iter().any(|h| {
            h.to_lowercase().match_indices(&kw).any(|(pos, _)| {
                let bytes = h.as_bytes();
                let before_ok = pos == 0 || !bytes[pos - 1].is_ascii_alphanumeric();
                let after = pos + kw.len();
                let after_ok = after >= bytes.len() || !bytes[after].is_ascii_alphanumeric();
                before_ok && after_ok
            })
        })
    })
}

/// Step 3: commits whose title references a bug issue's number.
///
/// Merge commits (two or more parents) are skipped; root commits have no
/// prior version and are skipped with a log line.
pub fn match_fix_commits(
    repo: &RepoRecord,
    issues: &[IssueRecord],
    commits: &[RawCommit],
    criteria: &MiningCriteria,
) -> Result<Vec<CommitMatch>, MinerError> {
    let bug_numbers: BTreeSet<u64> = issues.iter().filter(|i| i.is_bug).map(|i| i.number).collect();
    if bug_numbers.is_empty() {
        return Ok(Vec::new());
    }
    let patterns: Vec<Regex> = criteria
        .issue_id_patterns
        .iter()
        .map(|p| Regex::new(p))
        .collect::<Result<_, _>>()
        .map_err(|e| MinerError::InvalidCriteria(format!("bad issue id pattern: {e}")))?;

    let mut matches = Vec::new();
    for commit in commits {
        if commit.parents.len() >= 2 {
            continue; // merge
        }
        let Some(parent_sha) = commit.parents.first() else {
            log::info!("{}: root commit {} skipped", repo.full_name, commit.sha);
            continue;
        };
        let mut referenced: BTreeSet<u64> = BTreeSet::new();
        for re in &patterns {
            for caps in re.captures_iter(&commit.title) {
                if let Some(num) = caps.get(1).and_then(|m| m.as_str().parse::<u64>().ok()) {
                    if bug_numbers.contains(&num) {
                        referenced.insert(num);
                    }
                }
            }
        }
        if referenced.is_empty() {
            continue;
        }
        let is_security = issues
            .iter()
            .any(|i| referenced.contains(&i.number) && i.is_security);
        matches.push(CommitMatch {
            repo: repo.full_name.clone(),
            sha: commit.sha.clone(),
            parent_sha: parent_sha.clone(),
            title: commit.title.clone(),
            issue_numbers: referenced.into_iter().collect(),
            is_security,
        });
    }
    Ok(matches)
}

/// One line per completed work unit in `checkpoints.jsonl`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub repo: String,
    pub sha: String,
    pub pairs: usize,
    pub ts: String,
}

pub struct PipelineOutcome {
    pub pairs: Vec<FunctionPair>,
    /// Review list for the manual non-software screening: name and
    /// description of every repository that passed the automatic filters.
    pub review: Vec<(String, String)>,
    pub completed_units: usize,
    pub skipped_units: usize,
}

/// Steps 1–5 across all repositories, checkpointed and resumable.
///
/// Completed (repo, commit) units are recorded in `checkpoints.jsonl` and
/// their pairs persisted under `units/`; a rerun skips them and still
/// reproduces the full corpus from disk. The final pair list is
/// deduplicated by id and canonically ordered, so parallelism never
/// changes the output. Repositories named in `exclusions` (the outcome of
/// the manual review) are skipped entirely.
pub fn run_pipeline(
    api: &dyn RepoApi,
    criteria: &MiningCriteria,
    state_dir: &Path,
    patterns: &PatternConfig,
    exclusions: &BTreeSet<String>,
    jobs: usize,
) -> Result<PipelineOutcome, MinerError> {
    let state = StateDir::prepare(state_dir)?;
    let done = state.load_checkpoints()?;

    let repositories = filter_repositories(api, criteria)?;
    let review: Vec<(String, String)> = repositories
        .iter()
        .map(|r| (r.full_name.clone(), r.description.clone()))
        .collect();

    // Work units: every matched commit of every surviving repository.
    let mut units: Vec<(RepoRecord, CommitMatch)> = Vec::new();
    for repo in &repositories {
        if exclusions.contains(&repo.full_name) {
            log::info!("{} excluded by manual review", repo.full_name);
            continue;
        }
        let issues = filter_bug_issues(api, repo, criteria)?;
        if issues.is_empty() {
            continue;
        }
        let commits = api.commits(&repo.full_name)?;
        for m in match_fix_commits(repo, &issues, &commits, criteria)? {
            units.push((repo.clone(), m));
        }
    }

    let pending: Vec<&(RepoRecord, CommitMatch)> = units
        .iter()
        .filter(|(repo, m)| !done.contains(&(repo.full_name.clone(), m.sha.clone())))
        .collect();
    let skipped_units = units.len() - pending.len();

    let state_lock = Mutex::new(&state);
    let process = |(repo, m): &&(RepoRecord, CommitMatch)| -> Result<(), MinerError> {
        let clone_dir = state.clone_dir(&repo.full_name);
        let clone = GitRepo::ensure_clone(&repo.clone_url, &clone_dir)?;
        let pairs = match extract_pairs(repo, m, &clone, patterns) {
            Ok(pairs) => pairs,
            Err(e) => {
                log::warn!("{}@{}: extraction failed: {e}", repo.full_name, m.sha);
                Vec::new()
            }
        };
        let guard = state_lock.lock().unwrap();
        guard.write_unit(&repo.full_name, &m.sha, &pairs)?;
        guard.append_checkpoint(&Checkpoint {
            repo: repo.full_name.clone(),
            sha: m.sha.clone(),
            pairs: pairs.len(),
            ts: chrono::Utc::now().to_rfc3339(),
        })?;
        Ok(())
    };

    let results: Vec<Result<(), MinerError>> = if jobs == 1 || pending.len() <= 1 {
        pending.iter().map(process).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| MinerError::ApiUnavailable(format!("worker pool: {e}")))?;
        pool.install(|| pending.par_iter().map(process).collect())
    };
    let mut completed_units = 0;
    for r in results {
        match r {
            Ok(()) => completed_units += 1,
            Err(MinerError::ApiAuth(e)) => return Err(MinerError::ApiAuth(e)),
            Err(e) => log::warn!("work unit failed, continuing: {e}"),
        }
    }

    // The corpus is whatever sits on disk: this run's units plus any from
    // interrupted predecessors.
    let mut pairs = state.load_all_units()?;
    pairs.sort_by(|a, b| {
        (&a.repo, &a.sha, &a.file, &a.qualified_name)
            .cmp(&(&b.repo, &b.sha, &b.file, &b.qualified_name))
    });
    pairs.dedup_by(|a, b| a.pair_id == b.pair_id);

    Ok(PipelineOutcome {
        pairs,
        review,
        completed_units,
        skipped_units,
    })
}

/// Pipeline state directory: checkpoints, per-unit pair files, clones.
struct StateDir {
    root: PathBuf,
}

impl StateDir {
    fn prepare(root: &Path) -> Result<StateDir, MinerError> {
        for sub in ["units", "clones"] {
            let dir = root.join(sub);
            std::fs::create_dir_all(&dir).map_err(|e| MinerError::Io {
                path: dir.display().to_string(),
                source: e,
            })?;
        }
        Ok(StateDir {
            root: root.to_path_buf(),
        })
    }

    fn checkpoints_path(&self) -> PathBuf {
        self.root.join("checkpoints.jsonl")
    }

    fn clone_dir(&self, full_name: &str) -> PathBuf {
        self.root.join("clones").join(sanitize(full_name))
    }

    fn unit_path(&self, full_name: &str, sha: &str) -> PathBuf {
        self.root
            .join("units")
            .join(format!("{}__{}.json", sanitize(full_name), sha))
    }

    fn load_checkpoints(&self) -> Result<BTreeSet<(String, String)>, MinerError> {
        let path = self.checkpoints_path();
        if !path.exists() {
            return Ok(BTreeSet::new());
        }
        let text = std::fs::read_to_string(&path).map_err(|e| MinerError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut done = BTreeSet::new();
        for line in text.lines() {
            match serde_json::from_str::<Checkpoint>(line) {
                Ok(cp) => {
                    done.insert((cp.repo, cp.sha));
                }
                // A torn trailing line from a crash is ignored; its unit
                // file was written first, so at worst the unit reruns.
                Err(e) => log::warn!("ignoring malformed checkpoint line: {e}"),
            }
        }
        Ok(done)
    }

    fn append_checkpoint(&self, cp: &Checkpoint) -> Result<(), MinerError> {
        let path = self.checkpoints_path();
        let mut text = if path.exists() {
            std::fs::read_to_string(&path).map_err(|e| MinerError::Io {
                path: path.display().to_string(),
                source: e,
            })?
        } else {
            String::new()
        };
        text.push_str(&serde_json::to_string(cp).expect("checkpoint serializes"));
        text.push('\n');
        atomic_write(&path, text.as_bytes())
    }

    fn write_unit(
        &self,
        full_name: &str,
        sha: &str,
        pairs: &[FunctionPair],
    ) -> Result<(), MinerError> {
        let path = self.unit_path(full_name, sha);
        let json = serde_json::to_vec_pretty(pairs).expect("pairs serialize");
        atomic_write(&path, &json)
    }

    fn load_all_units(&self) -> Result<Vec<FunctionPair>, MinerError> {
        let dir = self.root.join("units");
        let mut entries: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| MinerError::Io {
                path: dir.display().to_string(),
                source: e,
            })?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        entries.sort();
        let mut pairs = Vec::new();
        for path in entries {
            let text = std::fs::read_to_string(&path).map_err(|e| MinerError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            match serde_json::from_str::<Vec<FunctionPair>>(&text) {
                Ok(mut unit) => pairs.append(&mut unit),
                Err(e) => log::warn!("skipping malformed unit file {}: {e}", path.display()),
            }
        }
        Ok(pairs)
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

/// Write-temp-then-rename so readers never observe a torn file.
fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), MinerError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| MinerError::Io {
        path: tmp.display().to_string(),
        source: e,
    })?;
    std::fs::rename(&tmp, path).map_err(|e| MinerError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn raw(full_name: &str, stars: u64, bytes: &[(&str, u64)]) -> RawRepo {
        RawRepo {
            full_name: full_name.into(),
            stars,
            language_bytes: bytes.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            default_branch: "main".into(),
            description: String::new(),
            clone_url: String::new(),
        }
    }

    struct StubApi {
        repos: Vec<RawRepo>,
    }

    impl RepoApi for StubApi {
        fn candidate_repositories(
            &self,
            _criteria: &MiningCriteria,
        ) -> Result<Vec<RawRepo>, MinerError> {
            Ok(self.repos.clone())
        }
        fn issues(&self, _full_name: &str) -> Result<Vec<super::super::api::RawIssue>, MinerError> {
            Ok(Vec::new())
        }
        fn commits(&self, _full_name: &str) -> Result<Vec<RawCommit>, MinerError> {
            Ok(Vec::new())
        }
    }

    #[test]
    fn star_threshold_is_inclusive() {
        let api = StubApi {
            repos: vec![
                raw("a/low", 499, &[("Python", 60), ("C", 40)]),
                raw("a/edge", 500, &[("Python", 60), ("C", 40)]),
            ],
        };
        let records = filter_repositories(&api, &MiningCriteria::default()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].full_name, "a/edge");
    }

    #[test]
    fn single_language_repo_is_excluded() {
        let api = StubApi {
            repos: vec![raw("a/py", 900, &[("Python", 100)])],
        };
        assert!(filter_repositories(&api, &MiningCriteria::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn share_boundary_is_strict() {
        let api = StubApi {
            repos: vec![
                raw("a/ok", 600, &[("Python", 60), ("C", 30), ("Shell", 10)]),
                raw("a/thin", 600, &[("Python", 96), ("C", 4)]),
            ],
        };
        let records = filter_repositories(&api, &MiningCriteria::default()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].matched_pair, RepoLanguagePair::PythonC);
    }

    #[test]
    fn c_and_cpp_bytes_count_as_one_side() {
        let api = StubApi {
            repos: vec![raw("a/cpp", 600, &[("Python", 90), ("C", 3), ("C++", 4)])],
        };
        let records = filter_repositories(&api, &MiningCriteria::default()).unwrap();
        assert_eq!(records.len(), 1);
    }

    fn repo_record() -> RepoRecord {
        RepoRecord {
            full_name: "o/r".into(),
            stars: 600,
            language_bytes: BTreeMap::new(),
            matched_pair: RepoLanguagePair::PythonC,
            default_branch: "main".into(),
            description: String::new(),
            clone_url: String::new(),
        }
    }

    struct IssueApi {
        issues: Vec<super::super::api::RawIssue>,
    }

    impl RepoApi for IssueApi {
        fn candidate_repositories(
            &self,
            _c: &MiningCriteria,
        ) -> Result<Vec<RawRepo>, MinerError> {
            Ok(Vec::new())
        }
        fn issues(&self, _f: &str) -> Result<Vec<super::super::api::RawIssue>, MinerError> {
            Ok(self.issues.clone())
        }
        fn commits(&self, _f: &str) -> Result<Vec<RawCommit>, MinerError> {
            Ok(Vec::new())
        }
    }

    fn issue(number: u64, state: &str, labels: &[&str], title: &str, body: &str) -> super::super::api::RawIssue {
        super::super::api::RawIssue {
            number,
            state: state.into(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
            title: title.into(),
            body: body.into(),
            is_pull_request: false,
        }
    }

    #[test]
    fn issue_filtering_matches_keywords_and_state() {
        let api = IssueApi {
            issues: vec![
                issue(1, "closed", &["bug"], "something", ""),
                issue(2, "open", &[], "fix crash", ""),
                issue(3, "closed", &["security"], "exploit", "buffer overflow possible"),
                issue(4, "closed", &[], "improve debugging docs", ""),
                issue(5, "closed", &[], "API is broken on 3.12", ""),
            ],
        };
        let record = repo_record();
        let got = filter_bug_issues(&api, &record, &MiningCriteria::default()).unwrap();
        let numbers: Vec<u64> = got.iter().map(|i| i.number).collect();
        // 1: labeled bug; 3: overflow in body (also security); 5: broken.
        // 2 is open; 4's "debugging" does not word-match "bug".
        assert_eq!(numbers, vec![1, 3, 5]);
        assert!(got.iter().find(|i| i.number == 3).unwrap().is_security);
        assert!(!got.iter().find(|i| i.number == 1).unwrap().is_security);
    }

    fn commit(sha: &str, parents: &[&str], title: &str) -> RawCommit {
        RawCommit {
            sha: sha.into(),
            parents: parents.iter().map(|s| s.to_string()).collect(),
            title: title.into(),
        }
    }

    #[test]
    fn commit_matching_follows_issue_ids() {
        let record = repo_record();
        let issues = vec![IssueRecord {
            repo: "o/r".into(),
            number: 123,
            state: "closed".into(),
            labels: vec!["bug".into()],
            title: "segfault".into(),
            body: String::new(),
            is_bug: true,
            is_security: false,
        }];
        let commits = vec![
            commit("aaa", &["p0"], "Fix segfault in native wrapper (#123)"),
            commit("bbb", &["p1"], "Fix typo"),
            commit("ccc", &["p2", "p3"], "Merge pull request #123"),
            commit("ddd", &[], "Initial commit for #123"),
            commit("eee", &["p4"], "Address gh-123 follow-up"),
        ];
        let matches =
            match_fix_commits(&record, &issues, &commits, &MiningCriteria::default()).unwrap();
        let shas: Vec<&str> = matches.iter().map(|m| m.sha.as_str()).collect();
        assert_eq!(shas, vec!["aaa", "eee"]);
        assert_eq!(matches[0].issue_numbers, vec![123]);
        assert_eq!(matches[0].parent_sha, "p0");
    }

    #[test]
    fn unrelated_issue_numbers_do_not_match() {
        let record = repo_record();
        let issues = vec![IssueRecord {
            repo: "o/r".into(),
            number: 7,
            state: "closed".into(),
            labels: vec!["bug".into()],
            title: "t".into(),
            body: String::new(),
            is_bug: true,
            is_security: false,
        }];
        let commits = vec![commit("aaa", &["p"], "Fix #8 and #9")];
        assert!(
            match_fix_commits(&record, &issues, &commits, &MiningCriteria::default())
                .unwrap()
                .is_empty()
        );
    }
}
