//! GitHub REST client with disk caching and a rate-limit-aware gate.
//!
//! Every response is cached under `<state_dir>/http_cache/` keyed by URL,
//! which makes reruns resumable and offline once the data is fetched. All
//! requests flow through one gate that honors server-reported quota resets:
//! the first rate-limit response sleeps until the reported reset (bounded),
//! a second consecutive one surfaces as [`MinerError::RateLimited`].

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use serde_json::Value;
use sha2::{Digest, Sha256};

use super::api::{RawCommit, RawIssue, RawRepo, RepoApi};
use super::{MinerError, MiningCriteria};

/// Environment variable holding the API token.
pub const TOKEN_ENV: &str = "XLB_GITHUB_TOKEN";

/// Search pagination stops after this many pages per query (the search API
/// caps results anyway).
const MAX_SEARCH_PAGES: u32 = 10;
/// Longest voluntary sleep before surfacing the rate limit to the caller.
const MAX_BACKOFF: Duration = Duration::from_secs(120);

pub struct GithubApi {
    agent: ureq::Agent,
    token: String,
    base: String,
    cache_dir: Option<PathBuf>,
    gate: Mutex<()>,
}

impl GithubApi {
    /// Builds a client from [`TOKEN_ENV`]; responses are cached under
    /// `state_dir/http_cache` when a state directory is given.
    pub fn from_env(state_dir: Option<&std::path::Path>) -> Result<GithubApi, MinerError> {
        let token = std::env::var(TOKEN_ENV)
            .map_err(|_| MinerError::ApiAuth(format!("{TOKEN_ENV} is not set")))?;
        Ok(GithubApi::new(
            "https://api.github.com",
            token,
            state_dir.map(|d| d.join("http_cache")),
        ))
    }

    pub fn new(base: &str, token: String, cache_dir: Option<PathBuf>) -> GithubApi {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        GithubApi {
            agent,
            token,
            base: base.trim_end_matches('/').to_string(),
            cache_dir,
            gate: Mutex::new(()),
        }
    }

    fn cache_path(&self, url: &str) -> Option<PathBuf> {
        let dir = self.cache_dir.as_ref()?;
        let mut hasher = Sha256::new();
        hasher.update(url.as_bytes());
        Some(dir.join(format!("{}.json", hex::encode(&hasher.finalize()[..16]))))
    }

    fn get_json(&self, url: &str) -> Result<Value, MinerError> {
        if let Some(path) = self.cache_path(url) {
            if let Ok(text) = std::fs::read_to_string(&path) {
                if let Ok(value) = serde_json::from_str(&text) {
                    return Ok(value);
                }
            }
        }

        let _gate = self.gate.lock().unwrap();
        let mut slept = false;
        loop {
            let response = self
                .agent
                .get(url)
                .header("Authorization", &format!("Bearer {}", self.token))
                .header("Accept", "application/vnd.github+json")
                .header("User-Agent", "xlb-miner")
                .header("X-GitHub-Api-Version", "2022-11-28")
                .call();
            let mut response = match response {
                Ok(r) => r,
                Err(e) => return Err(MinerError::ApiUnavailable(e.to_string())),
            };
            let status = response.status().as_u16();

            if status == 401 {
                return Err(MinerError::ApiAuth("token rejected (401)".into()));
            }
            if status == 403 || status == 429 {
                let retry_after_secs = retry_after(&response).unwrap_or(60);
                if rate_limited(&response) {
                    if !slept {
                        let wait = Duration::from_secs(retry_after_secs).min(MAX_BACKOFF);
                        log::warn!("rate limited; sleeping {}s", wait.as_secs());
                        std::thread::sleep(wait);
                        slept = true;
                        continue;
                    }
                    return Err(MinerError::RateLimited { retry_after_secs });
                }
                return Err(MinerError::ApiAuth(format!("forbidden (403): {url}")));
            }
            if status >= 500 {
                return Err(MinerError::ApiUnavailable(format!("{status} from {url}")));
            }
            if status != 200 {
                return Err(MinerError::ApiUnavailable(format!("{status} from {url}")));
            }

            let text = response
                .body_mut()
                .read_to_string()
                .map_err(|e| MinerError::ApiUnavailable(e.to_string()))?;
            let value: Value = serde_json::from_str(&text)
                .map_err(|e| MinerError::ApiUnavailable(format!("malformed response: {e}")))?;
            if let Some(path) = self.cache_path(url) {
                if let Some(parent) = path.parent() {
                    let _ = std::fs::create_dir_all(parent);
                }
                let tmp = path.with_extension("tmp");
                if std::fs::write(&tmp, &text).is_ok() {
                    let _ = std::fs::rename(&tmp, &path);
                }
            }
            return Ok(value);
        }
    }

    fn paginate(&self, path_and_query: &str) -> Result<Vec<Value>, MinerError> {
        let mut items = Vec::new();
        let sep = if path_and_query.contains('?') { '&' } else { '?' };
        for page in 1..=1000u32 {
            let url = format!("{}{path_and_query}{sep}per_page=100&page={page}", self.base);
            let value = self.get_json(&url)?;
            let batch = value.as_array().cloned().unwrap_or_default();
            let len = batch.len();
            items.extend(batch);
            if len < 100 {
                break;
            }
        }
        Ok(items)
    }
}

fn header_u64(response: &ureq::http::Response<ureq::Body>, name: &str) -> Option<u64> {
    response
        .headers()
        .get(name)?
        .to_str()
        .ok()?
        .trim()
        .parse()
        .ok()
}

fn rate_limited(response: &ureq::http::Response<ureq::Body>) -> bool {
    header_u64(response, "x-ratelimit-remaining") == Some(0)
        || response.headers().contains_key("retry-after")
}

fn retry_after(response: &ureq::http::Response<ureq::Body>) -> Option<u64> {
    if let Some(secs) = header_u64(response, "retry-after") {
        return Some(secs);
    }
    let reset = header_u64(response, "x-ratelimit-reset")?;
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .ok()?
        .as_secs();
    Some(reset.saturating_sub(now).max(1))
}

/// Parses one `/search/repositories` item into a candidate (without the
/// language byte breakdown, fetched separately).
fn parse_search_item(item: &Value) -> Option<RawRepo> {
    Some(RawRepo {
        full_name: item.get("full_name")?.as_str()?.to_string(),
        stars: item.get("stargazers_count")?.as_u64()?,
        language_bytes: BTreeMap::new(),
        default_branch: item
            .get("default_branch")
            .and_then(Value::as_str)
            .unwrap_or("main")
            .to_string(),
        description: item
            .get("description")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string(),
        clone_url: item
            .get("clone_url")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string(),
    })
}

fn parse_languages(value: &Value) -> BTreeMap<String, u64> {
    value
        .as_object()
        .map(|m| {
            m.iter()
                .filter_map(|(k, v)| v.as_u64().map(|b| (k.clone(), b)))
                .collect()
        })
        .unwrap_or_default()
}

fn parse_issue(item: &Value) -> Option<RawIssue> {
    Some(RawIssue {
        number: item.get("number")?.as_u64()?,
        state: item
            .get("state")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string(),
        labels: item
            .get("labels")
            .and_then(Value::as_array)
            .map(|ls| {
                ls.iter()
                    .filter_map(|l| l.get("name").and_then(Value::as_str))
                    .map(|s| s.to_string())
                    .collect()
            })
            .unwrap_or_default(),
        title: item
            .get("title")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string(),
        body: item
            .get("body")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string(),
        is_pull_request: item.get("pull_request").is_some(),
    })
}

fn parse_commit(item: &Value) -> Option<RawCommit> {
    let message = item
        .get("commit")
        .and_then(|c| c.get("message"))
        .and_then(Value::as_str)
        .unwrap_or_default();
    Some(RawCommit {
        sha: item.get("sha")?.as_str()?.to_string(),
        parents: item
            .get("parents")
            .and_then(Value::as_array)
            .map(|ps| {
                ps.iter()
                    .filter_map(|p| p.get("sha").and_then(Value::as_str))
                    .map(|s| s.to_string())
                    .collect()
            })
            .unwrap_or_default(),
        title: message.lines().next().unwrap_or_default().to_string(),
    })
}

impl RepoApi for GithubApi {
    /// Searches per host language (Python, Java) above the star floor, then
    /// fetches each hit's language byte breakdown.
    fn candidate_repositories(
        &self,
        criteria: &MiningCriteria,
    ) -> Result<Vec<RawRepo>, MinerError> {
        let mut host_languages: Vec<&str> = Vec::new();
        for pair in &criteria.language_pairs {
            let host = pair.sides().0[0];
            if !host_languages.contains(&host) {
                host_languages.push(host);
            }
        }

        let mut seen = BTreeMap::new();
        for language in host_languages {
            for page in 1..=MAX_SEARCH_PAGES {
                let url = format!(
                    "{}/search/repositories?q=language:{language}+stars:>={}&sort=stars&order=desc&per_page=100&page={page}",
                    self.base, criteria.min_stars
                );
                let value = self.get_json(&url)?;
                let items = value
                    .get("items")
                    .and_then(Value::as_array)
                    .cloned()
                    .unwrap_or_default();
                let count = items.len();
                for item in &items {
                    if let Some(repo) = parse_search_item(item) {
                        seen.entry(repo.full_name.clone()).or_insert(repo);
                    }
                }
                if count < 100 {
                    break;
                }
            }
        }

        let mut repos: Vec<RawRepo> = Vec::with_capacity(seen.len());
        for (_, mut repo) in seen {
            let url = format!("{}/repos/{}/languages", self.base, repo.full_name);
            repo.language_bytes = parse_languages(&self.get_json(&url)?);
            repos.push(repo);
        }
        Ok(repos)
    }

    fn issues(&self, full_name: &str) -> Result<Vec<RawIssue>, MinerError> {
        let items = self.paginate(&format!("/repos/{full_name}/issues?state=closed"))?;
        Ok(items.iter().filter_map(parse_issue).collect())
    }

    fn commits(&self, full_name: &str) -> Result<Vec<RawCommit>, MinerError>  {
        let items = self.paginate(&format!("/repos/{full_name}/commits"))?;
        Ok(items.iter().filter_map(parse_commit).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn search_item_parsing() {
        let item: Value = serde_json::json!({
            "full_name": "octo/demo",
            "stargazers_count": 1234,
            "default_branch": "main",
            "description": "a demo",
            "clone_url": "https://example.invalid/octo/demo.git"
        });
        let repo = parse_search_item(&item).unwrap();
        assert_eq!(repo.full_name, "octo/demo");
        assert_eq!(repo.stars, 1234);
        assert_eq!(repo.description, "a demo");
    }

    #[test]
    fn issue_parsing_flags_pull_requests() {
        let issue: Value = serde_json::json!({
            "number": 5,
            "state": "closed",
            "labels": [{"name": "bug"}, {"name": "p1"}],
            "title": "crash",
            "body": null,
            "pull_request": {"url": "x"}
        });
        let parsed = parse_issue(&issue).unwrap();
        assert!(parsed.is_pull_request);
        assert_eq!(parsed.labels, vec!["bug", "p1"]);
        assert_eq!(parsed.body, "");
    }

    #[test]
    fn commit_parsing_takes_title_line_and_parents() {
        let commit: Value = serde_json::json!({
            "sha": "abc",
            "parents": [{"sha": "p1"}, {"sha": "p2"}],
            "commit": {"message": "Fix crash (#7)\n\nLong body."}
        });
        let parsed = parse_commit(&commit).unwrap();
        assert_eq!(parsed.title, "Fix crash (#7)");
        assert_eq!(parsed.parents, vec!["p1", "p2"]);
    }

    #[test]
    fn language_map_parsing() {
        let value: Value = serde_json::json!({"Python": 1000, "C": 500});
        let map = parse_languages(&value);
        assert_eq!(map["Python"], 1000);
        assert_eq!(map["C"], 500);
    }

    #[test]
    fn missing_token_is_an_auth_error() {
        // Isolated from real env: use a name that cannot be set here.
        std::env::remove_var(TOKEN_ENV);
        assert!(matches!(
            GithubApi::from_env(None),
            Err(MinerError::ApiAuth(_))
        ));
    }
}
