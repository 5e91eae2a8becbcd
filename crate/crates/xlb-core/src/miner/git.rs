//! Thin wrapper over the system `git` executable.

use std::path::{Path, PathBuf};
use std::process::Command;

use super::MinerError;

pub struct GitRepo {
    dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub sha: String,
    pub parents: Vec<String>,
    pub title: String,
}

impl GitRepo {
    pub fn open(dir: &Path) -> GitRepo {
        GitRepo { dir: dir.to_path_buf() }
    }

    /// Clones `url` into `dest` unless a repository is already there.
    pub fn ensure_clone(url: &str, dest: &Path) -> Result<GitRepo, MinerError> {
        if dest.join(".git").exists() {
            return Ok(GitRepo::open(dest));
        }
        if let Some(parent) = dest.parent() {
            std::fs::create_dir_all(parent).map_err(|e| MinerError::Io {
                path: parent.display().to_string(),
                source: e,
            })?;
        }
        let output = Command::new("git")
            .arg("clone")
            .arg("--quiet")
            .arg(url)
            .arg(dest)
            .output()
            .map_err(|e| MinerError::Git {
                action: "clone".into(),
                detail: e.to_string(),
            })?;
        if !output.status.success() {
            return Err(MinerError::Git {
                action: "clone".into(),
                detail: String::from_utf8_lossy(&output.stderr).trim().to_string(),
            });
        }
        Ok(GitRepo::open(dest))
    }

    fn run(&self, args: &[&str]) -> Result<Vec<u8>, MinerError> {
        let output = Command::new("git")
            .arg("-C")
            .arg(&self.dir)
            .args(args)
            .output()
            .map_err(|e| MinerError::Git {
                action: args.first().unwrap_or(&"?").to_string(),
                detail: e.to_string(),
            })?;
        if !output.status.success() {
            return Err(MinerError::Git {
                action: args.join(" "),
                detail: String::from_utf8_lossy(&output.stderr).trim().to_string(),
            });
        }
        Ok(output.stdout)
    }

    /// All commits reachable from HEAD: sha, parent shas, title line.
    pub fn log(&self) -> Result<Vec<LogEntry>, MinerError> {
        let out = self.run(&["log", "--format=%H%x1f%P%x1f%s"])?;
        let text = String::from_utf8_lossy(&out);
        Ok(text
            .lines()
            .filter_map(|line| {
                let mut fields = line.split('\x1f');
                let sha = fields.next()?.trim().to_string();
                let parents: Vec<String> = fields
                    .next()?
                    .split_whitespace()
                    .map(|s| s.to_string())
                    .collect();
                let title = fields.next().unwrap_or("").to_string();
                (!sha.is_empty()).then_some(LogEntry { sha, parents, title })
            })
            .collect())
    }

    /// Changed files between `parent` and `sha`, as (status, path), with
    /// rename detection off so renames surface as delete+add.
    pub fn changed_files(
        &self,
        parent: &str,
        sha: &str,
    ) -> Result<Vec<(char, String)>, MinerError> {
        let out = self.run(&["diff", "--name-status", "--no-renames", parent, sha])?;
        let text = String::from_utf8_lossy(&out);
        Ok(text
            .lines()
            .filter_map(|line| {
                let mut parts = line.split('\t');
                let status = parts.next()?.chars().next()?;
                let path = parts.next()?.to_string();
                Some((status, path))
            })
            .collect())
    }

    /// File content at a commit, or `None` when absent there.
    pub fn show_file(&self, sha: &str, path: &str) -> Result<Option<Vec<u8>>, MinerError> {
        match self.run(&["show", &format!("{sha}:{path}")]) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(MinerError::Git { detail, .. })
                if detail.contains("does not exist")
                    || detail.contains("exists on disk, but not in") =>
            {
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    /// Paths of all files at a commit.
    pub fn list_files(&self, sha: &str) -> Result<Vec<String>, MinerError> {
        let out = self.run(&["ls-tree", "-r", "--name-only", sha])?;
        Ok(String::from_utf8_lossy(&out)
            .lines()
            .map(|l| l.to_string())
            .collect())
    }

    /// Materializes the files of a commit matching `extensions` under
    /// `dest`, preserving relative paths. Used to rebuild project context
    /// (binding evidence, Java units) at a parent snapshot.
    pub fn snapshot_sources(
        &self,
        sha: &str,
        dest: &Path,
        extensions: &[&str],
    ) -> Result<Vec<String>, MinerError> {
        let mut written = Vec::new();
        for path in self.list_files(sha)? {
            let matches = Path::new(&path)
                .extension()
                .and_then(|e| e.to_str())
                .map(|e| extensions.contains(&e.to_ascii_lowercase().as_str()))
                .unwrap_or(false);
            if !matches {
                continue;
            }
            let Some(content) = self.show_file(sha, &path)? else {
                continue;
            };
            let target = dest.join(&path);
            if let Some(parent) = target.parent() {
                std::fs::create_dir_all(parent).map_err(|e| MinerError::Io {
                    path: parent.display().to_string(),
                    source: e,
                })?;
            }
            std::fs::write(&target, content).map_err(|e| MinerError::Io {
                path: target.display().to_string(),
                source: e,
            })?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::process::Command;

    fn sh(dir: &Path, args: &[&str]) {
        let status = Command::new(args[0])
            .args(&args[1..])
            .current_dir(dir)
            .env("GIT_AUTHOR_NAME", "t")
            .env("GIT_AUTHOR_EMAIL", "t@example.com")
            .env("GIT_COMMITTER_NAME", "t")
            .env("GIT_COMMITTER_EMAIL", "t@example.com")
            .status()
            .unwrap();
        assert!(status.success(), "{args:?}");
    }

    #[test]
    fn log_diff_and_show_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        sh(dir, &["git", "init", "-q", "-b", "master"]);
        std::fs::write(dir.join("a.py"), "x = 1\n").unwrap();
        sh(dir, &["git", "add", "."]);
        sh(dir, &["git", "commit", "-q", "-m", "base"]);
        std::fs::write(dir.join("a.py"), "x = 2\n").unwrap();
        sh(dir, &["git", "add", "."]);
        sh(dir, &["git", "commit", "-q", "-m", "Fix wrong value (#1)"]);

        let repo = GitRepo::open(dir);
        let log = repo.log().unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(log[0].title, "Fix wrong value (#1)");
        assert_eq!(log[0].parents.len(), 1);
        assert!(log[1].parents.is_empty());

        let changed = repo.changed_files(&log[1].sha, &log[0].sha).unwrap();
        assert_eq!(changed, vec![('M', "a.py".to_string())]);

        let old = repo.show_file(&log[1].sha, "a.py").unwrap().unwrap();
        assert_eq!(old, b"x = 1\n");
        assert_eq!(repo.show_file(&log[0].sha, "missing.py").unwrap(), None);
    }
}
