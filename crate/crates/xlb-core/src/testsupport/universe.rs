//! Scripted git fixture universe for offline pipeline runs.
//!
//! Builds two synthetic repositories with fixed authors and dates (so
//! commit hashes are stable across rebuilds), plus a `universe.json`
//! manifest with repository metadata and issues:
//!
//! - `fixture/alpha`, Python + ctypes: one commit fixing a cross-language
//!   function, one fixing a second one, one only adding a brand-new
//!   cross-language function, one fixing a plain Python function, and a
//!   merge commit referencing a bug issue.
//! - `fixture/beta`, Java + JNI: one security-flagged commit fixing the
//!   cross-language `main`.
//!
//! Expected pipeline output over the whole universe: exactly three pairs.

use std::path::{Path, PathBuf};
use std::process::Command;

const FETCH_V1: &str = "def fetch(count):\n    raw = lib.read_values(count)\n    total = raw + count\n    return total";
const FETCH_V2: &str = "def fetch(count):\n    raw = lib.read_values(count)\n    total = (raw or 0) + count\n    return total";
const PARSE_V1: &str = "def parse(text):\n    buf = lib.parse_text(text)\n    out = buf\n    return out";
const PARSE_V2: &str = "def parse(text):\n    buf = lib.parse_text(text)\n    out = buf if buf else 0\n    return out";
const WRITER: &str = "def writer(data):\n    handle = lib.open_sink()\n    lib.write_all(handle, data)\n    return handle";

const HELPERS_V1: &str = "def scale(x):\n    return x * 2\n\n\ndef shift(x):\n    return x + 1\n";
const HELPERS_V2: &str = "def scale(x):\n    return x * 2.0\n\n\ndef shift(x):\n    return x + 1\n";

const NATIVE_METHOD: &str = "public class NativeMethod {\n    public native int getValue();\n\n    static {\n        System.loadLibrary(\"nativeMethod\");\n    }\n}\n";
const CALLER_V1: &str = "public class NativeCaller {\n    public static void main(String[] args) {\n        NativeMethod nativeMethod = new NativeMethod();\n        int var_a = nativeMethod.getValue();\n        int var_b = var_a * 2;\n        System.out.println(var_b);\n    }\n}\n";
const CALLER_V2: &str = "public class NativeCaller {\n    public static void main(String[] args) {\n        NativeMethod nativeMethod = new NativeMethod();\n        int var_a = nativeMethod.getValue();\n        int var_b = var_a > 0 ? var_a * 2 : 0;\n        System.out.println(var_b);\n    }\n}\n";

// Function spans cover whole source lines, so the extracted text carries
// the original indentation.
const MAIN_V1: &str = "    public static void main(String[] args) {\n        NativeMethod nativeMethod = new NativeMethod();\n        int var_a = nativeMethod.getValue();\n        int var_b = var_a * 2;\n        System.out.println(var_b);\n    }";
const MAIN_V2: &str = "    public static void main(String[] args) {\n        NativeMethod nativeMethod = new NativeMethod();\n        int var_a = nativeMethod.getValue();\n        int var_b = var_a > 0 ? var_a * 2 : 0;\n        System.out.println(var_b);\n    }";

fn demo_py(fetch: &str, parse: &str, writer: Option<&str>) -> String {
    let mut text = format!(
        "import ctypes\n\nlib = ctypes.CDLL(\"libdemo.so\")\n\n\n{fetch}\n\n\n{parse}\n"
    );
    if let Some(w) = writer {
        text.push_str(&format!("\n\n{w}\n"));
    }
    text
}

/// One pair the pipeline must produce, with the exact code of both sides.
#[derive(Debug, Clone)]
pub struct ExpectedPair {
    pub repo: &'static str,
    pub file: &'static str,
    pub qualified_name: &'static str,
    pub buggy_code: &'static str,
    pub clean_code: &'static str,
    pub is_security: bool,
}

pub struct BuiltUniverse {
    pub root: PathBuf,
    pub expected: Vec<ExpectedPair>,
}

/// Scripts the whole universe under `root` and returns the expected pairs.
pub fn build_fixture_universe(root: &Path) -> std::io::Result<BuiltUniverse> {
    std::fs::create_dir_all(root)?;
    build_alpha(&root.join("alpha"))?;
    build_beta(&root.join("beta"))?;

    let manifest = serde_json::json!({
        "repos": [
            {
                "full_name": "fixture/alpha",
                "stars": 800,
                "language_bytes": { "Python": 60000, "C": 40000 },
                "default_branch": "master",
                "description": "synthetic ctypes project",
                "path": "alpha",
                "issues": [
                    { "number": 1, "state": "closed", "labels": ["bug"],
                      "title": "crash in fetch", "body": "segfault when count is zero" },
                    { "number": 2, "state": "closed", "labels": [],
                      "title": "parse output wrong", "body": "empty buffers mishandled" },
                    { "number": 3, "state": "closed", "labels": ["bug"],
                      "title": "memory leak in writer", "body": "sink never released" },
                    { "number": 4, "state": "closed", "labels": ["bug"],
                      "title": "scaling broken", "body": "integer overflow in scale" },
                    { "number": 5, "state": "open", "labels": ["bug"],
                      "title": "fix crash on shutdown", "body": "still open" }
                ]
            },
            {
                "full_name": "fixture/beta",
                "stars": 1200,
                "language_bytes": { "Java": 52000, "C": 48000 },
                "default_branch": "master",
                "description": "synthetic jni project",
                "path": "beta",
                "issues": [
                    { "number": 10, "state": "closed", "labels": ["bug", "security"],
                      "title": "segfault in native value handling",
                      "body": "buffer overflow reachable from main" }
                ]
            },
            {
                "full_name": "fixture/tiny",
                "stars": 120,
                "language_bytes": { "Python": 90000, "C": 10000 },
                "default_branch": "master",
                "description": "below the star floor; never mined",
                "path": "alpha",
                "issues": []
            }
        ]
    });
    std::fs::write(
        root.join("universe.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;

    Ok(BuiltUniverse {
        root: root.to_path_buf(),
        expected: vec![
            ExpectedPair {
                repo: "fixture/alpha",
                file: "demo.py",
                qualified_name: "fetch",
                buggy_code: FETCH_V1,
                clean_code: FETCH_V2,
                is_security: false,
            },
            ExpectedPair {
                repo: "fixture/alpha",
                file: "demo.py",
                qualified_name: "parse",
                buggy_code: PARSE_V1,
                clean_code: PARSE_V2,
                is_security: false,
            },
            ExpectedPair {
                repo: "fixture/beta",
                file: "NativeCaller.java",
                qualified_name: "NativeCaller.main",
                buggy_code: MAIN_V1,
                clean_code: MAIN_V2,
                is_security: true,
            },
        ],
    })
}

struct Scripter {
    dir: PathBuf,
    tick: u64,
}

impl Scripter {
    fn new(dir: &Path) -> std::io::Result<Scripter> {
        std::fs::create_dir_all(dir)?;
        let mut s = Scripter {
            dir: dir.to_path_buf(),
            tick: 0,
        };
        s.git(&["init", "-q", "-b", "master"])?;
        Ok(s)
    }

    fn git(&mut self, args: &[&str]) -> std::io::Result<()> {
        self.tick += 1;
        let date = format!("2024-01-01T00:{:02}:00 +0000", self.tick.min(59));
        let output = Command::new("git")
            .arg("-C")
            .arg(&self.dir)
            .args(args)
            .env("GIT_AUTHOR_NAME", "fixture")
            .env("GIT_AUTHOR_EMAIL", "fixture@example.invalid")
            .env("GIT_COMMITTER_NAME", "fixture")
            .env("GIT_COMMITTER_EMAIL", "fixture@example.invalid")
            .env("GIT_AUTHOR_DATE", &date)
            .env("GIT_COMMITTER_DATE", &date)
            .output()?;
        if !output.status.success() {
            return Err(std::io::Error::other(format!(
                "git {args:?} failed: {}",
                String::from_utf8_lossy(&output.stderr)
            )));
        }
        Ok(())
    }

    fn write(&self, name: &str, content: &str) -> std::io::Result<()> {
        std::fs::write(self.dir.join(name), content)
    }

    fn commit(&mut self, message: &str) -> std::io::Result<()> {
        self.git(&["add", "-A"])?;
        self.git(&["commit", "-q", "-m", message])
    }
}

fn build_alpha(dir: &Path) -> std::io::Result<()> {
    if dir.join(".git").exists() {
        return Ok(()); // already scripted
    }
    let mut repo = Scripter::new(dir)?;

    repo.write("demo.py", &demo_py(FETCH_V1, PARSE_V1, None))?;
    repo.write("helpers.py", HELPERS_V1)?;
    repo.write("README.md", "synthetic ctypes fixture\n")?;
    repo.commit("Initial import")?;

    repo.write("demo.py", &demo_py(FETCH_V2, PARSE_V1, None))?;
    repo.commit("Fix crash in native fetch (#1)")?;

    // A merge commit that references a bug issue: must be skipped.
    repo.git(&["checkout", "-q", "-b", "side"])?;
    repo.write("side.py", "note = 'side work'\n")?;
    repo.commit("Side work")?;
    repo.git(&["checkout", "-q", "master"])?;
    repo.git(&["merge", "-q", "--no-ff", "side", "-m", "Merge side work for #1"])?;

    repo.write("demo.py", &demo_py(FETCH_V2, PARSE_V2, None))?;
    repo.commit("Fix wrong parse output (#2)")?;

    // Only adds a brand-new cross-language function: no prior version.
    repo.write("demo.py", &demo_py(FETCH_V2, PARSE_V2, Some(WRITER)))?;
    repo.commit("Fix leak in writer (#3)")?;

    // Fixes a function with no cross-language marks.
    repo.write("helpers.py", HELPERS_V2)?;
    repo.commit("Fix broken scaling (#4)")?;
    Ok(())
}

fn build_beta(dir: &Path) -> std::io::Result<()> {
    if dir.join(".git").exists() {
        return Ok(());
    }
    let mut repo = Scripter::new(dir)?;

    repo.write("NativeMethod.java", NATIVE_METHOD)?;
    repo.write("NativeCaller.java", CALLER_V1)?;
    repo.commit("Initial import")?;

    repo.write("NativeCaller.java", CALLER_V2)?;
    repo.commit("Fix segfault in native value handling (#10)")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn universe_builds_and_is_stable_across_rebuilds() {
        let tmp = tempfile::tempdir().unwrap();
        let built = build_fixture_universe(tmp.path()).unwrap();
        assert!(built.root.join("universe.json").exists());
        assert!(built.root.join("alpha/.git").exists());
        assert!(built.root.join("beta/.git").exists());
        assert_eq!(built.expected.len(), 3);

        // Second build over the same directory is a no-op.
        let again = build_fixture_universe(tmp.path()).unwrap();
        assert_eq!(again.expected.len(), 3);
    }
}
