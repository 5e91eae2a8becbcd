//! Step 4: turning one bug-fixing commit into function pairs.

use std::collections::BTreeSet;

use crate::detect::{build_binding_index, detect_sites, PatternConfig};
use crate::source_model::{parse_unit_from_path, Language, SourceUnit};
use crate::taint::{cross_language_functions, propagate, DEFAULT_MAX_TRANSFERS, MODULE_SPAN_NAME};

use super::git::GitRepo;
use super::{CommitMatch, FunctionPair, MinerError, RepoRecord};

/// Extensions materialized from the parent snapshot to rebuild project
/// context: Java units feed the binding index, the native-side sources
/// carry build evidence.
const SNAPSHOT_EXTENSIONS: &[&str] = &[
    "java", "c", "cc", "cpp", "cxx", "h", "hpp", "hh", "hxx", "i", "swg",
];

/// Extracts buggy/clean pairs for one matched commit.
///
/// The parent-commit version of each changed `.py`/`.java` file is
/// analyzed against a binding index built from the parent snapshot (bug
/// state is judged on the pre-fix code). Every cross-language function
/// whose text differs between parent and fix becomes a pair; functions
/// absent at the parent (added) or at the fix (deleted) are discarded, as
/// is module-level code.
pub fn extract_pairs(
    repo: &RepoRecord,
    commit: &CommitMatch,
    clone: &GitRepo,
    patterns: &PatternConfig,
) -> Result<Vec<FunctionPair>, MinerError> {
    let changed: Vec<String> = clone
        .changed_files(&commit.parent_sha, &commit.sha)?
        .into_iter()
        .filter(|(status, path)| *status == 'M' && Language::from_path(path).is_some())
        .map(|(_, path)| path)
        .collect();
    if changed.is_empty() {
        return Ok(Vec::new());
    }

    // Rebuild project context at the parent snapshot.
    let snapshot = tempfile::tempdir().map_err(|e| MinerError::Io {
        path: "tempdir".into(),
        source: e,
    })?;
    clone.snapshot_sources(&commit.parent_sha, snapshot.path(), SNAPSHOT_EXTENSIONS)?;

    let mut context_units: Vec<SourceUnit> = Vec::new();
    for path in clone.list_files(&commit.parent_sha)? {
        if Language::from_path(&path) != Some(Language::Java) {
            continue;
        }
        if let Some(bytes) = clone.show_file(&commit.parent_sha, &path)? {
            if let Ok(unit) = parse_unit_from_path(&path, &bytes) {
                context_units.push(unit);
            }
        }
    }
    let index = build_binding_index(snapshot.path(), &context_units, patterns);

    let mut pairs = Vec::new();
    for file in changed {
        let Some(parent_bytes) = clone.show_file(&commit.parent_sha, &file)? else {
            log::warn!("{}: {} vanished at parent commit; skipped", repo.full_name, file);
            continue;
        };
        let Some(fix_bytes) = clone.show_file(&commit.sha, &file)? else {
            log::warn!("{}: {} vanished at fix commit; skipped", repo.full_name, file);
            continue;
        };
        let Ok(parent_unit) = parse_unit_from_path(&file, &parent_bytes) else {
            continue;
        };
        let Ok(fix_unit) = parse_unit_from_path(&file, &fix_bytes) else {
            continue;
        };

        let sites = detect_sites(&parent_unit, &index, patterns);
        if sites.is_empty() {
            continue;
        }
        let marks = match propagate(&parent_unit, &sites, DEFAULT_MAX_TRANSFERS) {
            Ok(marks) => marks,
            Err(e) => {
                log::warn!("{}: {} taint pass failed: {e}", repo.full_name, file);
                continue;
            }
        };

        for span in cross_language_functions(&parent_unit, &marks) {
            if span.qualified_name == MODULE_SPAN_NAME {
                continue; // only functions form pairs
            }
            let Some(fix_span) = fix_unit
                .functions
                .iter()
                .find(|f| f.qualified_name == span.qualified_name)
            else {
                continue; // deleted by the fix
            };
            if fix_span.body_text == span.body_text {
                continue; // untouched by this commit
            }
            let mechanisms: BTreeSet<_> = marks
                .iter()
                .filter(|m| span.contains_line(m.line))
                .map(|m| m.origin.mechanism)
                .collect();
            if mechanisms.is_empty() {
                continue;
            }
            pairs.push(FunctionPair {
                pair_id: FunctionPair::make_id(
                    &repo.full_name,
                    &commit.sha,
                    &file,
                    &span.qualified_name,
                ),
                repo: repo.full_name.clone(),
                sha: commit.sha.clone(),
                parent_sha: commit.parent_sha.clone(),
                file: file.clone(),
                language: parent_unit.language,
                qualified_name: span.qualified_name.clone(),
                mechanisms,
                buggy_code: span.body_text.clone(),
                clean_code: fix_span.body_text.clone(),
                is_security: commit.is_security,
            });
        }
    }

    pairs.sort_by(|a, b| (&a.file, &a.qualified_name).cmp(&(&b.file, &b.qualified_name)));
    Ok(pairs)
}
