//! Transfer-bounded propagation of cross-language provenance.
//!
//! A value received from a cross-language call stays interesting for a
//! bounded number of variable-to-variable transfers (three by default):
//! the receiving variable sits at depth 1, a variable assigned from it at
//! depth 2, and so on. Once a value has crossed the bound, a fault in its
//! further handling is attributed to intra-language logic, so lines past
//! the bound are not marked.
//!
//! The scan is forward, flow-sensitive, and intraprocedural: statements are
//! grouped by their innermost containing function (module-level code forms
//! its own group) and walked once in source order. There is no fixpoint
//! iteration over loops and no alias or field sensitivity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::CrossLangSite;
use crate::source_model::{function_at, FunctionSpan, SourceUnit};

/// Transfer bound used throughout: `var_a` → `var_b` → `var_c`.
pub const DEFAULT_MAX_TRANSFERS: u8 = 3;

/// Synthetic span name housing marks outside any function.
pub const MODULE_SPAN_NAME: &str = "<module>";

#[derive(Debug, Error)]
pub enum TaintError {
    #[error("site {file}:{line} does not belong to unit {unit}")]
    SiteNotInUnit {
        file: String,
        line: usize,
        unit: String,
    },
}

/// One marked cross-language code line.
///
/// Depth 0 marks sit exactly on the lines containing a site's call or load;
/// a depth k ≥ 1 mark is the k-th transfer of the received value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaintMark {
    pub file: String,
    pub line: usize,
    pub depth: u8,
    pub origin: CrossLangSite,
    /// Variable defined or used on this line, when the mark is about one.
    pub var: Option<String>,
}

/// Per-variable taint inside one function scan. Reassignment replaces any
/// prior entry for the variable.
#[derive(Debug, Clone, Default)]
struct TaintState {
    entries: BTreeMap<String, (u8, usize)>, // var -> (depth, site index)
}

impl TaintState {
    fn get(&self, var: &str) -> Option<(u8, usize)> {
        self.entries.get(var).copied()
    }

    fn kill(&mut self, var: &str) {
        self.entries.remove(var);
    }

    fn set(&mut self, var: &str, depth: u8, site: usize) {
        self.entries.insert(var.to_string(), (depth, site));
    }
}

/// Smallest-depth candidate accumulator; earlier sites win ties.
#[derive(Default)]
struct MinDepth(Option<(u8, usize)>);

impl MinDepth {
    fn consider(&mut self, depth: u8, site: usize) {
        if self.0.is_none_or(|(d, _)| depth < d) {
            self.0 = Some((depth, site));
        }
    }

    fn get(&self) -> Option<(u8, usize)> {
        self.0
    }
}

/// Marks every cross-language code line of `unit` reachable from `sites`
/// within `max_transfers` variable transfers.
///
/// Rules, applied per statement in source order within each function:
/// every site line is marked at depth 0; an assignment receiving a site
/// call taints its targets at depth 1; an assignment reading a variable at
/// depth d below the bound taints its targets at d+1 (minimum over all
/// tainted reads); an assignment reading only bound-depth variables taints
/// nothing and is not marked; a non-defining statement reading a tainted
/// variable is marked at that variable's depth; reassignment from an
/// untainted right side kills. A call to a local function whose return
/// value is tainted counts as reading a variable at the return's depth.
pub fn propagate(
    unit: &SourceUnit,
    sites: &[CrossLangSite],
    max_transfers: u8,
) -> Result<Vec<TaintMark>, TaintError> {
    let max_transfers = max_transfers.max(1);
    for site in sites {
        if site.file != unit.path {
            return Err(TaintError::SiteNotInUnit {
                file: site.file.clone(),
                line: site.line,
                unit: unit.path.clone(),
            });
        }
    }

    let mut site_lines: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (idx, site) in sites.iter().enumerate() {
        site_lines.entry(site.line).or_default().push(idx);
    }

    let mut marks: Vec<TaintMark> = Vec::new();
    for site in sites {
        marks.push(TaintMark {
            file: unit.path.clone(),
            line: site.line,
            depth: 0,
            origin: site.clone(),
            var: None,
        });
    }

    // Statements run in file order; each innermost span (or the module
    // level) keeps its own variable state, so the scan stays
    // intraprocedural while a function's return taint becomes visible to
    // callers later in the file.
    let mut states: BTreeMap<Option<(usize, usize)>, TaintState> = BTreeMap::new();

    // Functions whose return value is tainted, by simple name. The stored
    // depth is the returned value's depth; 0 means the function returns the
    // raw result of a site call, so calling it is like making the call.
    let mut fn_returns: BTreeMap<String, (u8, usize)> = BTreeMap::new();

    {
        for stmt in &unit.statements {
            let span = function_at(unit, stmt.line);
            let span_key = span.map(|f| (f.start_line, f.end_line));
            let span_name = span.map(|f| f.name.clone());
            let state = states.entry(span_key).or_default();

            // Reads observe the state before this statement's own writes.
            let tainted_reads: Vec<(String, u8, usize)> = stmt
                .used_vars
                .iter()
                .filter_map(|v| state.get(v).map(|(d, s)| (v.clone(), d, s)))
                .collect();

            // Does this statement receive a site call? Matching is by line,
            // refined by callee when the statement records calls (synthetic
            // attribute-binding sites have no corresponding call node).
            let receives_site: Option<usize> = site_lines.get(&stmt.line).and_then(|idxs| {
                idxs.iter().copied().find(|&i| {
                    stmt.calls.is_empty()
                        || stmt
                            .calls
                            .iter()
                            .any(|c| c.callee == sites[i].call.callee && c.line == sites[i].line)
                })
            });

            let fn_read: Option<(u8, usize)> = stmt
                .calls
                .iter()
                .filter_map(|c| fn_returns.get(&c.callee).copied())
                .min();

            if !stmt.defined_vars.is_empty() {
                let mut candidate = MinDepth::default();
                if let Some(site) = receives_site {
                    candidate.consider(1, site);
                }
                for (_, depth, site) in &tainted_reads {
                    if *depth < max_transfers {
                        candidate.consider(depth + 1, *site);
                    }
                }
                if let Some((depth, site)) = fn_read {
                    if depth == 0 {
                        candidate.consider(1, site);
                    } else if depth < max_transfers {
                        candidate.consider(depth + 1, site);
                    }
                }

                for var in &stmt.defined_vars {
                    state.kill(var);
                }
                if let Some((depth, site)) = candidate.get() {
                    for var in &stmt.defined_vars {
                        state.set(var, depth, site);
                        marks.push(TaintMark {
                            file: unit.path.clone(),
                            line: stmt.line,
                            depth,
                            origin: sites[site].clone(),
                            var: Some(var.clone()),
                        });
                    }
                }
            } else {
                for (var, depth, site) in &tainted_reads {
                    marks.push(TaintMark {
                        file: unit.path.clone(),
                        line: stmt.line,
                        depth: *depth,
                        origin: sites[*site].clone(),
                        var: Some(var.clone()),
                    });
                }
                if let Some((depth, site)) = fn_read {
                    marks.push(TaintMark {
                        file: unit.path.clone(),
                        line: stmt.line,
                        depth: depth.max(1),
                        origin: sites[site].clone(),
                        var: None,
                    });
                }
            }

            if stmt.is_return {
                let mut return_taint = MinDepth::default();
                if let Some(site) = receives_site {
                    return_taint.consider(0, site);
                }
                for (_, depth, site) in &tainted_reads {
                    return_taint.consider(*depth, *site);
                }
                if let Some((depth, site)) = fn_read {
                    return_taint.consider(depth, site);
                }
                if let (Some(name), Some(ret)) = (&span_name, return_taint.get()) {
                    fn_returns
                        .entry(name.clone())
                        .and_modify(|prev| {
                            if ret.0 < prev.0 {
                                *prev = ret;
                            }
                        })
                        .or_insert(ret);
                }
            }
        }
    }

    marks.sort_by(|a, b| (a.line, a.depth, &a.var).cmp(&(b.line, b.depth, &b.var)));
    marks.dedup_by(|a, b| {
        a.line == b.line && a.depth == b.depth && a.var == b.var && a.origin == b.origin
    });
    Ok(marks)
}

/// The deduplicated set of innermost function spans containing at least one
/// mark, ordered by start line. Marks outside any function are housed under
/// a synthetic [`MODULE_SPAN_NAME`] span.
pub fn cross_language_functions(unit: &SourceUnit, marks: &[TaintMark]) -> Vec<FunctionSpan> {
    let mut spans: Vec<FunctionSpan> = Vec::new();
    let mut module_level = false;
    for mark in marks {
        match function_at(unit, mark.line) {
            Some(span) => {
                if !spans.iter().any(|s| {
                    s.qualified_name == span.qualified_name && s.start_line == span.start_line
                }) {
                    spans.push(span.clone());
                }
            }
            None => module_level = true,
        }
    }
    if module_level {
        spans.push(FunctionSpan {
            name: MODULE_SPAN_NAME.to_string(),
            qualified_name: MODULE_SPAN_NAME.to_string(),
            start_line: 1,
            end_line: unit.line_count().max(1),
            is_native_decl: false,
            body_text: String::new(),
        });
    }
    spans.sort_by_key(|s| (s.start_line, s.end_line));
    spans
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{build_binding_index, detect_sites, PatternConfig};
    use crate::source_model::{parse_unit, Language};

    fn analyze(
        path: &str,
        src: &str,
        extra_units: &[(&str, &str)],
    ) -> (SourceUnit, Vec<CrossLangSite>) {
        let language = Language::from_path(path).unwrap();
        let unit = parse_unit(path, src.as_bytes(), language).unwrap();
        let mut units = vec![unit.clone()];
        for (p, s) in extra_units {
            let l = Language::from_path(p).unwrap();
            units.push(parse_unit(p, s.as_bytes(), l).unwrap());
        }
        let tmp = tempfile::tempdir().unwrap();
        let cfg = PatternConfig::default();
        let index = build_binding_index(tmp.path(), &units, &cfg);
        let sites = detect_sites(&unit, &index, &cfg);
        (unit, sites)
    }

    const NATIVE_METHOD: &str = "public class NativeMethod {\n    public native int getValue();\n    static {\n        System.loadLibrary(\"nativeMethod\");\n    }\n}\n";

    // Lines: 4 var_a (site), 5 var_b, 6 var_c, 7 var_d.
    const CHAIN_CALLER: &str = "public class NativeCaller {\n    public static void main(String[] args) {\n        NativeMethod nativeMethod = new NativeMethod(); int x = 10; int var_c = 0;\n        int var_a = nativeMethod.getValue();\n        int var_b = x / var_a;\n        var_c = var_c + var_b;\n        int var_d = func(var_c);\n    }\n}\n";

    #[test]
    fn listing_chain_depths_match_the_worked_example() {
        let (unit, sites) = analyze(
            "NativeCaller.java",
            CHAIN_CALLER,
            &[("NativeMethod.java", NATIVE_METHOD)],
        );
        assert_eq!(sites.len(), 1);
        let marks = propagate(&unit, &sites, DEFAULT_MAX_TRANSFERS).unwrap();

        let lines_depths: Vec<(usize, u8)> = marks.iter().map(|m| (m.line, m.depth)).collect();
        assert!(lines_depths.contains(&(4, 0)), "site line at depth 0");
        assert!(lines_depths.contains(&(4, 1)), "var_a at depth 1");
        assert!(lines_depths.contains(&(5, 2)), "var_b at depth 2");
        assert!(lines_depths.contains(&(6, 3)), "var_c at depth 3");
        assert!(
            !lines_depths.iter().any(|(l, _)| *l == 7),
            "var_d line is not cross-language: {lines_depths:?}"
        );
    }

    #[test]
    fn no_sites_no_marks() {
        let (unit, _) = analyze("plain.py", "x = 1\ny = x\n", &[]);
        assert!(propagate(&unit, &[], DEFAULT_MAX_TRANSFERS)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn site_from_wrong_unit_is_rejected() {
        let (unit, _) = analyze("plain.py", "x = 1\n", &[]);
        let (_, other_sites) = analyze(
            "demo.py",
            "import ctypes\nlib = ctypes.CDLL(\"x.so\")\nlib.f()\n",
            &[],
        );
        let err = propagate(&unit, &other_sites, DEFAULT_MAX_TRANSFERS).unwrap_err();
        assert!(matches!(err, TaintError::SiteNotInUnit { .. }));
    }

    #[test]
    fn kill_stops_later_marks() {
        let src = "import ctypes\nlib = ctypes.CDLL(\"x.so\")\na = lib.f()\na = 5\nb = a + 1\nprint(b)\n";
        let (unit, sites) = analyze("k.py", src, &[]);
        let marks = propagate(&unit, &sites, DEFAULT_MAX_TRANSFERS).unwrap();
        assert!(
            !marks.iter().any(|m| m.line >= 4),
            "reassignment kills the chain: {marks:?}"
        );
    }

    #[test]
    fn pure_use_line_is_marked_at_read_depth() {
        let src = "import ctypes\nlib = ctypes.CDLL(\"x.so\")\na = lib.f()\nprint(a)\n";
        let (unit, sites) = analyze("u.py", src, &[]);
        let marks = propagate(&unit, &sites, DEFAULT_MAX_TRANSFERS).unwrap();
        assert!(marks.iter().any(|m| m.line == 4 && m.depth == 1));
    }

    #[test]
    fn tainted_function_return_counts_as_one_transfer() {
        let src = "import ctypes\nlib = ctypes.CDLL(\"x.so\")\n\ndef fetch():\n    raw = lib.get()\n    return raw\n\nval = fetch()\nnext_hop = val\nlast_hop = next_hop\nbeyond = last_hop\n";
        let (unit, sites) = analyze("f.py", src, &[]);
        let marks = propagate(&unit, &sites, DEFAULT_MAX_TRANSFERS).unwrap();
        // raw = 1; the return slot is one more holder, so val = 2,
        // next_hop = 3, and last_hop is past the bound.
        assert!(marks.iter().any(|m| m.line == 8 && m.depth == 2), "{marks:?}");
        assert!(marks.iter().any(|m| m.line == 9 && m.depth == 3));
        assert!(!marks.iter().any(|m| m.line >= 10));
    }

    #[test]
    fn depth_zero_exactly_on_site_lines() {
        let src = "import ctypes\nlib = ctypes.CDLL(\"x.so\")\na = lib.f()\nb = a\n";
        let (unit, sites) = analyze("z.py", src, &[]);
        let marks = propagate(&unit, &sites, DEFAULT_MAX_TRANSFERS).unwrap();
        let site_lines: std::collections::BTreeSet<usize> =
            sites.iter().map(|s| s.line).collect();
        for m in &marks {
            if m.depth == 0 {
                assert!(site_lines.contains(&m.line));
            }
        }
        for l in &site_lines {
            assert!(marks.iter().any(|m| m.line == *l && m.depth == 0));
        }
    }

    #[test]
    fn functions_containing_marks_are_returned_once() {
        let src = "import ctypes\nlib = ctypes.CDLL(\"x.so\")\n\ndef hot():\n    a = lib.f()\n    return a\n\ndef cold():\n    return 1\n\ndef warm():\n    b = lib.g()\n    return b\n";
        let (unit, sites) = analyze("m.py", src, &[]);
        let marks = propagate(&unit, &sites, DEFAULT_MAX_TRANSFERS).unwrap();
        let spans = cross_language_functions(&unit, &marks);
        let names: Vec<&str> = spans.iter().map(|s| s.name.as_str()).collect();
        // The module-level load line plus the two functions with sites.
        assert_eq!(names, vec![MODULE_SPAN_NAME, "hot", "warm"]);
    }

    #[test]
    fn empty_marks_empty_functions() {
        let (unit, _) = analyze("plain.py", "x = 1\n", &[]);
        assert!(cross_language_functions(&unit, &[]).is_empty());
    }

    #[test]
    fn custom_transfer_bound_is_respected() {
        let src = "import ctypes\nlib = ctypes.CDLL(\"x.so\")\na = lib.f()\nb = a\nc = b\nd = c\n";
        let (unit, sites) = analyze("b.py", src, &[]);
        let marks = propagate(&unit, &sites, 1).unwrap();
        // Bound 1: only the receiving variable itself is tainted.
        assert!(marks.iter().any(|m| m.line == 3 && m.depth == 1));
        assert!(!marks.iter().any(|m| m.line >= 4));
    }

    #[test]
    fn matches_chain_enumeration_oracle_on_generated_programs() {
        use crate::testsupport::{generate_program, oracle_marks};
        for seed in 0..1000u64 {
            let prog = generate_program(seed, 30, 8);
            let marks = propagate(&prog.unit, &prog.sites, DEFAULT_MAX_TRANSFERS).unwrap();
            let got: std::collections::BTreeSet<(usize, u8)> =
                marks.iter().map(|m| (m.line, m.depth)).collect();
            let expected = oracle_marks(&prog.unit, &prog.sites, DEFAULT_MAX_TRANSFERS);
            assert_eq!(got, expected, "seed {seed} diverged from the oracle");
        }
    }

    #[test]
    fn no_mark_ever_exceeds_the_bound_and_longer_chains_stop() {
        use crate::testsupport::generate_program;
        for seed in 0..200u64 {
            let prog = generate_program(seed, 30, 8);
            for bound in 1..=5u8 {
                let marks = propagate(&prog.unit, &prog.sites, bound).unwrap();
                assert!(marks.iter().all(|m| m.depth <= bound));
            }
        }
        // A linear chain of length 6: exactly bound transfers are marked.
        let src = "import ctypes\nlib = ctypes.CDLL(\"x.so\")\nv1 = lib.f()\nv2 = v1\nv3 = v2\nv4 = v3\nv5 = v4\nv6 = v5\n";
        let (unit, sites) = analyze("chain.py", src, &[]);
        for bound in 1..=5u8 {
            let marks = propagate(&unit, &sites, bound).unwrap();
            let max_chain_line = marks.iter().map(|m| m.line).max().unwrap();
            assert_eq!(max_chain_line, 2 + bound as usize);
        }
    }
}
