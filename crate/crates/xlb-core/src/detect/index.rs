//! Project-level binding index construction.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;

use crate::source_model::{Language, SourceUnit, TypeKind};

use super::{BindingEntry, EvidenceLoc, Mechanism, NativeBindingIndex, PatternConfig};

/// File extensions scanned for native build evidence.
const EVIDENCE_EXTENSIONS: &[&str] = &[
    "c", "cc", "cpp", "cxx", "h", "hpp", "hh", "hxx", "i", "swg",
];

/// Largest evidence file read, in bytes. Generated bundles past this size
/// are skipped rather than scanned.
const MAX_EVIDENCE_FILE: u64 = 4 * 1024 * 1024;

static PYBIND11_MODULE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"PYBIND11_MODULE\s*\(\s*(\w+)").unwrap());
static BOOST_PYTHON_MODULE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"BOOST_PYTHON_MODULE\s*\(\s*(\w+)").unwrap());
static SWIG_MODULE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*%module(?:\s*\([^)]*\))?\s+(\w+)").unwrap());
static PYINIT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bPyInit_(\w+)\s*\(").unwrap());
static PY2_INIT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:PyMODINIT_FUNC|void)\s+init(\w+)\s*\(").unwrap());

/// Builds the project-wide binding index.
///
/// Python extension modules are attributed from build evidence found in the
/// project tree: `PYBIND11_MODULE(<name>` → pybind11, `BOOST_PYTHON_MODULE(
/// <name>` → boost_python, `%module <name>` in a SWIG interface file → swig,
/// and `PyInit_<name>` / py2 `init<name>` initializers → python_c_api. When
/// several kinds of evidence name the same module the more specific macro
/// wins: pybind11 > boost_python > swig > python_c_api.
///
/// Java units contribute: classes declaring `native` methods (indexed as jni
/// when the project also loads a library via `System.loadLibrary`/`System.
/// load`), interfaces extending a JNA `Library` type (jna), and imported
/// `org.python.*` types (jython).
pub fn build_binding_index(
    project_root: &Path,
    units: &[SourceUnit],
    config: &PatternConfig,
) -> NativeBindingIndex {
    let mut index = NativeBindingIndex::default();

    for (name, mechanism, evidence) in scan_build_evidence(project_root) {
        insert_module(&mut index, &name, mechanism, evidence);
    }

    index_java_units(&mut index, units, config);

    for (name, mechanism) in config.forced_modules() {
        insert_module(
            &mut index,
            name,
            mechanism,
            EvidenceLoc {
                file: "<pattern-config>".to_string(),
                line: 0,
                snippet: format!("module `{name}` forced by pattern config"),
            },
        );
    }

    index
}

/// python_c_api is the weakest attribution: the specific macros expand to
/// the generic initializer it matches, so they take precedence.
fn specificity(mechanism: Mechanism) -> u8 {
    match mechanism {
        Mechanism::Pybind11 => 4,
        Mechanism::BoostPython => 3,
        Mechanism::Swig => 2,
        Mechanism::PythonCApi => 1,
        _ => 0,
    }
}

fn insert_module(
    index: &mut NativeBindingIndex,
    name: &str,
    mechanism: Mechanism,
    evidence: EvidenceLoc,
) {
    match index.entries.get_mut(name) {
        None => {
            index.entries.insert(
                name.to_string(),
                BindingEntry {
                    mechanism,
                    evidence: vec![evidence],
                },
            );
        }
        Some(entry) if entry.mechanism == mechanism => entry.evidence.push(evidence),
        Some(entry) => {
            if specificity(mechanism) > specificity(entry.mechanism) {
                entry.mechanism = mechanism;
                entry.evidence.insert(0, evidence);
            } else {
                log::debug!(
                    "binding index: `{name}` already {} — ignoring {} evidence at {}:{}",
                    entry.mechanism,
                    mechanism,
                    evidence.file,
                    evidence.line
                );
            }
        }
    }
}

fn scan_build_evidence(project_root: &Path) -> Vec<(String, Mechanism, EvidenceLoc)> {
    let files: Vec<_> = walkdir::WalkDir::new(project_root)
        .follow_links(false)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .filter(|e| {
            e.path()
                .extension()
                .and_then(|x| x.to_str())
                .map(|x| EVIDENCE_EXTENSIONS.contains(&x.to_ascii_lowercase().as_str()))
                .unwrap_or(false)
        })
        .filter(|e| e.metadata().map(|m| m.len() <= MAX_EVIDENCE_FILE).unwrap_or(false))
        .map(|e| e.into_path())
        .collect();

    let mut findings: Vec<(String, Mechanism, EvidenceLoc)> = files
        .par_iter()
        .flat_map(|path| {
            let Ok(bytes) = std::fs::read(path) else {
                return Vec::new();
            };
            let text = String::from_utf8_lossy(&bytes);
            let rel = path
                .strip_prefix(project_root)
                .unwrap_or(path)
                .to_string_lossy()
                .replace('\\', "/");
            scan_file(&rel, &text, is_swig_file(path))
        })
        .collect();

    // Parallel walk order is nondeterministic; canonicalize.
    findings.sort_by(|a, b| {
        (&a.2.file, a.2.line, a.1, &a.0).cmp(&(&b.2.file, b.2.line, b.1, &b.0))
    });
    findings
}

fn is_swig_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|x| x.to_str()),
        Some("i") | Some("swg")
    )
}

fn scan_file(rel_path: &str, text: &str, swig_file: bool) -> Vec<(String, Mechanism, EvidenceLoc)> {
    let mut out = Vec::new();
    let py2_gate = text.contains("Python.h") || text.contains("PyMODINIT_FUNC");
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let mut push = |name: &str, mechanism: Mechanism| {
            out.push((
                name.to_string(),
                mechanism,
                EvidenceLoc {
                    file: rel_path.to_string(),
                    line: lineno,
                    snippet: line.trim().to_string(),
                },
            ));
        };
        if let Some(c) = PYBIND11_MODULE.captures(line) {
            push(&c[1], Mechanism::Pybind11);
        }
        if let Some(c) = BOOST_PYTHON_MODULE.captures(line) {
            push(&c[1], Mechanism::BoostPython);
        }
        if swig_file {
            if let Some(c) = SWIG_MODULE.captures(line) {
                push(&c[1], Mechanism::Swig);
            }
        }
        if let Some(c) = PYINIT.captures(line) {
            push(&c[1], Mechanism::PythonCApi);
        }
        if py2_gate {
            if let Some(c) = PY2_INIT.captures(line) {
                if !line.contains("PyInit_") {
                    push(&c[1], Mechanism::PythonCApi);
                }
            }
        }
    }
    out
}

fn index_java_units(index: &mut NativeBindingIndex, units: &[SourceUnit], config: &PatternConfig) {
    let java_units: Vec<&SourceUnit> = units
        .iter()
        .filter(|u| u.language == Language::Java)
        .collect();

    // A `native` declaration only reaches C through a loaded library; require
    // a System.loadLibrary/System.load call somewhere in the project.
    let has_system_load = java_units.iter().any(|u| {
        u.statements.iter().any(|s| {
            s.calls.iter().any(|c| {
                c.receiver
                    .as_deref()
                    .is_some_and(|r| r.rsplit('.').next() == Some("System"))
                    && config.is_jni_load(&c.callee)
            })
        })
    });

    for unit in &java_units {
        // Native method declarations, grouped per enclosing class.
        for f in unit.functions.iter().filter(|f| f.is_native_decl) {
            let Some((class_chain, method)) = f.qualified_name.rsplit_once('.') else {
                continue;
            };
            let class = class_chain.rsplit('.').next().unwrap_or(class_chain);
            index
                .native_methods
                .entry(class.to_string())
                .or_default()
                .insert(method.to_string());
            if has_system_load {
                insert_module(
                    index,
                    class,
                    Mechanism::Jni,
                    EvidenceLoc {
                        file: unit.path.clone(),
                        line: f.start_line,
                        snippet: format!("native method `{method}` declared here"),
                    },
                );
            }
        }

        let imports_jna = unit
            .imports
            .iter()
            .any(|i| i.module_or_type.starts_with("com.sun.jna"));
        let jython_imports: BTreeSet<&str> = unit
            .imports
            .iter()
            .filter(|i| i.module_or_type.starts_with("org.python"))
            .map(|i| i.module_or_type.as_str())
            .collect();

        if imports_jna {
            for decl in &unit.types {
                if decl.kind == TypeKind::Interface
                    && decl.supertypes.iter().any(|s| config.is_jna_interface(s))
                {
                    insert_module(
                        index,
                        &decl.name,
                        Mechanism::Jna,
                        EvidenceLoc {
                            file: unit.path.clone(),
                            line: decl.line,
                            snippet: format!(
                                "interface `{}` extends a JNA library type",
                                decl.name
                            ),
                        },
                    );
                }
            }
        }

        for import in &jython_imports {
            let simple = import.rsplit('.').next().unwrap_or(import);
            let names: Vec<String> = if simple == "*" {
                // Wildcard: index the known interpreter/object types.
                ["PythonInterpreter", "PyObject"]
                    .iter()
                    .map(|s| s.to_string())
                    .chain(config.extra_imports(Mechanism::Jython).iter().cloned())
                    .collect()
            } else if config.is_jython_type(simple) {
                vec![simple.to_string()]
            } else {
                continue;
            };
            let line = unit
                .imports
                .iter()
                .find(|i| i.module_or_type == **import)
                .map(|i| i.line)
                .unwrap_or(0);
            for name in names {
                insert_module(
                    index,
                    &name,
                    Mechanism::Jython,
                    EvidenceLoc {
                        file: unit.path.clone(),
                        line,
                        snippet: format!("`{import}` imported here"),
                    },
                );
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source_model::parse_unit;
    use std::fs;

    fn java_unit(path: &str, src: &str) -> SourceUnit {
        parse_unit(path, src.as_bytes(), Language::Java).unwrap()
    }

    #[test]
    fn listings_project_indexes_native_class() {
        let native = java_unit(
            "NativeMethod.java",
            "public class NativeMethod {\n    public native void sayHello();\n    static {\n        System.loadLibrary(\"nativeMethod\");\n    }\n}\n",
        );
        let caller = java_unit(
            "NativeCaller.java",
            "public class NativeCaller {\n    public static void main(String[] args) {\n        NativeMethod nativeMethod = new NativeMethod();\n        nativeMethod.sayHello();\n    }\n}\n",
        );
        let tmp = tempfile::tempdir().unwrap();
        let index = build_binding_index(
            tmp.path(),
            &[native, caller],
            &PatternConfig::default(),
        );
        let entry = index.entries.get("NativeMethod").expect("indexed class");
        assert_eq!(entry.mechanism, Mechanism::Jni);
        assert_eq!(entry.evidence[0].line, 2);
        assert!(index.native_methods["NativeMethod"].contains("sayHello"));
    }

    #[test]
    fn native_decl_without_any_load_is_not_indexed() {
        let native = java_unit(
            "N.java",
            "public class N {\n    public native void f();\n}\n",
        );
        let tmp = tempfile::tempdir().unwrap();
        let index = build_binding_index(tmp.path(), &[native], &PatternConfig::default());
        assert!(index.entries.is_empty());
        // The declaration itself is still recorded for diagnostics.
        assert!(index.native_methods.contains_key("N"));
    }

    #[test]
    fn empty_project_empty_index() {
        let tmp = tempfile::tempdir().unwrap();
        let index = build_binding_index(tmp.path(), &[], &PatternConfig::default());
        assert!(index.is_empty());
    }

    #[test]
    fn pybind11_evidence_maps_module() {
        let tmp = tempfile::tempdir().unwrap();
        fs::create_dir_all(tmp.path().join("csrc")).unwrap();
        fs::write(
            tmp.path().join("csrc/fastmath.cpp"),
            "#include <pybind11/pybind11.h>\nPYBIND11_MODULE(fastmath, m) {\n    m.def(\"gcd\", &gcd);\n}\n",
        )
        .unwrap();
        let index = build_binding_index(tmp.path(), &[], &PatternConfig::default());
        let entry = index.entries.get("fastmath").expect("module indexed");
        assert_eq!(entry.mechanism, Mechanism::Pybind11);
        assert_eq!(entry.evidence[0].file, "csrc/fastmath.cpp");
        assert_eq!(entry.evidence[0].line, 2);
    }

    #[test]
    fn more_specific_macro_wins_over_generic_initializer() {
        let tmp = tempfile::tempdir().unwrap();
        // Generated pybind11 sources also contain the PyInit_ symbol the
        // macro expands to.
        fs::write(
            tmp.path().join("module.cpp"),
            "extern \"C\" PyObject *PyInit_fastmath(void);\nPYBIND11_MODULE(fastmath, m) {}\n",
        )
        .unwrap();
        let index = build_binding_index(tmp.path(), &[], &PatternConfig::default());
        assert_eq!(index.entries["fastmath"].mechanism, Mechanism::Pybind11);
    }

    #[test]
    fn swig_module_only_in_interface_files() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("fastgeo.i"), "%module fastgeo\n%{ #include \"geo.h\" %}\n").unwrap();
        fs::write(tmp.path().join("readme.c"), "// %module not_a_module\n").unwrap();
        let index = build_binding_index(tmp.path(), &[], &PatternConfig::default());
        assert_eq!(index.entries["fastgeo"].mechanism, Mechanism::Swig);
        assert!(!index.entries.contains_key("not_a_module"));
    }

    #[test]
    fn py2_initializer_requires_python_header_gate() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(
            tmp.path().join("legacy.c"),
            "#include <Python.h>\nPyMODINIT_FUNC initlegacymod(void) {}\n",
        )
        .unwrap();
        fs::write(tmp.path().join("other.c"), "void initother(void) {}\n").unwrap();
        let index = build_binding_index(tmp.path(), &[], &PatternConfig::default());
        assert_eq!(index.entries["legacymod"].mechanism, Mechanism::PythonCApi);
        assert!(!index.entries.contains_key("other"));
    }

    #[test]
    fn jython_imports_index_interpreter_types() {
        let unit = java_unit(
            "Runner.java",
            "import org.python.util.PythonInterpreter;\nimport org.python.core.PyObject;\npublic class Runner {}\n",
        );
        let tmp = tempfile::tempdir().unwrap();
        let index = build_binding_index(tmp.path(), &[unit], &PatternConfig::default());
        assert_eq!(index.entries["PythonInterpreter"].mechanism, Mechanism::Jython);
        assert_eq!(index.entries["PyObject"].mechanism, Mechanism::Jython);
    }

    #[test]
    fn every_entry_has_evidence() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("a.i"), "%module alpha\n").unwrap();
        fs::write(tmp.path().join("b.cpp"), "BOOST_PYTHON_MODULE(beta) {}\n").unwrap();
        let index = build_binding_index(tmp.path(), &[], &PatternConfig::default());
        for entry in index.entries.values() {
            assert!(!entry.evidence.is_empty());
        }
    }
}
