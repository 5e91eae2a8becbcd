//! Configuration-extensible detection signatures.
//!
//! The built-in signature sets cover the common spellings of each
//! mechanism. Real projects wrap and alias these endlessly, so every set
//! can be extended (never narrowed) through a JSON document mapping
//! mechanism id → extra callee/import patterns:
//!
//! ```json
//! {
//!   "ctypes": { "callees": ["LoadLibraryEx"], "imports": [] },
//!   "jython": { "callees": ["execfile"], "imports": ["PyList"] },
//!   "pybind11": { "imports": ["fastmath_native"] }
//! }
//! ```
//!
//! `callees` extends the call-name set of the mechanism (loader names for
//! ctypes/cffi/jni/jna, invocation-method names for jython). `imports`
//! extends name-based evidence: extra interpreter type names for jython,
//! extra base-interface names for jna, and for the four Python extension
//! mechanisms a way to force-index module names for which no build evidence
//! is visible in the project tree.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Mechanism;

#[derive(Debug, Error)]
pub enum PatternConfigError {
    #[error("cannot read pattern config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed pattern config {path}: {source}")]
    Malformed {
        path: String,
        source: serde_json::Error,
    },
    #[error("unknown mechanism id in pattern config: {0}")]
    UnknownMechanism(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismPatterns {
    #[serde(default)]
    pub callees: Vec<String>,
    #[serde(default)]
    pub imports: Vec<String>,
}

/// Extra detection patterns, keyed by mechanism.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatternConfig {
    extra: BTreeMap<Mechanism, MechanismPatterns>,
}

impl PatternConfig {
    pub fn from_json(text: &str) -> Result<PatternConfig, serde_json::Error> {
        let raw: BTreeMap<String, MechanismPatterns> = serde_json::from_str(text)?;
        let mut extra = BTreeMap::new();
        for (id, patterns) in raw {
            let mechanism = Mechanism::from_id(&id).ok_or_else(|| {
                serde::de::Error::custom(format!("unknown mechanism id: {id}"))
            })?;
            extra.insert(mechanism, patterns);
        }
        Ok(PatternConfig { extra })
    }

    pub fn from_file(path: &Path) -> Result<PatternConfig, PatternConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| PatternConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        PatternConfig::from_json(&text).map_err(|source| PatternConfigError::Malformed {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn extra_callees(&self, mechanism: Mechanism) -> &[String] {
        self.extra
            .get(&mechanism)
            .map(|p| p.callees.as_slice())
            .unwrap_or(&[])
    }

    pub fn extra_imports(&self, mechanism: Mechanism) -> &[String] {
        self.extra
            .get(&mechanism)
            .map(|p| p.imports.as_slice())
            .unwrap_or(&[])
    }

    fn callee_matches(&self, mechanism: Mechanism, builtin: &[&str], callee: &str) -> bool {
        builtin.contains(&callee) || self.extra_callees(mechanism).iter().any(|c| c == callee)
    }

    fn import_matches(&self, mechanism: Mechanism, builtin: &[&str], name: &str) -> bool {
        builtin.contains(&name) || self.extra_imports(mechanism).iter().any(|c| c == name)
    }

    /// ctypes loader constructors: `CDLL("x.so")` and friends.
    pub fn is_ctypes_loader(&self, callee: &str) -> bool {
        self.callee_matches(
            Mechanism::Ctypes,
            &["CDLL", "WinDLL", "OleDLL", "PyDLL"],
            callee,
        )
    }

    /// `cdll`-style namespace roots (`ctypes.cdll.msvcrt`, `cdll.LoadLibrary`).
    pub fn is_ctypes_namespace(&self, name: &str) -> bool {
        matches!(name, "cdll" | "windll" | "oledll" | "pydll")
    }

    /// cffi dlopen-style binders on an FFI handle.
    pub fn is_cffi_dlopen(&self, callee: &str) -> bool {
        self.callee_matches(Mechanism::Cffi, &["dlopen"], callee)
    }

    /// JNI library-load callees on `System`.
    pub fn is_jni_load(&self, callee: &str) -> bool {
        self.callee_matches(Mechanism::Jni, &["loadLibrary", "load"], callee)
    }

    /// JNA binder callees on `Native`.
    pub fn is_jna_load(&self, callee: &str) -> bool {
        self.callee_matches(Mechanism::Jna, &["load", "loadLibrary"], callee)
    }

    /// JNA base interface names (`extends Library`).
    pub fn is_jna_interface(&self, name: &str) -> bool {
        self.import_matches(Mechanism::Jna, &["Library", "StdCallLibrary"], name)
    }

    /// Jython interpreter/object type names from `org.python.*`.
    pub fn is_jython_type(&self, name: &str) -> bool {
        self.import_matches(Mechanism::Jython, &["PythonInterpreter", "PyObject"], name)
    }

    /// Invocation methods on Jython-typed receivers.
    pub fn is_jython_invoke(&self, callee: &str) -> bool {
        self.callee_matches(
            Mechanism::Jython,
            &["exec", "eval", "get", "invoke", "__call__"],
            callee,
        )
    }

    /// Modules force-indexed by configuration for the Python extension
    /// mechanisms (used when no build evidence exists in the project tree).
    pub fn forced_modules(&self) -> impl Iterator<Item = (&str, Mechanism)> {
        [
            Mechanism::Pybind11,
            Mechanism::BoostPython,
            Mechanism::Swig,
            Mechanism::PythonCApi,
        ]
        .into_iter()
        .flat_map(move |m| {
            self.extra_imports(m)
                .iter()
                .map(move |name| (name.as_str(), m))
        })
    }
}
