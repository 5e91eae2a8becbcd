//! Detection of cross-language interaction sites.
//!
//! Nine interaction mechanisms are recognized, spanning three language
//! pairs: Python calling C/C++ through the raw C API, ctypes, Boost.Python,
//! cffi, SWIG, or pybind11; Java calling C/C++ through JNI or JNA; and Java
//! calling Python through Jython. Detection works on the calling side only;
//! the native side is assumed to ship as a prebuilt library.
//!
//! A [`NativeBindingIndex`] is built once per project from project-wide
//! evidence (native method declarations, binding macros in build sources,
//! SWIG interface files) and then consulted while scanning each file for
//! call sites. ctypes/cffi handles are tracked lexically within one file.

mod index;
mod patterns;
mod sites;

pub use index::build_binding_index;
pub use patterns::{MechanismPatterns, PatternConfig};
pub use sites::detect_sites;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::source_model::{CallExpr, Language};

/// A cross-language interaction mechanism.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    PythonCApi,
    Ctypes,
    BoostPython,
    Cffi,
    Swig,
    Pybind11,
    Jni,
    Jna,
    Jython,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LanguagePair {
    PythonC,
    JavaC,
    JavaPython,
}

impl Mechanism {
    pub const ALL: [Mechanism; 9] = [
        Mechanism::PythonCApi,
        Mechanism::Ctypes,
        Mechanism::BoostPython,
        Mechanism::Cffi,
        Mechanism::Swig,
        Mechanism::Pybind11,
        Mechanism::Jni,
        Mechanism::Jna,
        Mechanism::Jython,
    ];

    pub fn language_pair(self) -> LanguagePair {
        match self {
            Mechanism::PythonCApi
            | Mechanism::Ctypes
            | Mechanism::BoostPython
            | Mechanism::Cffi
            | Mechanism::Swig
            | Mechanism::Pybind11 => LanguagePair::PythonC,
            Mechanism::Jni | Mechanism::Jna => LanguagePair::JavaC,
            Mechanism::Jython => LanguagePair::JavaPython,
        }
    }

    /// The host language whose source files can produce sites of this
    /// mechanism.
    pub fn host_language(self) -> Language {
        match self.language_pair() {
            LanguagePair::PythonC => Language::Python,
            LanguagePair::JavaC | LanguagePair::JavaPython => Language::Java,
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Mechanism::PythonCApi => "python_c_api",
            Mechanism::Ctypes => "ctypes",
            Mechanism::BoostPython => "boost_python",
            Mechanism::Cffi => "cffi",
            Mechanism::Swig => "swig",
            Mechanism::Pybind11 => "pybind11",
            Mechanism::Jni => "jni",
            Mechanism::Jna => "jna",
            Mechanism::Jython => "jython",
        }
    }

    pub fn from_id(id: &str) -> Option<Mechanism> {
        Mechanism::ALL.iter().copied().find(|m| m.id() == id)
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// One cross-language interaction point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossLangSite {
    pub mechanism: Mechanism,
    pub file: String,
    /// 1-based; coincides with `call.line`.
    pub line: usize,
    pub call: CallExpr,
    /// Library/interpreter handle the call flows through, when tracked.
    pub handle_var: Option<String>,
    /// Human-readable justification; load/bind lines are prefixed `load_decl:`.
    pub evidence: String,
}

impl CrossLangSite {
    /// Whether this site is the library-load/bind statement itself.
    pub fn is_load(&self) -> bool {
        self.evidence.starts_with("load_decl")
    }
}

/// Where a piece of binding evidence was found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceLoc {
    pub file: String,
    pub line: usize,
    pub snippet: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BindingEntry {
    pub mechanism: Mechanism,
    /// Never empty: every index entry carries at least one location.
    pub evidence: Vec<EvidenceLoc>,
}

/// Project-level map from module/class identifiers to the mechanism that
/// implements them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NativeBindingIndex {
    /// Module or class simple name → binding.
    pub entries: BTreeMap<String, BindingEntry>,
    /// Java class simple name → native method names declared on it.
    pub native_methods: BTreeMap<String, std::collections::BTreeSet<String>>,
}

impl NativeBindingIndex {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn mechanism_of(&self, name: &str) -> Option<Mechanism> {
        self.entries.get(name).map(|e| e.mechanism)
    }

    /// Classes declaring a native method named `method`.
    pub fn classes_with_native(&self, method: &str) -> Vec<&str> {
        self.native_methods
            .iter()
            .filter(|(_, methods)| methods.contains(method))
            .map(|(class, _)| class.as_str())
            .collect()
    }
}
