//! Language front end: a uniform syntactic view of Python and Java sources.
//!
//! Parsing is best-effort. Mined repositories contain historical, sometimes
//! non-compiling code, so syntactically broken regions degrade to
//! `StatementKind::Other` statements instead of aborting the parse.

mod java;
mod python;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Name of the synthetic span housing Java static initializer blocks.
pub const STATIC_INIT_NAME: &str = "<static_init>";

#[derive(Debug, Error)]
pub enum ParseError {
    /// Input bytes are not text (invalid UTF-8 or embedded NUL).
    #[error("unreadable source: {0}")]
    UnreadableSource(String),
    /// File extension does not map to a supported language.
    #[error("unsupported language for path: {0}")]
    UnsupportedLanguage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Python,
    Java,
}

impl Language {
    /// Maps a file extension to a language: `.py` → Python, `.java` → Java.
    pub fn from_path(path: &str) -> Option<Language> {
        match Path::new(path).extension().and_then(|e| e.to_str()) {
            Some("py") => Some(Language::Python),
            Some("java") => Some(Language::Java),
            _ => None,
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Language::Python => write!(f, "python"),
            Language::Java => write!(f, "java"),
        }
    }
}

/// One function (or function-like block) in a source file.
///
/// Java `native` method declarations are modeled as bodiless spans with
/// `is_native_decl = true`; static initializer blocks become spans named
/// [`STATIC_INIT_NAME`] so library-load calls always have a housing function.
/// Python decorated functions start at the first decorator line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSpan {
    pub name: String,
    /// Dotted path of the enclosing class/function chain plus the name,
    /// e.g. `NativeCaller.main` or `outer.inner`.
    pub qualified_name: String,
    /// 1-based, inclusive.
    pub start_line: usize,
    /// 1-based, inclusive.
    pub end_line: usize,
    pub is_native_decl: bool,
    /// Verbatim source slice of lines `start_line..=end_line`.
    pub body_text: String,
}

impl FunctionSpan {
    pub fn contains_line(&self, line: usize) -> bool {
        self.start_line <= line && line <= self.end_line
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatementKind {
    Assignment,
    Expression,
    /// A statement that loads or binds a native library
    /// (`System.loadLibrary(..)`, `lib = ctypes.CDLL(..)`, `ffi.dlopen(..)`).
    LoadDecl,
    Other,
}

/// One call expression, flattened to the pieces the detectors need.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallExpr {
    /// Dotted receiver chain, e.g. `ctypes` for `ctypes.CDLL(..)` or
    /// `CLibrary.INSTANCE` for `CLibrary.INSTANCE.printf(..)`. `None` for
    /// bare calls like `compute(..)`.
    pub receiver: Option<String>,
    pub callee: String,
    /// Identifiers appearing in argument position.
    pub arg_vars: BTreeSet<String>,
    /// 1-based line of the call expression.
    pub line: usize,
}

/// One statement, reduced to the def/use/call facts the taint pass consumes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    /// 1-based start line.
    pub line: usize,
    /// 0-based start column; `(line, column)` orders statements.
    pub column: usize,
    pub kind: StatementKind,
    pub defined_vars: BTreeSet<String>,
    pub used_vars: BTreeSet<String>,
    pub calls: Vec<CallExpr>,
    /// `return <expr>` statements; feeds function-return taint tracking.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub is_return: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TypeKind {
    Class,
    Interface,
    Enum,
    Record,
    Annotation,
}

/// A class/interface declaration, kept for supertype-based binding detection
/// (e.g. Java interfaces extending a JNA `Library`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeDecl {
    pub name: String,
    pub qualified_name: String,
    pub kind: TypeKind,
    /// Simple names of extended/implemented types.
    pub supertypes: Vec<String>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportDecl {
    /// Dotted module or type name; `from m import n` is recorded as `m.n`.
    pub module_or_type: String,
    /// Local binding when the import introduces one (`as` alias, or the
    /// imported name itself for `from`-imports).
    pub alias: Option<String>,
    pub line: usize,
}

/// Parsed view of one source file. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceUnit {
    /// Repository-relative file path.
    pub path: String,
    pub language: Language,
    pub functions: Vec<FunctionSpan>,
    pub statements: Vec<Statement>,
    pub imports: Vec<ImportDecl>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub types: Vec<TypeDecl>,
    /// Declared or constructed-from types of local variables and fields,
    /// tracked lexically per file. Populated for Java units only; the
    /// detectors use it to resolve receivers such as `nativeMethod.getValue()`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub var_types: BTreeMap<String, String>,
}

impl SourceUnit {
    /// Number of lines in the original source.
    pub fn line_count(&self) -> usize {
        self.functions
            .iter()
            .map(|f| f.end_line)
            .max()
            .unwrap_or(0)
            .max(self.statements.iter().map(|s| s.line).max().unwrap_or(0))
    }
}

/// Parses one source file into a [`SourceUnit`].
///
/// `source` must be text; binary input yields [`ParseError::UnreadableSource`].
/// The parse never aborts on broken syntax.
pub fn parse_unit(path: &str, source: &[u8], language: Language) -> Result<SourceUnit, ParseError> {
    let text = std::str::from_utf8(source)
        .map_err(|e| ParseError::UnreadableSource(format!("{path}: {e}")))?;
    if text.contains('\0') {
        return Err(ParseError::UnreadableSource(format!(
            "{path}: embedded NUL byte"
        )));
    }
    let mut unit = match language {
        Language::Python => python::extract(path, text),
        Language::Java => java::extract(path, text),
    };
    finalize(&mut unit);
    Ok(unit)
}

/// Convenience wrapper that infers the language from the file extension.
pub fn parse_unit_from_path(path: &str, source: &[u8]) -> Result<SourceUnit, ParseError> {
    let language =
        Language::from_path(path).ok_or_else(|| ParseError::UnsupportedLanguage(path.into()))?;
    parse_unit(path, source, language)
}

/// Returns the innermost function span containing `line`, if any.
pub fn function_at(unit: &SourceUnit, line: usize) -> Option<&FunctionSpan> {
    unit.functions
        .iter()
        .filter(|f| f.contains_line(line))
        .max_by_key(|f| (f.start_line, std::cmp::Reverse(f.end_line)))
}

fn finalize(unit: &mut SourceUnit) {
    unit.statements.sort_by_key(|s| (s.line, s.column));
    // Statement starts are unique per grammar node; duplicates would only
    // arise from a double-collected node, so drop them defensively.
    unit.statements.dedup_by_key(|s| (s.line, s.column));
    unit.functions.sort_by_key(|f| (f.start_line, f.end_line));
    unit.imports.sort_by_key(|i| i.line);
    unit.types.sort_by_key(|t| t.line);
}

/// Syntactic check for library-load calls. Statements containing one are
/// classified [`StatementKind::LoadDecl`]; the detectors reuse the check to
/// emit load lines as interaction sites.
pub fn is_load_call(language: Language, call: &CallExpr) -> bool {
    let receiver = call.receiver.as_deref().unwrap_or("");
    let last = receiver.rsplit('.').next().unwrap_or("");
    match language {
        Language::Java => {
            (last == "System" && matches!(call.callee.as_str(), "loadLibrary" | "load"))
                || (last == "Native" && matches!(call.callee.as_str(), "load" | "loadLibrary"))
        }
        Language::Python => {
            matches!(call.callee.as_str(), "CDLL" | "WinDLL" | "OleDLL" | "PyDLL")
                || (call.callee == "LoadLibrary"
                    && matches!(last, "cdll" | "windll" | "oledll" | "pydll"))
                || call.callee == "dlopen"
        }
    }
}

/// Shared by both extractors: the verbatim slice of `lines[start..=end]`,
/// 1-based inclusive, preserving original line endings except the final one.
fn slice_lines(text: &str, start_line: usize, end_line: usize) -> String {
    text.lines()
        .skip(start_line.saturating_sub(1))
        .take(end_line.saturating_sub(start_line) + 1)
        .collect::<Vec<_>>()
        .join("\n")
}
