//! Per-file cross-language call site detection.

use std::collections::{BTreeMap, BTreeSet};

use crate::source_model::{function_at, CallExpr, Language, SourceUnit, Statement};

use super::{CrossLangSite, Mechanism, NativeBindingIndex, PatternConfig};

/// Detects every cross-language interaction site in one file.
///
/// Resolution is name-based and deliberately conservative: ambiguous
/// project-wide fallbacks are dropped, and handles are tracked lexically
/// within the file only. Load/bind statements are themselves reported as
/// sites (evidence prefixed `load_decl:`). Sites come back ordered by line.
pub fn detect_sites(
    unit: &SourceUnit,
    index: &NativeBindingIndex,
    config: &PatternConfig,
) -> Vec<CrossLangSite> {
    let mut sites = match unit.language {
        Language::Python => PythonScan::new(unit, index, config).run(),
        Language::Java => java_scan(unit, index, config),
    };
    sites.sort_by(|a, b| {
        (a.line, &a.call.callee, a.mechanism).cmp(&(b.line, &b.call.callee, b.mechanism))
    });
    sites.dedup_by(|a, b| a.line == b.line && a.call == b.call && a.mechanism == b.mechanism);
    sites
}

fn site(
    unit: &SourceUnit,
    mechanism: Mechanism,
    call: &CallExpr,
    handle_var: Option<&str>,
    evidence: String,
) -> CrossLangSite {
    CrossLangSite {
        mechanism,
        file: unit.path.clone(),
        line: call.line,
        call: call.clone(),
        handle_var: handle_var.map(|s| s.to_string()),
        evidence,
    }
}

fn receiver_last(call: &CallExpr) -> Option<&str> {
    call.receiver.as_deref().and_then(|r| r.rsplit('.').next())
}

// ---------------------------------------------------------------------------
// Java
// ---------------------------------------------------------------------------

fn java_scan(
    unit: &SourceUnit,
    index: &NativeBindingIndex,
    config: &PatternConfig,
) -> Vec<CrossLangSite> {
    let mut sites = Vec::new();
    // Vars bound from `Native.load(..)` in this file.
    let mut jna_handles: BTreeSet<String> = BTreeSet::new();

    for stmt in &unit.statements {
        for call in &stmt.calls {
            let last = receiver_last(call);

            if last == Some("System") && config.is_jni_load(&call.callee) {
                sites.push(site(
                    unit,
                    Mechanism::Jni,
                    call,
                    None,
                    format!("load_decl: System.{}", call.callee),
                ));
                continue;
            }
            if last == Some("Native") && config.is_jna_load(&call.callee) {
                let handle = stmt.defined_vars.iter().next().map(String::as_str);
                if let Some(h) = handle {
                    jna_handles.insert(h.to_string());
                }
                sites.push(site(
                    unit,
                    Mechanism::Jna,
                    call,
                    handle,
                    format!("load_decl: Native.{}", call.callee),
                ));
                continue;
            }

            match call.receiver.as_deref() {
                Some(receiver) => {
                    if let Some(s) =
                        resolve_java_receiver_call(unit, index, config, &jna_handles, call, receiver)
                    {
                        sites.push(s);
                    }
                }
                None => {
                    // Bare call: a native method of the enclosing class.
                    if let Some(class) = enclosing_class(unit, call.line) {
                        if index.mechanism_of(&class) == Some(Mechanism::Jni)
                            && index
                                .native_methods
                                .get(&class)
                                .is_some_and(|m| m.contains(&call.callee))
                        {
                            sites.push(site(
                                unit,
                                Mechanism::Jni,
                                call,
                                None,
                                format!("native method `{}` of enclosing class `{class}`", call.callee),
                            ));
                        }
                    }
                }
            }
        }
    }
    sites
}

fn enclosing_class(unit: &SourceUnit, line: usize) -> Option<String> {
    let span = function_at(unit, line)?;
    let (class_chain, _) = span.qualified_name.rsplit_once('.')?;
    Some(class_chain.rsplit('.').next().unwrap_or(class_chain).to_string())
}

fn resolve_java_receiver_call(
    unit: &SourceUnit,
    index: &NativeBindingIndex,
    config: &PatternConfig,
    jna_handles: &BTreeSet<String>,
    call: &CallExpr,
    receiver: &str,
) -> Option<CrossLangSite> {
    let head = receiver.split('.').next().unwrap_or(receiver);
    let last = receiver.rsplit('.').next().unwrap_or(receiver);

    // `lib.fn(..)` where lib came from Native.load.
    if jna_handles.contains(receiver) {
        return Some(site(
            unit,
            Mechanism::Jna,
            call,
            Some(receiver),
            format!("call through JNA handle `{receiver}`"),
        ));
    }

    // Receiver type: declared/constructed type of a simple var, the type of
    // the trailing field (`CLibrary.INSTANCE`), or the head when it names an
    // indexed type directly (static access).
    let receiver_type = if !receiver.contains('.') {
        unit.var_types.get(receiver).cloned().or_else(|| {
            index.entries.contains_key(receiver).then(|| receiver.to_string())
        })
    } else if index.entries.contains_key(head) {
        Some(head.to_string())
    } else {
        unit.var_types.get(last).cloned()
    };

    if let Some(ty) = &receiver_type {
        match index.mechanism_of(ty) {
            Some(Mechanism::Jna) => {
                return Some(site(
                    unit,
                    Mechanism::Jna,
                    call,
                    Some(receiver),
                    format!("call through JNA interface `{ty}`"),
                ));
            }
            Some(Mechanism::Jython) => {
                if config.is_jython_invoke(&call.callee) {
                    return Some(site(
                        unit,
                        Mechanism::Jython,
                        call,
                        Some(receiver),
                        format!("`{}` on embedded-interpreter type `{ty}`", call.callee),
                    ));
                }
                return None;
            }
            Some(Mechanism::Jni) => {
                if index
                    .native_methods
                    .get(ty)
                    .is_some_and(|m| m.contains(&call.callee))
                {
                    let evidence = index
                        .entries
                        .get(ty)
                        .and_then(|e| e.evidence.first())
                        .map(|loc| format!("native method `{}` declared at {}:{}", call.callee, loc.file, loc.line))
                        .unwrap_or_else(|| format!("native method `{}` on `{ty}`", call.callee));
                    return Some(site(unit, Mechanism::Jni, call, None, evidence));
                }
                return None;
            }
            _ => {}
        }
    }

    // Project-wide fallback: exactly one indexed class declares this native
    // method. Ambiguity is dropped in favor of precision.
    let candidates: Vec<&str> = index
        .classes_with_native(&call.callee)
        .into_iter()
        .filter(|class| index.mechanism_of(class) == Some(Mechanism::Jni))
        .collect();
    match candidates.as_slice() {
        [single] => Some(site(
            unit,
            Mechanism::Jni,
            call,
            None,
            format!(
                "native method `{}` resolved project-wide to class `{single}`",
                call.callee
            ),
        )),
        [] => None,
        _ => {
            log::debug!(
                "{}:{}: `{}` matches native methods on {} classes — dropped as ambiguous",
                unit.path,
                call.line,
                call.callee,
                candidates.len()
            );
            None
        }
    }
}

// ---------------------------------------------------------------------------
// Python
// ---------------------------------------------------------------------------

struct PythonScan<'a> {
    unit: &'a SourceUnit,
    index: &'a NativeBindingIndex,
    config: &'a PatternConfig,
    /// Local name → imported dotted path (`fm` → `fastmath`,
    /// `compute` → `fastmath.compute`).
    aliases: BTreeMap<String, String>,
    ctypes_handles: BTreeMap<String, usize>,
    ffi_objects: BTreeSet<String>,
    cffi_handles: BTreeMap<String, usize>,
    sites: Vec<CrossLangSite>,
}

impl<'a> PythonScan<'a> {
    fn new(unit: &'a SourceUnit, index: &'a NativeBindingIndex, config: &'a PatternConfig) -> Self {
        let mut aliases = BTreeMap::new();
        for import in &unit.imports {
            let local = import
                .alias
                .clone()
                .unwrap_or_else(|| import.module_or_type.split('.').next().unwrap_or_default().to_string());
            if !local.is_empty() && local != "*" {
                aliases.insert(local, import.module_or_type.clone());
            }
        }
        PythonScan {
            unit,
            index,
            config,
            aliases,
            ctypes_handles: BTreeMap::new(),
            ffi_objects: BTreeSet::new(),
            cffi_handles: BTreeMap::new(),
            sites: Vec::new(),
        }
    }

    /// Resolves a local name through the import aliases: `fm` → `fastmath`,
    /// unknown names resolve to themselves.
    fn resolve(&self, name: &str) -> String {
        self.aliases.get(name).cloned().unwrap_or_else(|| name.to_string())
    }

    /// Resolves a dotted receiver chain's head through the aliases:
    /// `ct.cdll` → `ctypes.cdll`.
    fn resolve_chain(&self, chain: &str) -> String {
        match chain.split_once('.') {
            Some((head, rest)) => format!("{}.{rest}", self.resolve(head)),
            None => self.resolve(chain),
        }
    }

    fn run(mut self) -> Vec<CrossLangSite> {
        // Statements are in (line, column) order; handle tracking follows it.
        let statements: Vec<&Statement> = self.unit.statements.iter().collect();
        for stmt in statements {
            // Reassignment kills a stale handle before this statement's own
            // loads re-register it.
            for var in &stmt.defined_vars {
                self.ctypes_handles.remove(var);
                self.cffi_handles.remove(var);
                self.ffi_objects.remove(var);
            }
            for call in &stmt.calls {
                self.scan_call(stmt, call);
            }
            self.scan_attribute_binding(stmt);
        }
        self.sites
    }

    fn scan_call(&mut self, stmt: &Statement, call: &CallExpr) {
        let handle = stmt.defined_vars.iter().next().map(String::as_str);
        let resolved_receiver = call.receiver.as_deref().map(|r| self.resolve_chain(r));

        // ctypes loader constructors.
        if self.config.is_ctypes_loader(&call.callee) {
            let from_ctypes = match &resolved_receiver {
                Some(r) => r == "ctypes",
                // Bare `CDLL(..)` needs a `from ctypes import CDLL` binding.
                None => self.resolve(&call.callee).starts_with("ctypes."),
            };
            if from_ctypes {
                for var in &stmt.defined_vars {
                    self.ctypes_handles.insert(var.clone(), call.line);
                }
                self.push(Mechanism::Ctypes, call, handle, format!("load_decl: ctypes.{}", call.callee));
                return;
            }
        }

        // cdll.LoadLibrary(..) / ctypes.windll.LoadLibrary(..)
        if call.callee == "LoadLibrary" {
            if let Some(r) = &resolved_receiver {
                let mut parts = r.split('.');
                let head = parts.next().unwrap_or_default();
                let names_namespace = self.config.is_ctypes_namespace(head)
                    || (head == "ctypes" && parts.any(|p| self.config.is_ctypes_namespace(p)));
                if names_namespace {
                    for var in &stmt.defined_vars {
                        self.ctypes_handles.insert(var.clone(), call.line);
                    }
                    self.push(Mechanism::Ctypes, call, handle, format!("load_decl: {r}.LoadLibrary"));
                    return;
                }
            }
        }

        // cffi: FFI() construction, then dlopen on the FFI object.
        if call.callee == "FFI" {
            let from_cffi = match &resolved_receiver {
                Some(r) => r == "cffi",
                None => self.resolve(&call.callee) == "cffi.FFI",
            };
            if from_cffi {
                for var in &stmt.defined_vars {
                    self.ffi_objects.insert(var.clone());
                }
                return;
            }
        }
        if self.config.is_cffi_dlopen(&call.callee) {
            if let Some(r) = call.receiver.as_deref() {
                if self.ffi_objects.contains(r) {
                    for var in &stmt.defined_vars {
                        self.cffi_handles.insert(var.clone(), call.line);
                    }
                    self.push(Mechanism::Cffi, call, handle, format!("load_decl: {r}.dlopen"));
                    return;
                }
            }
        }

        // Calls through tracked handles.
        if let Some(r) = call.receiver.as_deref() {
            if let Some(load_line) = self.ctypes_handles.get(r) {
                let ev = format!("call through ctypes handle `{r}` loaded at line {load_line}");
                self.push(Mechanism::Ctypes, call, Some(r), ev);
                return;
            }
            if let Some(load_line) = self.cffi_handles.get(r) {
                let ev = format!("call through cffi handle `{r}` bound at line {load_line}");
                self.push(Mechanism::Cffi, call, Some(r), ev);
                return;
            }
        }

        // Attribute calls into indexed extension modules.
        if let Some(r) = &resolved_receiver {
            if let Some(entry) = self.index.entries.get(r.as_str()) {
                if entry.mechanism.host_language() == Language::Python {
                    let ev = module_evidence(r, entry);
                    self.push(entry.mechanism, call, None, ev);
                    return;
                }
            }
        }

        // `from fastmath import compute` then bare `compute(..)`.
        if call.receiver.is_none() {
            let resolved = self.resolve(&call.callee);
            if let Some((module, _)) = resolved.rsplit_once('.') {
                if let Some(entry) = self.index.entries.get(module) {
                    if entry.mechanism.host_language() == Language::Python {
                        let ev = module_evidence(module, entry);
                        self.push(entry.mechanism, call, None, ev);
                    }
                }
            }
        }
    }

    /// `lib = ctypes.cdll.msvcrt` binds a handle without any call node.
    fn scan_attribute_binding(&mut self, stmt: &Statement) {
        if stmt.defined_vars.is_empty() || !stmt.calls.is_empty() {
            return;
        }
        for chain in stmt.used_vars.iter().filter(|v| v.contains('.')) {
            let resolved = self.resolve_chain(chain);
            let parts: Vec<&str> = resolved.split('.').collect();
            let is_binding = match parts.as_slice() {
                ["ctypes", ns, _lib] => self.config.is_ctypes_namespace(ns),
                [ns, _lib] => {
                    self.config.is_ctypes_namespace(ns)
                        // `from ctypes import cdll` binds the namespace name.
                        || self
                            .aliases
                            .get(*ns)
                            .is_some_and(|m| m.starts_with("ctypes."))
                }
                _ => false,
            };
            if is_binding {
                let line = stmt.line;
                for var in &stmt.defined_vars {
                    self.ctypes_handles.insert(var.clone(), line);
                }
                let synthetic = CallExpr {
                    receiver: Some(parts[..parts.len() - 1].join(".")),
                    callee: parts[parts.len() - 1].to_string(),
                    arg_vars: BTreeSet::new(),
                    line,
                };
                self.sites.push(site(
                    self.unit,
                    Mechanism::Ctypes,
                    &synthetic,
                    stmt.defined_vars.iter().next().map(String::as_str),
                    format!("load_decl: `{chain}` attribute binding"),
                ));
                return;
            }
        }
    }

    fn push(&mut self, mechanism: Mechanism, call: &CallExpr, handle: Option<&str>, evidence: String) {
        self.sites.push(site(self.unit, mechanism, call, handle, evidence));
    }
}

fn module_evidence(module: &str, entry: &super::BindingEntry) -> String {
    match entry.evidence.first() {
        Some(loc) if loc.line > 0 => format!(
            "module `{module}` bound via {} ({}:{})",
            entry.mechanism, loc.file, loc.line
        ),
        _ => format!("module `{module}` bound via {}", entry.mechanism),
    }
}
