//! Java front end built on tree-sitter.

use std::collections::{BTreeMap, BTreeSet};

use tree_sitter::{Node, Parser};

use super::{
    slice_lines, CallExpr, FunctionSpan, ImportDecl, Language, SourceUnit, Statement,
    StatementKind, TypeDecl, TypeKind, STATIC_INIT_NAME,
};

pub(super) fn extract(path: &str, text: &str) -> SourceUnit {
    let mut unit = SourceUnit {
        path: path.to_string(),
        language: Language::Java,
        functions: Vec::new(),
        statements: Vec::new(),
        imports: Vec::new(),
        types: Vec::new(),
        var_types: BTreeMap::new(),
    };
    let mut parser = Parser::new();
    if parser
        .set_language(&tree_sitter_java::LANGUAGE.into())
        .is_err()
    {
        return unit;
    }
    let Some(tree) = parser.parse(text, None) else {
        return unit;
    };
    let mut cx = Extractor {
        text,
        unit: &mut unit,
        scope: Vec::new(),
    };
    cx.walk_children(tree.root_node());
    unit
}

struct Extractor<'a> {
    text: &'a str,
    unit: &'a mut SourceUnit,
    scope: Vec<String>,
}

impl<'a> Extractor<'a> {
    fn node_text(&self, node: Node) -> &'a str {
        &self.text[node.byte_range()]
    }

    fn walk_children(&mut self, node: Node) {
        let mut cursor = node.walk();
        for child in node.named_children(&mut cursor) {
            self.walk(child);
        }
    }

    fn walk(&mut self, node: Node) {
        match node.kind() {
            "import_declaration" => self.import_decl(node),
            "package_declaration" => {}
            "class_declaration" | "interface_declaration" | "enum_declaration"
            | "record_declaration" | "annotation_type_declaration" => {
                let name = node
                    .child_by_field_name("name")
                    .map(|n| self.node_text(n).to_string())
                    .unwrap_or_else(|| "<anonymous>".to_string());
                let kind = match node.kind() {
                    "interface_declaration" => TypeKind::Interface,
                    "enum_declaration" => TypeKind::Enum,
                    "record_declaration" => TypeKind::Record,
                    "annotation_type_declaration" => TypeKind::Annotation,
                    _ => TypeKind::Class,
                };
                self.scope.push(name.clone());
                self.unit.types.push(TypeDecl {
                    name,
                    qualified_name: self.scope.join("."),
                    kind,
                    supertypes: self.supertypes(node),
                    line: node.start_position().row + 1,
                });
                if let Some(body) = node.child_by_field_name("body") {
                    self.walk_children(body);
                }
                self.scope.pop();
            }
            "method_declaration" | "constructor_declaration" => self.method_decl(node),
            "compact_constructor_declaration" => self.method_decl(node),
            "static_initializer" => {
                self.scope.push(STATIC_INIT_NAME.to_string());
                let start_line = node.start_position().row + 1;
                let end_line = node.end_position().row + 1;
                self.unit.functions.push(FunctionSpan {
                    name: STATIC_INIT_NAME.to_string(),
                    qualified_name: self.scope.join("."),
                    start_line,
                    end_line,
                    is_native_decl: false,
                    body_text: slice_lines(self.text, start_line, end_line),
                });
                self.walk_children(node);
                self.scope.pop();
            }
            "field_declaration" | "constant_declaration" | "local_variable_declaration" => {
                self.variable_declaration(node)
            }
            "expression_statement" => {
                let mut facts = Facts::default();
                let mut cursor = node.walk();
                let mut kind = StatementKind::Expression;
                for child in node.named_children(&mut cursor) {
                    if child.kind() == "assignment_expression" {
                        self.assignment_expression(child, &mut facts);
                        if !facts.defined.is_empty() {
                            kind = StatementKind::Assignment;
                        }
                    } else {
                        collect_expr(self, child, &mut facts);
                    }
                }
                self.push_statement(node, kind, facts);
            }
            "return_statement" | "throw_statement" | "assert_statement"
            | "synchronized_statement" | "yield_statement" => {
                let mut facts = Facts::default();
                let mut cursor = node.walk();
                for child in node.named_children(&mut cursor) {
                    if child.kind() == "block" {
                        continue;
                    }
                    collect_expr(self, child, &mut facts);
                }
                self.push_statement(node, StatementKind::Other, facts);
                // synchronized(expr) { body }
                let mut cursor = node.walk();
                for child in node.named_children(&mut cursor) {
                    if child.kind() == "block" {
                        self.walk_children(child);
                    }
                }
            }
            "if_statement" | "while_statement" | "do_statement" | "switch_expression" => {
                let mut facts = Facts::default();
                if let Some(cond) = node.child_by_field_name("condition") {
                    collect_expr(self, cond, &mut facts);
                }
                self.push_statement(node, StatementKind::Other, facts);
                for field in ["consequence", "alternative", "body"] {
                    if let Some(branch) = node.child_by_field_name(field) {
                        self.walk(branch);
                    }
                }
            }
            "for_statement" => {
                if let Some(init) = node.child_by_field_name("init") {
                    self.walk(init);
                }
                let mut facts = Facts::default();
                for field in ["condition", "update"] {
                    if let Some(part) = node.child_by_field_name(field) {
                        collect_expr(self, part, &mut facts);
                    }
                }
                self.push_statement(node, StatementKind::Other, facts);
                if let Some(body) = node.child_by_field_name("body") {
                    self.walk(body);
                }
            }
            "enhanced_for_statement" => {
                let mut facts = Facts::default();
                if let Some(name) = node.child_by_field_name("name") {
                    facts.defined.insert(self.node_text(name).to_string());
                }
                if let Some(value) = node.child_by_field_name("value") {
                    collect_expr(self, value, &mut facts);
                }
                if let Some(ty) = node.child_by_field_name("type") {
                    if let Some(name) = node.child_by_field_name("name") {
                        self.record_type(name, ty);
                    }
                }
                self.push_statement(node, StatementKind::Other, facts);
                if let Some(body) = node.child_by_field_name("body") {
                    self.walk(body);
                }
            }
            "try_statement" | "try_with_resources_statement" => {
                if let Some(resources) = node.child_by_field_name("resources") {
                    let mut cursor = resources.walk();
                    for r in resources.named_children(&mut cursor) {
                        if r.kind() == "resource" {
                            self.variable_declaration(r);
                        }
                    }
                }
                if let Some(body) = node.child_by_field_name("body") {
                    self.walk_children(body);
                }
                let mut cursor = node.walk();
                for child in node.named_children(&mut cursor) {
                    if child.kind() == "catch_clause" || child.kind() == "finally_clause" {
                        if let Some(b) = child.child_by_field_name("body") {
                            self.walk_children(b);
                        } else {
                            let mut c2 = child.walk();
                            for g in child.named_children(&mut c2) {
                                if g.kind() == "block" {
                                    self.walk_children(g);
                                }
                            }
                        }
                    }
                }
            }
            "labeled_statement" | "block" => self.walk_children(node),
            "switch_block" | "switch_block_statement_group" | "switch_rule" => {
                self.walk_children(node)
            }
            "line_comment" | "block_comment" | "modifiers" => {}
            "ERROR" => self.walk_children(node),
            _ => {
                if node.is_named() && !node.is_extra() {
                    // Unrecognized statement-level construct: record uses.
                    let mut facts = Facts::default();
                    collect_expr(self, node, &mut facts);
                    if !(facts.used.is_empty() && facts.calls.is_empty()) {
                        self.push_statement(node, StatementKind::Other, facts);
                    }
                }
            }
        }
    }

    fn import_decl(&mut self, node: Node) {
        let line = node.start_position().row + 1;
        let mut dotted = None;
        let mut wildcard = false;
        let mut cursor = node.walk();
        for child in node.children(&mut cursor) {
            match child.kind() {
                "scoped_identifier" | "identifier" => {
                    dotted = Some(self.node_text(child).to_string())
                }
                "asterisk" => wildcard = true,
                _ => {}
            }
        }
        if let Some(mut name) = dotted {
            if wildcard {
                name.push_str(".*");
            }
            self.unit.imports.push(ImportDecl {
                module_or_type: name,
                alias: None,
                line,
            });
        }
    }

    fn method_decl(&mut self, node: Node) {
        let name = node
            .child_by_field_name("name")
            .map(|n| self.node_text(n).to_string())
            .unwrap_or_else(|| "<anonymous>".to_string());
        let is_native_decl = self.has_modifier(node, "native");
        self.scope.push(name.clone());
        let start_line = node.start_position().row + 1;
        let end_line = node.end_position().row + 1;
        self.unit.functions.push(FunctionSpan {
            name,
            qualified_name: self.scope.join("."),
            start_line,
            end_line,
            is_native_decl,
            body_text: slice_lines(self.text, start_line, end_line),
        });
        // Parameter declared types feed receiver resolution.
        if let Some(params) = node.child_by_field_name("parameters") {
            let mut cursor = params.walk();
            for p in params.named_children(&mut cursor) {
                if p.kind() == "formal_parameter" {
                    if let (Some(ty), Some(pname)) =
                        (p.child_by_field_name("type"), p.child_by_field_name("name"))
                    {
                        self.record_type(pname, ty);
                    }
                }
            }
        }
        if let Some(body) = node.child_by_field_name("body") {
            self.walk_children(body);
        }
        self.scope.pop();
    }

    /// Simple names of `extends`/`implements` types of a type declaration.
    fn supertypes(&self, node: Node) -> Vec<String> {
        let mut out = Vec::new();
        let mut cursor = node.walk();
        for child in node.children(&mut cursor) {
            match child.kind() {
                "superclass" | "super_interfaces" | "extends_interfaces" => {
                    collect_type_names(self, child, &mut out);
                }
                _ => {}
            }
        }
        out
    }

    fn has_modifier(&self, node: Node, modifier: &str) -> bool {
        let mut cursor = node.walk();
        for child in node.children(&mut cursor) {
            if child.kind() == "modifiers" {
                let mut c2 = child.walk();
                for m in child.children(&mut c2) {
                    if m.kind() == modifier {
                        return true;
                    }
                }
            }
        }
        false
    }

    fn variable_declaration(&mut self, node: Node) {
        let ty = node.child_by_field_name("type");
        let mut facts = Facts::default();
        let mut has_value = false;
        let mut cursor = node.walk();
        for decl in node.children_by_field_name("declarator", &mut cursor) {
            let Some(name) = decl.child_by_field_name("name") else {
                continue;
            };
            facts.defined.insert(self.node_text(name).to_string());
            if let Some(ty) = ty {
                self.record_type(name, ty);
            }
            if let Some(value) = decl.child_by_field_name("value") {
                has_value = true;
                collect_expr(self, value, &mut facts);
                self.record_constructed_type(name, value);
            }
        }
        let kind = if has_value && !facts.defined.is_empty() {
            StatementKind::Assignment
        } else {
            StatementKind::Other
        };
        self.push_statement(node, kind, facts);
    }

    fn assignment_expression(&mut self, node: Node, facts: &mut Facts) {
        if let Some(left) = node.child_by_field_name("left") {
            match left.kind() {
                "identifier" => {
                    facts.defined.insert(self.node_text(left).to_string());
                    if let Some(right) = node.child_by_field_name("right") {
                        self.record_constructed_type(left, right);
                    }
                }
                _ => collect_expr(self, left, facts),
            }
        }
        if let Some(right) = node.child_by_field_name("right") {
            if right.kind() == "assignment_expression" {
                self.assignment_expression(right, facts);
            } else {
                collect_expr(self, right, facts);
            }
        }
    }

    /// `T x = ...` / `void m(T x)` records `x -> T`.
    fn record_type(&mut self, name: Node, ty: Node) {
        let base = base_type_name(self, ty);
        if !base.is_empty() {
            self.unit
                .var_types
                .insert(self.node_text(name).to_string(), base);
        }
    }

    /// `x = new T(..)` and `x = (T) expr` also pin `x`'s type.
    fn record_constructed_type(&mut self, name: Node, value: Node) {
        let mut v = value;
        loop {
            match v.kind() {
                "cast_expression" | "parenthesized_expression" => {
                    let next = v
                        .child_by_field_name("value")
                        .or_else(|| v.named_child(v.named_child_count().saturating_sub(1)));
                    match next {
                        Some(n) => {
                            if v.kind() == "cast_expression" {
                                if let Some(ty) = v.child_by_field_name("type") {
                                    self.record_type(name, ty);
                                    return;
                                }
                            }
                            v = n;
                        }
                        None => return,
                    }
                }
                "object_creation_expression" => {
                    if let Some(ty) = v.child_by_field_name("type") {
                        self.record_type(name, ty);
                    }
                    return;
                }
                _ => return,
            }
        }
    }

    fn push_statement(&mut self, node: Node, kind: StatementKind, facts: Facts) {
        let kind = if facts
            .calls
            .iter()
            .any(|c| super::is_load_call(Language::Java, c))
        {
            StatementKind::LoadDecl
        } else {
            kind
        };
        self.unit.statements.push(Statement {
            line: node.start_position().row + 1,
            column: node.start_position().column,
            kind,
            defined_vars: facts.defined,
            used_vars: facts.used,
            calls: facts.calls,
            is_return: node.kind() == "return_statement",
        });
    }
}

#[derive(Default)]
struct Facts {
    defined: BTreeSet<String>,
    used: BTreeSet<String>,
    calls: Vec<CallExpr>,
}

fn collect_type_names(cx: &Extractor, node: Node, out: &mut Vec<String>) {
    match node.kind() {
        "type_identifier" => out.push(cx.node_text(node).to_string()),
        "scoped_type_identifier" => {
            let text = cx.node_text(node);
            out.push(text.rsplit('.').next().unwrap_or(text).to_string());
        }
        "generic_type" => {
            if let Some(base) = node.named_child(0) {
                collect_type_names(cx, base, out);
            }
        }
        _ => {
            let mut cursor = node.walk();
            for child in node.named_children(&mut cursor) {
                collect_type_names(cx, child, out);
            }
        }
    }
}

fn base_type_name(cx: &Extractor, ty: Node) -> String {
    match ty.kind() {
        "type_identifier" => cx.node_text(ty).to_string(),
        "scoped_type_identifier" => cx
            .node_text(ty)
            .rsplit('.')
            .next()
            .unwrap_or_default()
            .to_string(),
        "generic_type" => ty
            .named_child(0)
            .map(|n| base_type_name(cx, n))
            .unwrap_or_default(),
        "array_type" => ty
            .child_by_field_name("element")
            .map(|n| base_type_name(cx, n))
            .unwrap_or_default(),
        _ => String::new(),
    }
}

/// Dotted text of a pure identifier/field-access chain, `None` otherwise.
fn pure_chain(cx: &Extractor, node: Node) -> Option<String> {
    match node.kind() {
        "identifier" | "this" | "super" => Some(cx.node_text(node).to_string()),
        "field_access" => {
            let object = pure_chain(cx, node.child_by_field_name("object")?)?;
            let field = node.child_by_field_name("field")?;
            Some(format!("{object}.{}", cx.node_text(field)))
        }
        _ => None,
    }
}

fn chain_head(chain: &str) -> &str {
    chain.split('.').next().unwrap_or(chain)
}

fn collect_expr(cx: &mut Extractor, node: Node, facts: &mut Facts) {
    match node.kind() {
        "identifier" => {
            facts.used.insert(cx.node_text(node).to_string());
        }
        "field_access" => {
            if let Some(chain) = pure_chain(cx, node) {
                facts.used.insert(chain_head(&chain).to_string());
                facts.used.insert(chain);
            } else if let Some(object) = node.child_by_field_name("object") {
                collect_expr(cx, object, facts);
            }
        }
        "method_invocation" => {
            let line = node.start_position().row + 1;
            let callee = node
                .child_by_field_name("name")
                .map(|n| cx.node_text(n).to_string())
                .unwrap_or_default();
            let mut receiver = None;
            if let Some(object) = node.child_by_field_name("object") {
                if let Some(chain) = pure_chain(cx, object) {
                    facts.used.insert(chain_head(&chain).to_string());
                    facts.used.insert(chain.clone());
                    receiver = Some(chain);
                } else {
                    collect_expr(cx, object, facts);
                }
            }
            let mut arg_vars = BTreeSet::new();
            if let Some(args) = node.child_by_field_name("arguments") {
                let before = facts.used.clone();
                let mut cursor = args.walk();
                for arg in args.named_children(&mut cursor) {
                    collect_expr(cx, arg, facts);
                }
                for v in facts.used.difference(&before) {
                    if !v.contains('.') {
                        arg_vars.insert(v.clone());
                    }
                }
            }
            if !callee.is_empty() {
                facts.calls.push(CallExpr {
                    receiver,
                    callee,
                    arg_vars,
                    line,
                });
            }
        }
        "object_creation_expression" => {
            if let Some(args) = node.child_by_field_name("arguments") {
                let mut cursor = args.walk();
                for arg in args.named_children(&mut cursor) {
                    collect_expr(cx, arg, facts);
                }
            }
        }
        "lambda_expression" => {
            if let Some(body) = node.child_by_field_name("body") {
                collect_expr(cx, body, facts);
            }
        }
        "type_identifier" | "string_literal" | "character_literal" | "null_literal"
        | "class_literal" => {}
        _ => {
            let mut cursor = node.walk();
            for child in node.named_children(&mut cursor) {
                collect_expr(cx, child, facts);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::source_model::{parse_unit, Language, StatementKind};

    const CALLER: &str = "public class NativeCaller {\n    public static void main(String[] args) {\n        NativeMethod nativeMethod = new NativeMethod();\n        int x = 10;\n        int var_a = nativeMethod.getValue();\n        int var_b = x / var_a;\n        int var_c = 0;\n        var_c = var_c + var_b;\n        int var_d = func(var_c);\n    }\n}\n";

    #[test]
    fn declared_and_constructed_types_are_tracked() {
        let unit = parse_unit("NativeCaller.java", CALLER.as_bytes(), Language::Java).unwrap();
        assert_eq!(
            unit.var_types.get("nativeMethod").map(String::as_str),
            Some("NativeMethod")
        );
    }

    #[test]
    fn assignment_chain_defs_and_uses() {
        let unit = parse_unit("NativeCaller.java", CALLER.as_bytes(), Language::Java).unwrap();
        let var_b = unit
            .statements
            .iter()
            .find(|s| s.defined_vars.contains("var_b"))
            .unwrap();
        assert_eq!(var_b.kind, StatementKind::Assignment);
        assert!(var_b.used_vars.contains("x") && var_b.used_vars.contains("var_a"));

        let var_c = unit
            .statements
            .iter()
            .find(|s| s.line == 8)
            .unwrap();
        assert!(var_c.defined_vars.contains("var_c"));
        assert!(var_c.used_vars.contains("var_c") && var_c.used_vars.contains("var_b"));

        let var_d = unit
            .statements
            .iter()
            .find(|s| s.defined_vars.contains("var_d"))
            .unwrap();
        assert_eq!(var_d.calls[0].callee, "func");
        assert!(var_d.calls[0].arg_vars.contains("var_c"));
    }

    #[test]
    fn jna_interface_constant_is_a_load_decl() {
        let src = "import com.sun.jna.Library;\nimport com.sun.jna.Native;\npublic interface CLibrary extends Library {\n    CLibrary INSTANCE = (CLibrary) Native.load(\"c\", CLibrary.class);\n    void printf(String format, Object... args);\n}\n";
        let unit = parse_unit("CLibrary.java", src.as_bytes(), Language::Java).unwrap();
        let inst = unit
            .statements
            .iter()
            .find(|s| s.defined_vars.contains("INSTANCE"))
            .unwrap();
        assert_eq!(inst.kind, StatementKind::LoadDecl);
        assert_eq!(inst.calls[0].receiver.as_deref(), Some("Native"));
        assert_eq!(unit.var_types.get("INSTANCE").map(String::as_str), Some("CLibrary"));
        let decl = unit.types.iter().find(|t| t.name == "CLibrary").unwrap();
        assert_eq!(decl.kind, crate::source_model::TypeKind::Interface);
        assert_eq!(decl.supertypes, vec!["Library".to_string()]);
        // The bodiless interface method is not native.
        let printf = unit.functions.iter().find(|f| f.name == "printf").unwrap();
        assert!(!printf.is_native_decl);
    }

    #[test]
    fn native_modifier_is_detected() {
        let src = "public class N {\n    public native int getValue();\n    public int plain() { return 1; }\n}\n";
        let unit = parse_unit("N.java", src.as_bytes(), Language::Java).unwrap();
        assert!(unit.functions.iter().find(|f| f.name == "getValue").unwrap().is_native_decl);
        assert!(!unit.functions.iter().find(|f| f.name == "plain").unwrap().is_native_decl);
    }

    #[test]
    fn field_chain_receiver_is_preserved() {
        let src = "public class M {\n    void run() {\n        CLibrary.INSTANCE.printf(\"hi\");\n    }\n}\n";
        let unit = parse_unit("M.java", src.as_bytes(), Language::Java).unwrap();
        let stmt = unit.statements.iter().find(|s| !s.calls.is_empty()).unwrap();
        assert_eq!(stmt.calls[0].receiver.as_deref(), Some("CLibrary.INSTANCE"));
        assert_eq!(stmt.calls[0].callee, "printf");
    }
}
