//! Python front end built on tree-sitter.

use std::collections::{BTreeMap, BTreeSet};

use tree_sitter::{Node, Parser};

use super::{
    slice_lines, CallExpr, FunctionSpan, ImportDecl, Language, SourceUnit, Statement,
    StatementKind, TypeDecl, TypeKind,
};

pub(super) fn extract(path: &str, text: &str) -> SourceUnit {
    let mut unit = SourceUnit {
        path: path.to_string(),
        language: Language::Python,
        functions: Vec::new(),
        statements: Vec::new(),
        imports: Vec::new(),
        types: Vec::new(),
        var_types: BTreeMap::new(),
    };
    let mut parser = Parser::new();
    if parser
        .set_language(&tree_sitter_python::LANGUAGE.into())
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
    cx.walk_block(tree.root_node());
    unit
}

struct Extractor<'a> {
    text: &'a str,
    unit: &'a mut SourceUnit,
    /// Enclosing class/function names, innermost last.
    scope: Vec<String>,
}

impl<'a> Extractor<'a> {
    fn node_text(&self, node: Node) -> &'a str {
        &self.text[node.byte_range()]
    }

    fn walk_block(&mut self, node: Node) {
        let mut cursor = node.walk();
        for child in node.named_children(&mut cursor) {
            self.walk_statement(child);
        }
    }

    fn walk_statement(&mut self, node: Node) {
        match node.kind() {
            "function_definition" => self.function_def(node, node.start_position().row + 1),
            "decorated_definition" => {
                let deco_start = node.start_position().row + 1;
                if let Some(def) = node.child_by_field_name("definition") {
                    match def.kind() {
                        "function_definition" => self.function_def(def, deco_start),
                        "class_definition" => self.class_def(def),
                        _ => {}
                    }
                }
            }
            "class_definition" => self.class_def(node),
            "import_statement" => self.import_plain(node),
            "import_from_statement" => self.import_from(node),
            "future_import_statement" => {}
            "expression_statement" => {
                let mut cursor = node.walk();
                for expr in node.named_children(&mut cursor) {
                    self.emit_expression_statement(expr, node);
                }
            }
            "if_statement" => {
                if let Some(cond) = node.child_by_field_name("condition") {
                    self.emit_header(node, &[], &[cond]);
                }
                if let Some(body) = node.child_by_field_name("consequence") {
                    self.walk_block(body);
                }
                let mut cursor = node.walk();
                for alt in node.children_by_field_name("alternative", &mut cursor) {
                    self.walk_statement(alt);
                }
            }
            "elif_clause" => {
                if let Some(cond) = node.child_by_field_name("condition") {
                    self.emit_header(node, &[], &[cond]);
                }
                if let Some(body) = node.child_by_field_name("consequence") {
                    self.walk_block(body);
                }
            }
            "else_clause" => {
                if let Some(body) = node.child_by_field_name("body") {
                    self.walk_block(body);
                }
            }
            "while_statement" => {
                if let Some(cond) = node.child_by_field_name("condition") {
                    self.emit_header(node, &[], &[cond]);
                }
                if let Some(body) = node.child_by_field_name("body") {
                    self.walk_block(body);
                }
            }
            "for_statement" => {
                let defs: Vec<Node> = node.child_by_field_name("left").into_iter().collect();
                let uses: Vec<Node> = node.child_by_field_name("right").into_iter().collect();
                self.emit_compound(node, &defs, &uses);
                if let Some(body) = node.child_by_field_name("body") {
                    self.walk_block(body);
                }
            }
            "with_statement" => {
                self.with_header(node);
                if let Some(body) = node.child_by_field_name("body") {
                    self.walk_block(body);
                }
            }
            "try_statement" => {
                if let Some(body) = node.child_by_field_name("body") {
                    self.walk_block(body);
                }
                let mut cursor = node.walk();
                for child in node.named_children(&mut cursor) {
                    match child.kind() {
                        "except_clause" | "except_group_clause" => self.except_clause(child),
                        "finally_clause" | "else_clause" => {
                            if let Some(b) = child.child_by_field_name("body") {
                                self.walk_block(b);
                            } else {
                                let mut c2 = child.walk();
                                for g in child.named_children(&mut c2) {
                                    if g.kind() == "block" {
                                        self.walk_block(g);
                                    }
                                }
                            }
                        }
                        _ => {}
                    }
                }
            }
            "match_statement" => {
                let uses: Vec<Node> = node.child_by_field_name("subject").into_iter().collect();
                self.emit_header(node, &[], &uses);
                if let Some(body) = node.child_by_field_name("body") {
                    let mut cursor = body.walk();
                    for case in body.named_children(&mut cursor) {
                        if let Some(cons) = case.child_by_field_name("consequence") {
                            self.walk_block(cons);
                        }
                    }
                }
            }
            "return_statement" | "raise_statement" | "assert_statement" | "delete_statement"
            | "print_statement" | "exec_statement" | "global_statement"
            | "nonlocal_statement" => {
                self.emit_simple(node, StatementKind::Other);
            }
            "pass_statement" | "break_statement" | "continue_statement" | "comment" => {}
            "block" => self.walk_block(node),
            "ERROR" => {
                // Salvage whatever parsed inside a broken region.
                let mut cursor = node.walk();
                for child in node.named_children(&mut cursor) {
                    match child.kind() {
                        "assignment" | "augmented_assignment" => {
                            self.emit_assignment(child, child)
                        }
                        _ => self.walk_statement(child),
                    }
                }
            }
            _ => {
                // Unrecognized statement-level construct: best-effort record.
                if node.is_named() && !node.is_extra() {
                    self.emit_simple(node, StatementKind::Other);
                }
            }
        }
    }

    fn function_def(&mut self, def: Node, start_line: usize) {
        let name = def
            .child_by_field_name("name")
            .map(|n| self.node_text(n).to_string())
            .unwrap_or_else(|| "<anonymous>".to_string());
        self.scope.push(name.clone());
        let qualified_name = self.scope.join(".");
        let end_line = def.end_position().row + 1;
        self.unit.functions.push(FunctionSpan {
            name,
            qualified_name,
            start_line,
            end_line,
            is_native_decl: false,
            body_text: slice_lines(self.text, start_line, end_line),
        });
        if let Some(body) = def.child_by_field_name("body") {
            self.walk_block(body);
        }
        self.scope.pop();
    }

    fn class_def(&mut self, node: Node) {
        let name = node
            .child_by_field_name("name")
            .map(|n| self.node_text(n).to_string())
            .unwrap_or_else(|| "<anonymous>".to_string());
        let mut supertypes = Vec::new();
        if let Some(supers) = node.child_by_field_name("superclasses") {
            let mut cursor = supers.walk();
            for s in supers.named_children(&mut cursor) {
                if let Some(chain) = pure_chain(self, s) {
                    supertypes.push(chain.rsplit('.').next().unwrap_or(&chain).to_string());
                }
            }
        }
        self.scope.push(name.clone());
        self.unit.types.push(TypeDecl {
            name,
            qualified_name: self.scope.join("."),
            kind: TypeKind::Class,
            supertypes,
            line: node.start_position().row + 1,
        });
        if let Some(body) = node.child_by_field_name("body") {
            self.walk_block(body);
        }
        self.scope.pop();
    }

    fn import_plain(&mut self, node: Node) {
        let line = node.start_position().row + 1;
        let mut cursor = node.walk();
        for child in node.children_by_field_name("name", &mut cursor) {
            match child.kind() {
                "dotted_name" => self.unit.imports.push(ImportDecl {
                    module_or_type: self.node_text(child).to_string(),
                    alias: None,
                    line,
                }),
                "aliased_import" => {
                    let module = child
                        .child_by_field_name("name")
                        .map(|n| self.node_text(n).to_string())
                        .unwrap_or_default();
                    let alias = child
                        .child_by_field_name("alias")
                        .map(|n| self.node_text(n).to_string());
                    self.unit.imports.push(ImportDecl {
                        module_or_type: module,
                        alias,
                        line,
                    });
                }
                _ => {}
            }
        }
    }

    fn import_from(&mut self, node: Node) {
        let line = node.start_position().row + 1;
        let module = node
            .child_by_field_name("module_name")
            .map(|n| self.node_text(n).to_string())
            .unwrap_or_default();
        let mut cursor = node.walk();
        for child in node.children_by_field_name("name", &mut cursor) {
            match child.kind() {
                "dotted_name" => {
                    let imported = self.node_text(child).to_string();
                    self.unit.imports.push(ImportDecl {
                        module_or_type: format!("{module}.{imported}"),
                        alias: Some(imported),
                        line,
                    });
                }
                "aliased_import" => {
                    let imported = child
                        .child_by_field_name("name")
                        .map(|n| self.node_text(n).to_string())
                        .unwrap_or_default();
                    let alias = child
                        .child_by_field_name("alias")
                        .map(|n| self.node_text(n).to_string());
                    self.unit.imports.push(ImportDecl {
                        module_or_type: format!("{module}.{imported}"),
                        alias,
                        line,
                    });
                }
                _ => {}
            }
        }
        // Wildcard: `from m import *`.
        if node.named_child_count() == 1 {
            self.unit.imports.push(ImportDecl {
                module_or_type: format!("{module}.*"),
                alias: None,
                line,
            });
        }
    }

    fn with_header(&mut self, node: Node) {
        let mut defs = Vec::new();
        let mut uses = Vec::new();
        let mut cursor = node.walk();
        for clause in node.named_children(&mut cursor) {
            if clause.kind() != "with_clause" {
                continue;
            }
            let mut c2 = clause.walk();
            for item in clause.named_children(&mut c2) {
                let Some(value) = item.child_by_field_name("value") else {
                    continue;
                };
                if value.kind() == "as_pattern" {
                    if let Some(v) = value.child(0) {
                        uses.push(v);
                    }
                    if let Some(alias) = value.child_by_field_name("alias") {
                        defs.push(alias);
                    }
                } else {
                    uses.push(value);
                }
            }
        }
        self.emit_compound(node, &defs, &uses);
    }

    fn except_clause(&mut self, node: Node) {
        if let Some(value) = node.child_by_field_name("value") {
            if value.kind() == "as_pattern" {
                let defs: Vec<Node> = value.child_by_field_name("alias").into_iter().collect();
                self.emit_compound(node, &defs, &[]);
            }
        }
        let mut cursor = node.walk();
        for child in node.named_children(&mut cursor) {
            if child.kind() == "block" {
                self.walk_block(child);
            }
        }
    }

    fn emit_expression_statement(&mut self, expr: Node, stmt_node: Node) {
        match expr.kind() {
            "assignment" | "augmented_assignment" => self.emit_assignment(expr, stmt_node),
            "string" => {} // bare string expression (docstring position): no facts
            _ => {
                let mut facts = Facts::default();
                collect_expr(self, expr, &mut facts);
                self.push_statement(stmt_node, StatementKind::Expression, facts);
            }
        }
    }

    fn emit_assignment(&mut self, assign: Node, stmt_node: Node) {
        let mut facts = Facts::default();
        if let Some(left) = assign.child_by_field_name("left") {
            collect_targets(self, left, &mut facts);
        }
        let mut right = assign.child_by_field_name("right");
        // Chained `a = b = rhs` nests assignments on the right.
        while let Some(r) = right {
            if r.kind() == "assignment" {
                if let Some(left) = r.child_by_field_name("left") {
                    collect_targets(self, left, &mut facts);
                }
                right = r.child_by_field_name("right");
            } else {
                collect_expr(self, r, &mut facts);
                break;
            }
        }
        let kind = if facts.defined.is_empty() {
            StatementKind::Expression
        } else {
            StatementKind::Assignment
        };
        self.push_statement(stmt_node, kind, facts);
    }

    fn emit_simple(&mut self, node: Node, kind: StatementKind) {
        let mut facts = Facts::default();
        let mut cursor = node.walk();
        for child in node.named_children(&mut cursor) {
            collect_expr(self, child, &mut facts);
        }
        self.push_statement(node, kind, facts);
    }

    fn emit_header(&mut self, node: Node, defs: &[Node], uses: &[Node]) {
        self.emit_compound(node, defs, uses);
    }

    fn emit_compound(&mut self, node: Node, defs: &[Node], uses: &[Node]) {
        let mut facts = Facts::default();
        for d in defs {
            collect_targets(self, *d, &mut facts);
        }
        for u in uses {
            collect_expr(self, *u, &mut facts);
        }
        self.push_statement(node, StatementKind::Other, facts);
    }

    fn push_statement(&mut self, node: Node, kind: StatementKind, facts: Facts) {
        let kind = if facts
            .calls
            .iter()
            .any(|c| super::is_load_call(Language::Python, c))
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

/// Returns the dotted text of a pure identifier/attribute chain (`a.b.c`),
/// or `None` when any link is a call, subscript, or other expression.
fn pure_chain(cx: &Extractor, node: Node) -> Option<String> {
    match node.kind() {
        "identifier" => Some(cx.node_text(node).to_string()),
        "attribute" => {
            let object = pure_chain(cx, node.child_by_field_name("object")?)?;
            let attr = node.child_by_field_name("attribute")?;
            Some(format!("{object}.{}", cx.node_text(attr)))
        }
        _ => None,
    }
}

fn chain_head(chain: &str) -> &str {
    chain.split('.').next().unwrap_or(chain)
}

/// Records assignment-target facts: identifiers (and identifier patterns)
/// define; attribute/subscript targets only use their base.
fn collect_targets(cx: &Extractor, node: Node, facts: &mut Facts) {
    match node.kind() {
        "identifier" => {
            facts.defined.insert(cx.node_text(node).to_string());
        }
        "pattern_list" | "tuple_pattern" | "list_pattern" => {
            let mut cursor = node.walk();
            for child in node.named_children(&mut cursor) {
                collect_targets(cx, child, facts);
            }
        }
        "list_splat_pattern" => {
            if let Some(inner) = node.named_child(0) {
                collect_targets(cx, inner, facts);
            }
        }
        "attribute" | "subscript" => {
            collect_expr(cx, node, facts);
        }
        _ => collect_expr(cx, node, facts),
    }
}

/// Records use/call facts for an expression subtree.
fn collect_expr(cx: &Extractor, node: Node, facts: &mut Facts) {
    match node.kind() {
        "identifier" => {
            facts.used.insert(cx.node_text(node).to_string());
        }
        "attribute" => {
            if let Some(chain) = pure_chain(cx, node) {
                facts.used.insert(chain_head(&chain).to_string());
                facts.used.insert(chain);
            } else {
                // Mixed chain like `f(x).attr`: only the object side holds vars.
                if let Some(object) = node.child_by_field_name("object") {
                    collect_expr(cx, object, facts);
                }
            }
        }
        "call" => {
            let line = node.start_position().row + 1;
            let mut receiver = None;
            let mut callee = String::new();
            if let Some(function) = node.child_by_field_name("function") {
                match function.kind() {
                    "identifier" => callee = cx.node_text(function).to_string(),
                    "attribute" => {
                        if let Some(attr) = function.child_by_field_name("attribute") {
                            callee = cx.node_text(attr).to_string();
                        }
                        if let Some(object) = function.child_by_field_name("object") {
                            if let Some(chain) = pure_chain(cx, object) {
                                facts.used.insert(chain_head(&chain).to_string());
                                facts.used.insert(chain.clone());
                                receiver = Some(chain);
                            } else {
                                collect_expr(cx, object, facts);
                            }
                        }
                    }
                    _ => collect_expr(cx, function, facts),
                }
            }
            let mut arg_vars = BTreeSet::new();
            if let Some(args) = node.child_by_field_name("arguments") {
                let before: BTreeSet<String> = facts.used.clone();
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
        "keyword_argument" => {
            if let Some(value) = node.child_by_field_name("value") {
                collect_expr(cx, value, facts);
            }
        }
        "lambda" => {
            if let Some(body) = node.child_by_field_name("body") {
                collect_expr(cx, body, facts);
            }
        }
        "string" => {
            // f-string interpolations may reference variables.
            let mut cursor = node.walk();
            for child in node.named_children(&mut cursor) {
                if child.kind() == "interpolation" {
                    collect_expr(cx, child, facts);
                }
            }
        }
        _ => {
            let mut cursor = node.walk();
            for child in node.named_children(&mut cursor) {
                collect_expr(cx, child, facts);
            }
        }
    }
}
