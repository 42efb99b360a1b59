use std::cell::RefCell;
use std::collections::HashSet;

use tree_sitter::{Node, Parser};

use super::{
    ClassBases, CodeSpan, DefFact, DefKind, FileFacts, ImportFact, ParseError,
    ParseFailure, ReadForm, ReaderKind, SourceUnit, UseFact,
};

thread_local! {
    static PARSER: RefCell<Parser> = RefCell::new({
        let mut parser = Parser::new();
        parser
            .set_language(&tree_sitter_python::LANGUAGE.into())
            .expect("tree-sitter-python grammar is ABI compatible");
        parser
    });
}

/// Extract symbol, import, inheritance and read facts from one file.
///
/// Only module-level and directly class-scoped definitions become facts.
/// Definitions under module-level `if`/`try`/`with`/loop blocks are included,
/// except the body of an `if __name__ == "__main__":` guard.
// The error carries the partial facts, so it is as large as the success.
#[allow(clippy::result_large_err)]
pub fn extract_facts(unit: &SourceUnit) -> Result<FileFacts, ParseFailure> {
    let facts = FileFacts::module_only(&unit.file_path);
    if unit.content.trim().is_empty() {
        return Ok(facts);
    }
    let tree = PARSER.with(|p| p.borrow_mut().parse(&unit.content, None));
    let Some(tree) = tree else {
        return Err(failure(facts, 1, 1, "parser produced no tree".into()));
    };
    let root = tree.root_node();
    if root.has_error() {
        let bad = first_error(root).unwrap_or(root);
        let pos = bad.start_position();
        let message = if bad.is_missing() {
            format!("missing `{}`", bad.kind())
        } else {
            let text = node_text(bad, &unit.content);
            let token: String = text.chars().take(20).collect();
            format!("invalid syntax near `{}`", token.trim())
        };
        return Err(failure(facts, pos.row + 1, pos.column + 1, message));
    }

    let mut ex = Extractor {
        src: &unit.content,
        facts,
        seen: HashSet::new(),
        seen_uses: HashSet::new(),
    };
    ex.module_block(root);
    Ok(ex.facts)
}

fn failure(mut facts: FileFacts, line: usize, column: usize, message: String) -> ParseFailure {
    facts.parse_failed = true;
    ParseFailure {
        error: ParseError {
            file_path: facts.file_path.clone(),
            line,
            column,
            message,
        },
        facts,
    }
}

fn first_error(node: Node) -> Option<Node> {
    if node.is_error() || node.is_missing() {
        return Some(node);
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        if child.has_error() || child.is_missing() {
            if let Some(found) = first_error(child) {
                return Some(found);
            }
        }
    }
    None
}

fn node_text<'s>(node: Node, src: &'s str) -> &'s str {
    &src[node.start_byte()..node.end_byte()]
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn named_children(node: Node) -> Vec<Node> {
    let mut cursor = node.walk();
    node.named_children(&mut cursor).collect()
}

fn children(node: Node) -> Vec<Node> {
    let mut cursor = node.walk();
    node.children(&mut cursor).collect()
}

/// Blocks nested directly under a compound statement (if/try/with/for/while).
fn nested_blocks<'t>(stmt: Node<'t>, src: &str) -> Vec<Node<'t>> {
    fn collect<'t>(node: Node<'t>, out: &mut Vec<Node<'t>>) {
        for child in children(node) {
            match child.kind() {
                "block" => out.push(child),
                "elif_clause" | "else_clause" | "except_clause" | "except_group_clause"
                | "finally_clause" => collect(child, out),
                _ => {}
            }
        }
    }
    let mut out = Vec::new();
    match stmt.kind() {
        "if_statement" => {
            let guarded = stmt
                .child_by_field_name("condition")
                .is_some_and(|c| is_main_guard(node_text(c, src)));
            for child in children(stmt) {
                match child.kind() {
                    "block" if !guarded => out.push(child),
                    "elif_clause" | "else_clause" => collect(child, &mut out),
                    _ => {}
                }
            }
        }
        "try_statement" | "with_statement" | "for_statement" | "while_statement" => {
            collect(stmt, &mut out)
        }
        _ => {}
    }
    out
}

fn is_main_guard(cond: &str) -> bool {
    let c: String = cond.chars().filter(|c| !c.is_whitespace()).collect();
    let c = c.replace('\'', "\"");
    c == "__name__==\"__main__\"" || c == "\"__main__\"==__name__"
}

/// The statement wrapping an assignment, so spans cover the whole statement.
fn assignment_of(stmt: Node) -> Option<Node> {
    if stmt.kind() != "expression_statement" {
        return None;
    }
    named_children(stmt)
        .into_iter()
        .find(|c| c.kind() == "assignment")
}

/// Simple-name targets of an assignment, following `a = b = ...` chains.
fn assignment_name_targets<'t>(assign: Node<'t>, src: &'t str, out: &mut Vec<(String, Node<'t>)>) {
    if let Some(left) = assign.child_by_field_name("left") {
        pattern_names(left, src, out);
    }
    if let Some(right) = assign.child_by_field_name("right") {
        if right.kind() == "assignment" {
            assignment_name_targets(right, src, out);
        }
    }
}

fn pattern_names<'t>(pattern: Node<'t>, src: &'t str, out: &mut Vec<(String, Node<'t>)>) {
    match pattern.kind() {
        "identifier" => out.push((node_text(pattern, src).to_string(), pattern)),
        "pattern_list" | "tuple_pattern" | "list_pattern" | "list_splat_pattern" => {
            for child in named_children(pattern) {
                pattern_names(child, src, out);
            }
        }
        _ => {}
    }
}

fn string_literal_value(node: Node, src: &str) -> Option<String> {
    if node.kind() != "string" {
        return None;
    }
    let mut value = String::new();
    for child in named_children(node) {
        match child.kind() {
            "string_content" => value.push_str(node_text(child, src)),
            "string_start" | "string_end" => {}
            _ => return None,
        }
    }
    Some(value)
}

fn literal_string_list(node: Node, src: &str) -> Option<Vec<String>> {
    if !matches!(node.kind(), "list" | "tuple") {
        return None;
    }
    named_children(node)
        .into_iter()
        .filter(|c| c.kind() != "comment")
        .map(|c| string_literal_value(c, src))
        .collect()
}

struct Extractor<'s> {
    src: &'s str,
    facts: FileFacts,
    seen: HashSet<(DefKind, String)>,
    seen_uses: HashSet<(String, String, ReadForm)>,
}

impl<'s> Extractor<'s> {
    fn span(&self, node: Node) -> CodeSpan {
        CodeSpan {
            file_path: self.facts.file_path.clone(),
            start_byte: node.start_byte(),
            end_byte: node.end_byte(),
            start_line: node.start_position().row + 1,
            end_line: node.end_position().row + 1,
        }
    }

    fn push_def(&mut self, def: DefFact) {
        if self.seen.insert((def.kind, def.qualified_name.clone())) {
            self.facts.definitions.push(def);
        }
    }

    fn signature(&self, def: Node) -> String {
        let colon_end = children(def)
            .into_iter()
            .filter(|c| c.kind() == ":")
            .map(|c| c.end_byte())
            .next_back()
            .unwrap_or(def.end_byte());
        collapse_ws(&self.src[def.start_byte()..colon_end])
    }

    fn module_block(&mut self, block: Node) {
        for stmt in named_children(block) {
            self.module_statement(stmt);
        }
    }

    fn module_statement(&mut self, stmt: Node) {
        match stmt.kind() {
            "class_definition" => self.class_def(stmt, stmt),
            "function_definition" => self.function_def(stmt, stmt),
            "decorated_definition" => {
                if let Some(def) = stmt.child_by_field_name("definition") {
                    match def.kind() {
                        "class_definition" => self.class_def(def, stmt),
                        "function_definition" => self.function_def(def, stmt),
                        _ => {}
                    }
                }
            }
            "expression_statement" => self.module_assignment(stmt),
            "import_statement" | "import_from_statement" => self.import(stmt),
            _ => {
                for block in nested_blocks(stmt, self.src) {
                    self.module_block(block);
                }
            }
        }
    }

    fn module_assignment(&mut self, stmt: Node) {
        for child in named_children(stmt) {
            match child.kind() {
                "assignment" => {
                    let mut targets = Vec::new();
                    assignment_name_targets(child, self.src, &mut targets);
                    for (name, _) in targets {
                        if name == "__all__" {
                            if let Some(list) = child
                                .child_by_field_name("right")
                                .and_then(|r| literal_string_list(r, self.src))
                            {
                                self.facts.exports = Some(list);
                            }
                        }
                        let def = DefFact {
                            kind: DefKind::GlobalVariable,
                            qualified_name: format!("{}.{}", self.facts.module_name, name),
                            name,
                            enclosing_class: None,
                            signature: None,
                            span: self.span(stmt),
                        };
                        self.push_def(def);
                    }
                }
                "augmented_assignment" => {
                    let is_all = child
                        .child_by_field_name("left")
                        .is_some_and(|l| node_text(l, self.src) == "__all__");
                    if is_all {
                        if let Some(list) = child
                            .child_by_field_name("right")
                            .and_then(|r| literal_string_list(r, self.src))
                        {
                            self.facts.exports.get_or_insert_with(Vec::new).extend(list);
                        }
                    }
                }
                _ => {}
            }
        }
    }

    fn import(&mut self, stmt: Node) {
        let line = stmt.start_position().row + 1;
        if stmt.kind() == "import_statement" {
            for name in named_children(stmt) {
                let (raw, alias) = match name.kind() {
                    "dotted_name" => (node_text(name, self.src).to_string(), None),
                    "aliased_import" => (
                        name.child_by_field_name("name")
                            .map(|n| node_text(n, self.src).to_string())
                            .unwrap_or_default(),
                        name.child_by_field_name("alias")
                            .map(|n| node_text(n, self.src).to_string()),
                    ),
                    _ => continue,
                };
                self.facts.imports.push(ImportFact {
                    raw,
                    level: 0,
                    is_from: false,
                    names: Vec::new(),
                    aliases: vec![alias],
                    line,
                });
            }
            return;
        }

        let Some(module) = stmt.child_by_field_name("module_name") else {
            return;
        };
        let (raw, level) = match module.kind() {
            "relative_import" => {
                let mut raw = String::new();
                let mut level = 0;
                for child in named_children(module) {
                    match child.kind() {
                        "import_prefix" => {
                            level = node_text(child, self.src).chars().filter(|c| *c == '.').count() as u32
                        }
                        "dotted_name" => raw = node_text(child, self.src).to_string(),
                        _ => {}
                    }
                }
                (raw, level)
            }
            _ => (node_text(module, self.src).to_string(), 0),
        };
        let mut names = Vec::new();
        let mut aliases = Vec::new();
        let mut cursor = stmt.walk();
        for name in stmt.children_by_field_name("name", &mut cursor) {
            match name.kind() {
                "dotted_name" => {
                    names.push(node_text(name, self.src).to_string());
                    aliases.push(None);
                }
                "aliased_import" => {
                    names.push(
                        name.child_by_field_name("name")
                            .map(|n| node_text(n, self.src).to_string())
                            .unwrap_or_default(),
                    );
                    aliases.push(
                        name.child_by_field_name("alias")
                            .map(|n| node_text(n, self.src).to_string()),
                    );
                }
                _ => {}
            }
        }
        if named_children(stmt).iter().any(|c| c.kind() == "wildcard_import") {
            names = vec!["*".to_string()];
            aliases = vec![None];
        }
        self.facts.imports.push(ImportFact {
            raw,
            level,
            is_from: true,
            names,
            aliases,
            line,
        });
    }

    fn function_def(&mut self, def: Node, outer: Node) {
        let Some(name) = def.child_by_field_name("name") else {
            return;
        };
        let name = node_text(name, self.src).to_string();
        let qualified = format!("{}.{}", self.facts.module_name, name);
        let fact = DefFact {
            kind: DefKind::Function,
            name,
            qualified_name: qualified.clone(),
            enclosing_class: None,
            signature: Some(self.signature(def)),
            span: self.span(outer),
        };
        self.push_def(fact);
        let body = BodyScan::run(def, self.src, None);
        self.record_uses(&qualified, ReaderKind::Function, body);
    }

    fn class_def(&mut self, def: Node, outer: Node) {
        let Some(name) = def.child_by_field_name("name") else {
            return;
        };
        let class_name = node_text(name, self.src).to_string();
        let qualified = format!("{}.{}", self.facts.module_name, class_name);
        let fact = DefFact {
            kind: DefKind::Class,
            name: class_name.clone(),
            qualified_name: qualified.clone(),
            enclosing_class: None,
            signature: Some(self.signature(def)),
            span: self.span(outer),
        };
        if self.seen.contains(&(DefKind::Class, qualified.clone())) {
            return;
        }
        self.push_def(fact);

        let mut bases = Vec::new();
        if let Some(args) = def.child_by_field_name("superclasses") {
            for arg in named_children(args) {
                if matches!(arg.kind(), "keyword_argument" | "comment" | "dictionary_splat") {
                    continue;
                }
                bases.push(collapse_ws(node_text(arg, self.src)));
            }
        }
        self.facts.bases.push(ClassBases {
            class_qualified_name: qualified.clone(),
            bases,
        });

        if let Some(body) = def.child_by_field_name("body") {
            self.class_block(body, &class_name, &qualified);
        }
    }

    fn class_block(&mut self, block: Node, class_name: &str, class_qualified: &str) {
        for stmt in named_children(block) {
            match stmt.kind() {
                "function_definition" => self.method_def(stmt, stmt, class_name, class_qualified),
                "decorated_definition" => {
                    if let Some(def) = stmt.child_by_field_name("definition") {
                        if def.kind() == "function_definition" {
                            self.method_def(def, stmt, class_name, class_qualified);
                        }
                    }
                }
                "expression_statement" => {
                    if let Some(assign) = assignment_of(stmt) {
                        let mut targets = Vec::new();
                        assignment_name_targets(assign, self.src, &mut targets);
                        for (name, _) in targets {
                            self.push_field(&name, stmt, class_name, class_qualified);
                        }
                    }
                }
                _ => {
                    for inner in nested_blocks(stmt, self.src) {
                        self.class_block(inner, class_name, class_qualified);
                    }
                }
            }
        }
    }

    fn push_field(&mut self, name: &str, stmt: Node, class_name: &str, class_qualified: &str) {
        let fact = DefFact {
            kind: DefKind::Field,
            name: name.to_string(),
            qualified_name: format!("{class_qualified}.{name}"),
            enclosing_class: Some(class_name.to_string()),
            signature: None,
            span: self.span(stmt),
        };
        self.push_def(fact);
    }

    fn method_def(&mut self, def: Node, outer: Node, class_name: &str, class_qualified: &str) {
        let Some(name) = def.child_by_field_name("name") else {
            return;
        };
        let name = node_text(name, self.src).to_string();
        let qualified = format!("{class_qualified}.{name}");
        let fact = DefFact {
            kind: DefKind::Method,
            name,
            qualified_name: qualified.clone(),
            enclosing_class: Some(class_name.to_string()),
            signature: Some(self.signature(def)),
            span: self.span(outer),
        };
        // A redefinition (e.g. a property setter) keeps the first span but
        // still contributes fields and reads.
        self.push_def(fact);
        let is_static = outer.kind() == "decorated_definition"
            && children(outer).iter().any(|d| {
                d.kind() == "decorator" && node_text(*d, self.src).trim_start_matches('@').trim() == "staticmethod"
            });
        let self_name = if is_static {
            None
        } else {
            first_parameter(def, self.src)
        };
        let body = BodyScan::run(def, self.src, self_name.as_deref());
        for (field, stmt) in &body.self_stores {
            self.push_field(field, *stmt, class_name, class_qualified);
        }
        self.record_uses(&qualified, ReaderKind::Method, body);
    }

    fn record_uses(&mut self, reader: &str, reader_kind: ReaderKind, body: BodyScan) {
        for (name, form) in body.reads {
            if form == ReadForm::BareName {
                let local = body.locals.contains(&name) && !body.globals.contains(&name);
                if local {
                    continue;
                }
            }
            if self.seen_uses.insert((reader.to_string(), name.clone(), form)) {
                self.facts.uses.push(UseFact {
                    reader: reader.to_string(),
                    reader_kind,
                    name,
                    form,
                });
            }
        }
    }
}

fn first_parameter(def: Node, src: &str) -> Option<String> {
    let params = def.child_by_field_name("parameters")?;
    let first = named_children(params).into_iter().next()?;
    let ident = match first.kind() {
        "identifier" => Some(first),
        "typed_parameter" => named_children(first).into_iter().find(|c| c.kind() == "identifier"),
        "default_parameter" | "typed_default_parameter" => first.child_by_field_name("name"),
        _ => None,
    }?;
    Some(node_text(ident, src).to_string())
}

/// Reads, local bindings, and `self.<attr> =` stores inside one function body.
struct BodyScan<'t> {
    reads: Vec<(String, ReadForm)>,
    locals: HashSet<String>,
    globals: HashSet<String>,
    self_stores: Vec<(String, Node<'t>)>,
}

impl<'t> BodyScan<'t> {
    fn run(def: Node<'t>, src: &'t str, self_name: Option<&str>) -> Self {
        let mut scan = BodyScanner {
            src,
            self_name,
            out: BodyScan {
                reads: Vec::new(),
                locals: HashSet::new(),
                globals: HashSet::new(),
                self_stores: Vec::new(),
            },
            stmt: def,
        };
        // Defaults and annotations of the definition itself evaluate in the
        // enclosing scope, so only the parameter names matter here.
        if let Some(params) = def.child_by_field_name("parameters") {
            scan.parameters(params, false);
        }
        if let Some(body) = def.child_by_field_name("body") {
            scan.walk(body);
        }
        scan.out
    }
}

struct BodyScanner<'t, 'n> {
    src: &'t str,
    self_name: Option<&'n str>,
    out: BodyScan<'t>,
    /// Innermost statement being walked; `self.x =` fields point at it.
    stmt: Node<'t>,
}

impl<'t> BodyScanner<'t, '_> {
    fn text(&self, node: Node<'t>) -> &'t str {
        node_text(node, self.src)
    }

    fn parameters(&mut self, params: Node<'t>, walk_exprs: bool) {
        for p in named_children(params) {
            match p.kind() {
                "identifier" => {
                    self.out.locals.insert(self.text(p).to_string());
                }
                "typed_parameter" | "list_splat_pattern" | "dictionary_splat_pattern" => {
                    for c in named_children(p) {
                        match c.kind() {
                            "identifier" => {
                                self.out.locals.insert(self.text(c).to_string());
                            }
                            "list_splat_pattern" | "dictionary_splat_pattern" => {
                                for id in named_children(c) {
                                    self.out.locals.insert(self.text(id).to_string());
                                }
                            }
                            "type" if walk_exprs => self.walk(c),
                            _ => {}
                        }
                    }
                }
                "default_parameter" | "typed_default_parameter" => {
                    if let Some(name) = p.child_by_field_name("name") {
                        self.target(name);
                    }
                    if walk_exprs {
                        if let Some(ty) = p.child_by_field_name("type") {
                            self.walk(ty);
                        }
                        if let Some(value) = p.child_by_field_name("value") {
                            self.walk(value);
                        }
                    }
                }
                "tuple_pattern" => self.target(p),
                _ => {}
            }
        }
    }

    /// Assignment target: names become locals, `self.x` becomes a field store.
    fn target(&mut self, node: Node<'t>) {
        match node.kind() {
            "identifier" => {
                self.out.locals.insert(self.text(node).to_string());
            }
            "attribute" => {
                let object = node.child_by_field_name("object");
                let attr = node.child_by_field_name("attribute");
                match (object, attr) {
                    (Some(o), Some(a))
                        if o.kind() == "identifier" && Some(self.text(o)) == self.self_name =>
                    {
                        self.out.self_stores.push((self.text(a).to_string(), self.stmt));
                    }
                    (Some(o), _) => self.walk(o),
                    _ => {}
                }
            }
            "subscript" => {
                for c in named_children(node) {
                    self.walk(c);
                }
            }
            "pattern_list" | "tuple_pattern" | "list_pattern" | "list_splat_pattern"
            | "as_pattern_target" | "parenthesized_expression" | "tuple" | "list" => {
                for c in named_children(node) {
                    self.target(c);
                }
            }
            _ => self.walk(node),
        }
    }

    fn walk(&mut self, node: Node<'t>) {
        let prev_stmt = self.stmt;
        if node.kind().ends_with("_statement") {
            self.stmt = node;
        }
        self.visit(node);
        self.stmt = prev_stmt;
    }

    fn visit(&mut self, node: Node<'t>) {
        match node.kind() {
            "identifier" => {
                self.out
                    .reads
                    .push((self.text(node).to_string(), ReadForm::BareName));
            }
            "attribute" => {
                let object = node.child_by_field_name("object");
                let attr = node.child_by_field_name("attribute");
                if let (Some(o), Some(a)) = (object, attr) {
                    if o.kind() == "identifier" && Some(self.text(o)) == self.self_name {
                        self.out
                            .reads
                            .push((self.text(a).to_string(), ReadForm::SelfAttribute));
                        return;
                    }
                }
                if let Some(o) = object {
                    self.walk(o);
                }
            }
            "keyword_argument" => {
                if let Some(v) = node.child_by_field_name("value") {
                    self.walk(v);
                }
            }
            "assignment" => {
                if let Some(right) = node.child_by_field_name("right") {
                    if right.kind() == "assignment" {
                        self.visit(right);
                    } else {
                        self.walk(right);
                    }
                }
                if let Some(ty) = node.child_by_field_name("type") {
                    self.walk(ty);
                }
                if let Some(left) = node.child_by_field_name("left") {
                    self.target(left);
                }
            }
            "augmented_assignment" => {
                if let Some(right) = node.child_by_field_name("right") {
                    self.walk(right);
                }
                if let Some(left) = node.child_by_field_name("left") {
                    // Read and rebind; a bare name becomes local.
                    self.walk(left);
                    if left.kind() == "identifier" {
                        self.out.locals.insert(self.text(left).to_string());
                    }
                }
            }
            "for_statement" | "for_in_clause" => {
                for c in named_children(node) {
                    if Some(c) == node.child_by_field_name("left") {
                        self.target(c);
                    } else {
                        self.walk(c);
                    }
                }
            }
            "named_expression" => {
                if let Some(v) = node.child_by_field_name("value") {
                    self.walk(v);
                }
                if let Some(n) = node.child_by_field_name("name") {
                    self.target(n);
                }
            }
            "as_pattern" => {
                for c in named_children(node) {
                    if c.kind() == "as_pattern_target" {
                        self.target(c);
                    } else {
                        self.walk(c);
                    }
                }
            }
            "except_clause" => {
                for c in named_children(node) {
                    if Some(c) == node.child_by_field_name("alias") {
                        self.target(c);
                    } else {
                        self.walk(c);
                    }
                }
            }
            "global_statement" => {
                for c in named_children(node) {
                    if c.kind() == "identifier" {
                        self.out.globals.insert(self.text(c).to_string());
                    }
                }
            }
            "nonlocal_statement" => {
                for c in named_children(node) {
                    if c.kind() == "identifier" {
                        self.out.locals.insert(self.text(c).to_string());
                    }
                }
            }
            "import_statement" | "import_from_statement" => {
                for c in named_children(node) {
                    let bound = match c.kind() {
                        "aliased_import" => c.child_by_field_name("alias"),
                        "dotted_name" if Some(c) != node.child_by_field_name("module_name") => {
                            named_children(c).into_iter().next()
                        }
                        _ => None,
                    };
                    if let Some(b) = bound {
                        self.out.locals.insert(self.text(b).to_string());
                    }
                }
            }
            "function_definition" | "class_definition" => {
                if let Some(n) = node.child_by_field_name("name") {
                    self.out.locals.insert(self.text(n).to_string());
                }
                if let Some(params) = node.child_by_field_name("parameters") {
                    self.parameters(params, true);
                }
                if let Some(args) = node.child_by_field_name("superclasses") {
                    self.walk(args);
                }
                if node.kind() == "function_definition" {
                    if let Some(body) = node.child_by_field_name("body") {
                        self.walk(body);
                    }
                }
            }
            "lambda" => {
                if let Some(params) = node.child_by_field_name("parameters") {
                    self.parameters(params, true);
                }
                if let Some(body) = node.child_by_field_name("body") {
                    self.walk(body);
                }
            }
            "string" | "comment" | "pass_statement" | "break_statement" | "continue_statement" => {}
            _ => {
                for c in named_children(node) {
                    self.walk(c);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CORE: &str = include_str!("../../fixtures/alpha/pkg/core.py");

    fn facts(path: &str, src: &str) -> FileFacts {
        extract_facts(&SourceUnit::new(path, src)).expect("parses")
    }

    fn count(f: &FileFacts, kind: DefKind) -> usize {
        f.definitions.iter().filter(|d| d.kind == kind).count()
    }

    // Cross-checked against `ast.dump` of the same file.
    #[test]
    fn fixture_core_facts() {
        let f = facts("pkg/core.py", CORE);
        assert_eq!(f.module_name, "pkg.core");
        assert_eq!(count(&f, DefKind::Class), 2);
        assert_eq!(count(&f, DefKind::Method), 4);
        assert_eq!(count(&f, DefKind::Field), 1);
        assert_eq!(count(&f, DefKind::Function), 1);
        assert_eq!(count(&f, DefKind::GlobalVariable), 1);
        let engine = f
            .bases
            .iter()
            .find(|b| b.class_qualified_name == "pkg.core.Engine")
            .unwrap();
        assert_eq!(engine.bases, vec!["Base"]);
        let uses: Vec<_> = f
            .uses
            .iter()
            .map(|u| (u.reader.as_str(), u.name.as_str(), u.form))
            .collect();
        assert_eq!(
            uses,
            vec![
                ("pkg.core.Base.run", "x", ReadForm::SelfAttribute),
                ("pkg.core.helper", "RATE", ReadForm::BareName),
            ]
        );
        let field = f.definitions.iter().find(|d| d.kind == DefKind::Field).unwrap();
        assert_eq!(field.qualified_name, "pkg.core.Base.x");
        assert_eq!(field.enclosing_class.as_deref(), Some("Base"));
    }

    #[test]
    fn empty_file_has_module_only() {
        let f = facts("pkg/empty.py", "");
        assert_eq!(f.module_name, "pkg.empty");
        assert!(f.definitions.is_empty() && f.imports.is_empty() && f.uses.is_empty());
        assert!(!f.parse_failed);
    }

    #[test]
    fn relative_from_import() {
        let f = facts("pkg/sub.py", "from . import helper\n");
        assert_eq!(f.imports.len(), 1);
        let imp = &f.imports[0];
        assert_eq!((imp.raw.as_str(), imp.level, imp.is_from), ("", 1, true));
        assert_eq!(imp.names, vec!["helper"]);
    }

    #[test]
    fn import_forms() {
        let src = "import os, a.b as ab\nfrom ..x.y import (p, q as r)\nfrom m import *\n";
        let f = facts("pkg/sub/mod.py", src);
        assert_eq!(f.imports.len(), 4);
        assert_eq!(f.imports[0].raw, "os");
        assert_eq!(f.imports[1].aliases, vec![Some("ab".to_string())]);
        assert_eq!(f.imports[2].level, 2);
        assert_eq!(f.imports[2].raw, "x.y");
        assert_eq!(f.imports[2].names, vec!["p", "q"]);
        assert_eq!(f.imports[2].aliases, vec![None, Some("r".to_string())]);
        assert!(f.imports[3].is_star());
    }

    #[test]
    fn syntax_error_reports_position_and_module_only_facts() {
        let err = extract_facts(&SourceUnit::new("bad.py", "x = 1\ndef broken(:\n    pass\n")).unwrap_err();
        assert_eq!(err.error.file_path, "bad.py");
        assert_eq!(err.error.line, 2);
        assert!(err.facts.parse_failed);
        assert_eq!(err.facts.module_name, "bad");
        assert!(err.facts.definitions.is_empty());
    }

    #[test]
    fn nested_functions_and_classes_are_not_symbols() {
        let src = "def outer():\n    def inner():\n        pass\n    class Local:\n        pass\n    return inner\n\nclass C:\n    class Inner:\n        def m(self):\n            pass\n";
        let f = facts("m.py", src);
        let names: Vec<_> = f.definitions.iter().map(|d| d.qualified_name.as_str()).collect();
        assert_eq!(names, vec!["m.outer", "m.C"]);
    }

    #[test]
    fn global_variable_rules() {
        let src = "a = b = 1\nc, d = 1, 2\ne: int = 3\nf: str\nx = 0\nx += 1\nobj.attr = 2\nitems[0] = 1\n";
        let f = facts("m.py", src);
        let names: Vec<_> = f
            .definitions
            .iter()
            .filter(|d| d.kind == DefKind::GlobalVariable)
            .map(|d| d.name.as_str())
            .collect();
        assert_eq!(names, vec!["a", "b", "c", "d", "e", "f", "x"]);
    }

    #[test]
    fn main_guard_is_ignored_but_other_conditionals_are_indexed() {
        let src = "import typing\nif typing.TYPE_CHECKING:\n    from x import Y\n    Z = 1\ntry:\n    import json\nexcept ImportError:\n    json = None\nif __name__ == '__main__':\n    MAIN_ONLY = 1\n    def cli():\n        pass\n";
        let f = facts("m.py", src);
        let names: Vec<_> = f.definitions.iter().map(|d| d.name.as_str()).collect();
        assert_eq!(names, vec!["Z", "json"]);
        assert_eq!(f.imports.len(), 3);
    }

    #[test]
    fn fields_from_class_body_and_self_assignments() {
        let src = "class C:\n    a = 1\n    b: int\n    def __init__(self, v):\n        self.c = v\n        self.a = 2\n        if v:\n            self.d: int = 0\n        self.e += 1\n        other.f = 1\n    @staticmethod\n    def s(x):\n        x.g = 1\n";
        let f = facts("m.py", src);
        let fields: Vec<_> = f
            .definitions
            .iter()
            .filter(|d| d.kind == DefKind::Field)
            .map(|d| d.name.as_str())
            .collect();
        assert_eq!(fields, vec!["a", "b", "c", "d"]);
    }

    #[test]
    fn locals_and_parameters_shadow_globals() {
        let src = "G = 1\nH = 2\nK = 3\ndef f(G, *args, key=H, **kw):\n    K = 4\n    return G + K + args[0]\ndef g():\n    global K\n    K = 5\n    return K + [y for y in range(3)][0]\n";
        let f = facts("m.py", src);
        let uses: Vec<_> = f
            .uses
            .iter()
            .map(|u| (u.reader.as_str(), u.name.as_str()))
            .collect();
        assert_eq!(
            uses,
            vec![("m.g", "K"), ("m.g", "range")],
        );
    }

    #[test]
    fn decorated_span_and_signature() {
        let src = "class C:\n    @property\n    def value(\n        self,\n    ) -> int:\n        return 1\n";
        let f = facts("m.py", src);
        let m = f.definitions.iter().find(|d| d.kind == DefKind::Method).unwrap();
        assert_eq!(&src[m.span.start_byte..m.span.start_byte + 9], "@property");
        assert_eq!(m.signature.as_deref(), Some("def value( self, ) -> int:"));
        assert_eq!(m.span.start_line, 2);
        let c = f.definitions.iter().find(|d| d.kind == DefKind::Class).unwrap();
        assert_eq!(c.signature.as_deref(), Some("class C:"));
    }

    #[test]
    fn base_expressions_skip_keywords() {
        let src = "import abc\nclass A(abc.ABC, Generic[T], metaclass=Meta):\n    pass\n";
        let f = facts("m.py", src);
        assert_eq!(f.bases[0].bases, vec!["abc.ABC", "Generic[T]"]);
    }

    #[test]
    fn literal_all_is_recorded() {
        let f = facts("pkg/__init__.py", "__all__ = ['a', \"b\"]\n__all__ += ['c']\n");
        assert_eq!(f.exports, Some(vec!["a".into(), "b".into(), "c".into()]));
        assert!(f.is_package_init);
        assert_eq!(f.module_name, "pkg");
    }

    #[test]
    fn duplicate_definitions_keep_first() {
        let src = "class C:\n    @property\n    def v(self):\n        return self._v\n    @v.setter\n    def v(self, value):\n        self._v = value\n";
        let f = facts("m.py", src);
        let methods: Vec<_> = f.definitions.iter().filter(|d| d.kind == DefKind::Method).collect();
        assert_eq!(methods.len(), 1);
        assert_eq!(methods[0].span.start_line, 2);
        assert!(f.definitions.iter().any(|d| d.kind == DefKind::Field && d.name == "_v"));
    }
}
