use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use super::{Diagnostic, IndexError, IndexOutcome, PartialGraph};
use crate::parser::{normalize_import, ImportTarget, ModuleSet, ParserError, ReadForm};
use crate::schema::{EdgeType, NodeId, NodeLabel};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Binding {
    /// A name imported from a repository module: (module, name).
    Symbol(String, String),
    Module(String),
    External,
}

#[derive(Debug, Default)]
struct Namespace {
    bindings: BTreeMap<String, Binding>,
    star_sources: Vec<String>,
}

struct Resolver<'a> {
    partial: &'a PartialGraph,
    modules: &'a ModuleSet,
    namespaces: BTreeMap<String, Namespace>,
}

impl Resolver<'_> {
    /// Follows definitions, explicit imports and star imports until a
    /// definition is found. `visited` guards against import cycles.
    fn resolve_symbol(&self, module: &str, name: &str, visited: &mut HashSet<(String, String)>) -> Option<(NodeLabel, NodeId)> {
        if !visited.insert((module.to_string(), name.to_string())) {
            return None;
        }
        let entry = self.partial.modules.get(module)?;
        if let Some(sym) = entry.symbols.get(name) {
            return Some(*sym);
        }
        let ns = self.namespaces.get(module)?;
        match ns.bindings.get(name) {
            Some(Binding::Symbol(m, n)) => return self.resolve_symbol(m, n, visited),
            Some(_) => return None,
            None => {}
        }
        for source in &ns.star_sources {
            if self.exports(source, name) {
                if let Some(found) = self.resolve_symbol(source, name, visited) {
                    return Some(found);
                }
            }
        }
        None
    }

    /// Whether `from module import *` brings `name` in.
    fn exports(&self, module: &str, name: &str) -> bool {
        match self.partial.modules.get(module).and_then(|e| e.facts.exports.as_ref()) {
            Some(all) => all.iter().any(|n| n == name),
            None => !name.starts_with('_'),
        }
    }

    /// Names a star import of `module` binds, before resolution.
    fn star_names(&self, module: &str, visited: &mut HashSet<String>) -> BTreeSet<String> {
        let mut names = BTreeSet::new();
        if !visited.insert(module.to_string()) {
            return names;
        }
        let Some(entry) = self.partial.modules.get(module) else {
            return names;
        };
        if let Some(all) = &entry.facts.exports {
            names.extend(all.iter().cloned());
            return names;
        }
        names.extend(entry.symbols.keys().cloned());
        if let Some(ns) = self.namespaces.get(module) {
            names.extend(ns.bindings.keys().cloned());
            for source in &ns.star_sources {
                names.extend(self.star_names(source, visited));
            }
        }
        names.retain(|n| !n.starts_with('_'));
        names
    }

    /// Resolves a base-class expression written in `module` to a CLASS.
    fn resolve_base(&self, module: &str, expr: &str) -> Option<NodeId> {
        let expr = expr.split('[').next().unwrap_or(expr).trim();
        let valid = !expr.is_empty()
            && expr.split('.').all(|part| {
                let mut chars = part.chars();
                chars.next().is_some_and(|c| c.is_alphabetic() || c == '_')
                    && chars.all(|c| c.is_alphanumeric() || c == '_')
            });
        if !valid {
            return None;
        }
        let found = match expr.split_once('.') {
            None => self.resolve_symbol(module, expr, &mut HashSet::new()),
            Some((head, rest)) => {
                let ns = self.namespaces.get(module)?;
                let Some(Binding::Module(m)) = ns.bindings.get(head) else {
                    return None;
                };
                let dotted = format!("{m}.{rest}");
                let (target_module, name) = self.modules.split_module_prefix(&dotted)?;
                let name = name?;
                if name.contains('.') {
                    return None;
                }
                self.resolve_symbol(target_module, name, &mut HashSet::new())
            }
        };
        match found {
            Some((NodeLabel::Class, id)) => Some(id),
            _ => None,
        }
    }
}

fn build_namespaces(partial: &PartialGraph, modules: &ModuleSet, diagnostics: &mut Vec<Diagnostic>) -> BTreeMap<String, Namespace> {
    let mut namespaces = BTreeMap::new();
    for (module, entry) in &partial.modules {
        let facts = &entry.facts;
        let mut ns = Namespace::default();
        for import in &facts.imports {
            let targets = match normalize_import(import, module, facts.is_package_init, modules) {
                Ok(t) => t,
                Err(ParserError::ImportEscapesRoot { level, .. }) => {
                    diagnostics.push(Diagnostic::ImportEscapesRoot {
                        module: module.clone(),
                        line: import.line,
                        level,
                    });
                    continue;
                }
                Err(_) => continue,
            };
            if import.is_star() {
                match &targets[0] {
                    ImportTarget::Internal(source) if modules.contains(source) => {
                        ns.star_sources.push(source.clone())
                    }
                    ImportTarget::Internal(source) => diagnostics.push(Diagnostic::UnresolvedImport {
                        module: module.clone(),
                        target: format!("{source}.*"),
                    }),
                    ImportTarget::External(_) => {}
                }
                continue;
            }
            for (bound, index) in import.bindings() {
                let target = &targets[index.unwrap_or(0)];
                let binding = match (target, index) {
                    (ImportTarget::External(_), _) => Binding::External,
                    (ImportTarget::Internal(dotted), None) => {
                        // `import a.b` binds `a`; `import a.b as c` binds `a.b`.
                        let bound_module = if import.aliases.first().cloned().flatten().is_some() {
                            dotted.clone()
                        } else {
                            dotted.split('.').next().unwrap_or_default().to_string()
                        };
                        if !modules.contains(dotted) {
                            diagnostics.push(Diagnostic::UnresolvedImport {
                                module: module.clone(),
                                target: dotted.clone(),
                            });
                        }
                        Binding::Module(bound_module)
                    }
                    (ImportTarget::Internal(dotted), Some(_)) => {
                        if modules.contains(dotted) {
                            Binding::Module(dotted.clone())
                        } else {
                            match dotted.rsplit_once('.') {
                                Some((m, n)) if modules.contains(m) => Binding::Symbol(m.to_string(), n.to_string()),
                                _ => {
                                    diagnostics.push(Diagnostic::UnresolvedImport {
                                        module: module.clone(),
                                        target: dotted.clone(),
                                    });
                                    Binding::External
                                }
                            }
                        }
                    }
                };
                ns.bindings.insert(bound, binding);
            }
        }
        namespaces.insert(module.clone(), ns);
    }
    namespaces
}

/// Strongly connected components of the class inheritance graph that form
/// cycles (size > 1, or a class listing itself as a base).
fn inheritance_cycles(bases: &BTreeMap<NodeId, Vec<NodeId>>) -> Vec<Vec<NodeId>> {
    struct Tarjan<'a> {
        bases: &'a BTreeMap<NodeId, Vec<NodeId>>,
        index: HashMap<NodeId, usize>,
        low: HashMap<NodeId, usize>,
        on_stack: HashSet<NodeId>,
        stack: Vec<NodeId>,
        next: usize,
        out: Vec<Vec<NodeId>>,
    }
    impl Tarjan<'_> {
        fn visit(&mut self, v: NodeId) {
            self.index.insert(v, self.next);
            self.low.insert(v, self.next);
            self.next += 1;
            self.stack.push(v);
            self.on_stack.insert(v);
            for &w in self.bases.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
                if !self.index.contains_key(&w) {
                    self.visit(w);
                    let lw = self.low[&w];
                    let lv = self.low.get_mut(&v).expect("visited");
                    *lv = (*lv).min(lw);
                } else if self.on_stack.contains(&w) {
                    let iw = self.index[&w];
                    let lv = self.low.get_mut(&v).expect("visited");
                    *lv = (*lv).min(iw);
                }
            }
            if self.low[&v] == self.index[&v] {
                let mut component = Vec::new();
                loop {
                    let w = self.stack.pop().expect("non-empty");
                    self.on_stack.remove(&w);
                    component.push(w);
                    if w == v {
                        break;
                    }
                }
                let self_loop = component.len() == 1
                    && self.bases.get(&v).is_some_and(|b| b.contains(&v));
                if component.len() > 1 || self_loop {
                    component.sort();
                    self.out.push(component);
                }
            }
        }
    }
    let mut t = Tarjan {
        bases,
        index: HashMap::new(),
        low: HashMap::new(),
        on_stack: HashSet::new(),
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for &v in bases.keys() {
        if !t.index.contains_key(&v) {
            t.visit(v);
        }
    }
    t.out.sort();
    t.out
}

/// Inherited members of one class: depth-first, left to right over the
/// bases, first definition of each name wins, local names are never
/// inherited. Methods and fields are separate namespaces.
pub(crate) fn propagate_members(
    class: NodeId,
    bases: &BTreeMap<NodeId, Vec<NodeId>>,
    methods: &BTreeMap<NodeId, BTreeMap<String, NodeId>>,
    fields: &BTreeMap<NodeId, BTreeMap<String, NodeId>>,
) -> (BTreeMap<String, NodeId>, BTreeMap<String, NodeId>) {
    let empty = BTreeMap::new();
    let no_bases = Vec::new();
    let own_methods = methods.get(&class).unwrap_or(&empty);
    let own_fields = fields.get(&class).unwrap_or(&empty);
    let mut inherited_methods = BTreeMap::new();
    let mut inherited_fields = BTreeMap::new();

    let mut visited = HashSet::from([class]);
    let mut stack: Vec<NodeId> = bases.get(&class).unwrap_or(&no_bases).iter().rev().copied().collect();
    while let Some(current) = stack.pop() {
        if !visited.insert(current) {
            continue;
        }
        for (own, table, inherited) in [
            (own_methods, methods, &mut inherited_methods),
            (own_fields, fields, &mut inherited_fields),
        ] {
            for (name, id) in table.get(&current).unwrap_or(&empty) {
                if !own.contains_key(name) {
                    inherited.entry(name.clone()).or_insert(*id);
                }
            }
        }
        stack.extend(bases.get(&current).unwrap_or(&no_bases).iter().rev());
    }
    (inherited_methods, inherited_fields)
}

/// Phase 2: cross-file edge completion.
pub fn index_phase2(partial: PartialGraph) -> Result<IndexOutcome, IndexError> {
    let modules = ModuleSet::new(partial.modules.keys().cloned());
    let mut diagnostics = partial.diagnostics.clone();
    let namespaces = build_namespaces(&partial, &modules, &mut diagnostics);
    let resolver = Resolver {
        partial: &partial,
        modules: &modules,
        namespaces,
    };
    let mut graph = partial.graph.clone();

    // Re-exports: a module that imports a repository symbol gets a
    // CONTAINS edge to the symbol's definition.
    for (module, entry) in &partial.modules {
        let ns = &resolver.namespaces[module];
        let mut names: BTreeSet<String> = ns
            .bindings
            .iter()
            .filter(|(_, b)| matches!(b, Binding::Symbol(..)))
            .map(|(n, _)| n.clone())
            .collect();
        for source in &ns.star_sources {
            names.extend(resolver.star_names(source, &mut HashSet::new()));
        }
        for name in names {
            if entry.symbols.contains_key(&name) {
                continue;
            }
            if let Some((label, target)) = resolver.resolve_symbol(module, &name, &mut HashSet::new()) {
                if matches!(label, NodeLabel::Class | NodeLabel::Function | NodeLabel::GlobalVariable) {
                    graph.add_edge(EdgeType::Contains, entry.node, target)?;
                }
            }
        }
    }

    // Base classes, in source order.
    let mut class_bases: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    let mut class_methods = BTreeMap::new();
    let mut class_fields = BTreeMap::new();
    let mut class_names: BTreeMap<NodeId, String> = BTreeMap::new();
    for (module, entry) in &partial.modules {
        for class in entry.classes.values() {
            let mut resolved = Vec::new();
            for (expr, local) in class.base_exprs.iter().zip(&class.bases) {
                let base = local.or_else(|| resolver.resolve_base(module, expr));
                match base {
                    Some(id) => {
                        graph.add_edge(EdgeType::Inherits, class.id, id)?;
                        resolved.push(id);
                    }
                    None => diagnostics.push(Diagnostic::UnresolvedBase {
                        class: class.qualified_name.clone(),
                        base: expr.clone(),
                    }),
                }
            }
            class_bases.insert(class.id, resolved);
            class_methods.insert(class.id, class.methods.clone());
            class_fields.insert(class.id, class.fields.clone());
            class_names.insert(class.id, class.qualified_name.clone());
        }
    }

    let cycles = inheritance_cycles(&class_bases);
    let in_cycle: HashSet<NodeId> = cycles.iter().flatten().copied().collect();
    for cycle in &cycles {
        let mut classes: Vec<String> = cycle.iter().map(|id| class_names[id].clone()).collect();
        classes.sort();
        diagnostics.push(Diagnostic::InheritanceCycle { classes });
    }

    let mut all_fields: BTreeMap<NodeId, BTreeMap<String, NodeId>> = class_fields.clone();
    for &class in class_bases.keys() {
        if in_cycle.contains(&class) {
            continue;
        }
        let (methods, fields) = propagate_members(class, &class_bases, &class_methods, &class_fields);
        for id in methods.values() {
            graph.add_edge(EdgeType::HasMethod, class, *id)?;
        }
        for id in fields.values() {
            graph.add_edge(EdgeType::HasField, class, *id)?;
        }
        all_fields.entry(class).or_default().extend(fields);
    }

    // Reads that needed other files: imported globals and inherited fields.
    for (module, use_fact) in &partial.pending_uses {
        let entry = &partial.modules[module];
        let Some(reader) = reader_id(entry, &use_fact.reader) else {
            continue;
        };
        let target = match use_fact.form {
            ReadForm::BareName => match resolver.resolve_symbol(module, &use_fact.name, &mut HashSet::new()) {
                Some((NodeLabel::GlobalVariable, id)) => Some(id),
                _ => None,
            },
            ReadForm::SelfAttribute => {
                let class_qualified = use_fact.reader.rsplit_once('.').map(|(c, _)| c).unwrap_or_default();
                entry
                    .classes
                    .get(class_qualified)
                    .and_then(|c| all_fields.get(&c.id))
                    .and_then(|f| f.get(&use_fact.name))
                    .copied()
            }
        };
        if let Some(target) = target {
            graph.add_edge(EdgeType::Uses, reader, target)?;
        }
    }

    Ok(IndexOutcome {
        graph,
        diagnostics,
        files_scanned: partial.files_scanned,
        files_failed: partial.files_failed,
    })
}

fn reader_id(entry: &super::ModuleEntry, reader: &str) -> Option<NodeId> {
    let (owner, name) = reader.rsplit_once('.')?;
    if let Some(class) = entry.classes.get(owner) {
        return class.methods.get(name).copied();
    }
    match entry.symbols.get(name) {
        Some((NodeLabel::Function, id)) => Some(*id),
        _ => None,
    }
}
