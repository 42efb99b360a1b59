use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use super::{discover_files, Diagnostic, IndexConfig, IndexError};
use crate::graph::CodeGraph;
use crate::parser::{extract_facts, DefKind, FileFacts, ReadForm, SourceUnit, UseFact};
use crate::schema::{node_identity, EdgeType, NodeId, NodeLabel, NodeRecord, Span};

#[derive(Debug, Clone)]
pub struct ClassEntry {
    pub id: NodeId,
    pub module: String,
    pub qualified_name: String,
    pub methods: BTreeMap<String, NodeId>,
    pub fields: BTreeMap<String, NodeId>,
    /// Base expressions in source order.
    pub base_exprs: Vec<String>,
    /// Resolved base classes, aligned with `base_exprs`.
    pub bases: Vec<Option<NodeId>>,
}

#[derive(Debug, Clone)]
pub struct ModuleEntry {
    pub facts: FileFacts,
    pub node: NodeId,
    /// Top-level CLASS, FUNCTION and GLOBAL_VARIABLE symbols by simple name.
    pub symbols: BTreeMap<String, (NodeLabel, NodeId)>,
    /// Classes by qualified name.
    pub classes: BTreeMap<String, ClassEntry>,
}

/// Output of the shallow pass: every node of the final graph, the edges
/// resolvable inside one file, and the work left for Phase 2.
#[derive(Debug, Clone)]
pub struct PartialGraph {
    pub graph: CodeGraph,
    /// Module table keyed by dotted name.
    pub modules: BTreeMap<String, ModuleEntry>,
    /// Reads not resolvable within their own file, with the reading module.
    pub pending_uses: Vec<(String, UseFact)>,
    pub diagnostics: Vec<Diagnostic>,
    pub files_scanned: usize,
    pub files_failed: usize,
}

impl PartialGraph {
    /// (module, class qualified name, base expression) for every base not
    /// resolved in Phase 1.
    pub fn pending_bases(&self) -> Vec<(String, String, String)> {
        let mut out = Vec::new();
        for (module, entry) in &self.modules {
            for class in entry.classes.values() {
                for (expr, resolved) in class.base_exprs.iter().zip(&class.bases) {
                    if resolved.is_none() {
                        out.push((module.clone(), class.qualified_name.clone(), expr.clone()));
                    }
                }
            }
        }
        out
    }
}

pub fn index_phase1(repo_root: &Path, config: &IndexConfig) -> Result<PartialGraph, IndexError> {
    let files = discover_files(repo_root, config)?;
    index_phase1_files(repo_root, &files, config)
}

enum Loaded {
    Parsed(SourceUnit, FileFacts),
    Failed(SourceUnit, FileFacts, Diagnostic),
    NotUtf8(String),
}

/// Phase 1 over an explicit list of repo-relative paths.
pub fn index_phase1_files(
    repo_root: &Path,
    files: &[String],
    config: &IndexConfig,
) -> Result<PartialGraph, IndexError> {
    let mut files: Vec<String> = files.to_vec();
    files.sort();
    files.dedup();
    if files.len() > config.max_files {
        return Err(IndexError::TooManyFiles {
            found: files.len(),
            limit: config.max_files,
        });
    }

    let mut total_bytes = 0u64;
    for f in &files {
        let path = repo_root.join(f);
        let len = std::fs::metadata(&path)
            .map_err(|source| IndexError::Io { path: path.clone(), source })?
            .len();
        total_bytes += len;
        if total_bytes > config.max_source_bytes {
            return Err(IndexError::MemoryCapExceeded {
                limit: config.max_source_bytes,
            });
        }
    }

    let loaded: Vec<Loaded> = files
        .par_iter()
        .map(|rel| {
            let path = repo_root.join(rel);
            let bytes = std::fs::read(&path).map_err(|source| IndexError::Io { path, source })?;
            let Ok(content) = String::from_utf8(bytes) else {
                return Ok(Loaded::NotUtf8(rel.clone()));
            };
            let unit = SourceUnit::new(rel.clone(), content);
            Ok(match extract_facts(&unit) {
                Ok(facts) => Loaded::Parsed(unit, facts),
                Err(failure) => Loaded::Failed(unit, failure.facts, Diagnostic::ParseFailed(failure.error)),
            })
        })
        .collect::<Result<_, IndexError>>()?;

    let mut partial = PartialGraph {
        graph: CodeGraph::new(repo_root.display().to_string()),
        modules: BTreeMap::new(),
        pending_uses: Vec::new(),
        diagnostics: Vec::new(),
        files_scanned: 0,
        files_failed: 0,
    };
    if let Ok(epoch) = std::env::var("SOURCE_DATE_EPOCH") {
        partial.graph.created_at = Some(epoch);
    }

    for item in loaded {
        match item {
            Loaded::NotUtf8(file_path) => {
                tracing::warn!(file = %file_path, "skipping file that is not UTF-8");
                partial.diagnostics.push(Diagnostic::NotUtf8 { file_path });
                partial.files_failed += 1;
            }
            Loaded::Failed(unit, facts, diag) => {
                partial.files_scanned += 1;
                partial.files_failed += 1;
                partial.diagnostics.push(diag);
                add_file(&mut partial, &unit, facts)?;
            }
            Loaded::Parsed(unit, facts) => {
                partial.files_scanned += 1;
                add_file(&mut partial, &unit, facts)?;
            }
        }
    }
    Ok(partial)
}

fn span(def: &crate::parser::DefFact) -> Span {
    Span {
        start_byte: def.span.start_byte,
        end_byte: def.span.end_byte,
        start_line: def.span.start_line,
        end_line: def.span.end_line,
    }
}

fn add_file(partial: &mut PartialGraph, unit: &SourceUnit, facts: FileFacts) -> Result<(), IndexError> {
    let graph = &mut partial.graph;
    graph.add_file(&unit.file_path, &unit.content_hash);
    let file_path = facts.file_path.as_str();
    let module_name = facts.module_name.clone();

    let module_id = node_identity(NodeLabel::Module, file_path, &module_name);
    graph.insert_node(NodeRecord {
        id: module_id,
        label: NodeLabel::Module,
        name: module_name.clone(),
        file_path: file_path.to_string(),
        class_name: None,
        signature: None,
        span: None,
    })?;

    let mut symbols = BTreeMap::new();
    let mut classes: BTreeMap<String, ClassEntry> = BTreeMap::new();
    let mut readers: BTreeMap<String, NodeId> = BTreeMap::new();

    for def in &facts.definitions {
        let label = match def.kind {
            DefKind::Class => NodeLabel::Class,
            DefKind::Function => NodeLabel::Function,
            DefKind::Method => NodeLabel::Method,
            DefKind::Field => NodeLabel::Field,
            DefKind::GlobalVariable => NodeLabel::GlobalVariable,
        };
        let id = node_identity(label, file_path, &def.qualified_name);
        graph.insert_node(NodeRecord {
            id,
            label,
            name: def.name.clone(),
            file_path: file_path.to_string(),
            class_name: def.enclosing_class.clone(),
            signature: def.signature.clone(),
            span: label.has_code_span().then(|| span(def)),
        })?;
        match def.kind {
            DefKind::Class | DefKind::Function | DefKind::GlobalVariable => {
                graph.add_edge(EdgeType::Contains, module_id, id)?;
                symbols.entry(def.name.clone()).or_insert((label, id));
                if def.kind == DefKind::Class {
                    classes.insert(
                        def.qualified_name.clone(),
                        ClassEntry {
                            id,
                            module: module_name.clone(),
                            qualified_name: def.qualified_name.clone(),
                            methods: BTreeMap::new(),
                            fields: BTreeMap::new(),
                            base_exprs: Vec::new(),
                            bases: Vec::new(),
                        },
                    );
                } else if def.kind == DefKind::Function {
                    readers.insert(def.qualified_name.clone(), id);
                }
            }
            DefKind::Method | DefKind::Field => {
                let class_qualified = def
                    .qualified_name
                    .rsplit_once('.')
                    .map(|(c, _)| c.to_string())
                    .unwrap_or_default();
                let class = classes
                    .get_mut(&class_qualified)
                    .expect("class facts precede their members");
                if def.kind == DefKind::Method {
                    graph.add_edge(EdgeType::HasMethod, class.id, id)?;
                    class.methods.insert(def.name.clone(), id);
                    readers.insert(def.qualified_name.clone(), id);
                } else {
                    graph.add_edge(EdgeType::HasField, class.id, id)?;
                    class.fields.insert(def.name.clone(), id);
                }
            }
        }
    }

    // Bases naming a class of the same module resolve here, unless an
    // import rebinds the name.
    let imported: std::collections::BTreeSet<String> = facts
        .imports
        .iter()
        .flat_map(|i| i.bindings().into_iter().map(|(name, _)| name))
        .collect();
    for cb in &facts.bases {
        let Some(class) = classes.get(&cb.class_qualified_name) else {
            continue;
        };
        let class_id = class.id;
        let mut resolved = Vec::with_capacity(cb.bases.len());
        for base in &cb.bases {
            let local = match symbols.get(base.as_str()) {
                Some((NodeLabel::Class, id)) if !imported.contains(base) => Some(*id),
                _ => None,
            };
            if let Some(target) = local {
                graph.add_edge(EdgeType::Inherits, class_id, target)?;
            }
            resolved.push(local);
        }
        let class = classes.get_mut(&cb.class_qualified_name).expect("checked above");
        class.base_exprs = cb.bases.clone();
        class.bases = resolved;
    }

    let mut pending = Vec::new();
    for use_fact in &facts.uses {
        let Some(&reader) = readers.get(&use_fact.reader) else {
            continue;
        };
        let local = match use_fact.form {
            ReadForm::BareName => match symbols.get(&use_fact.name) {
                Some((NodeLabel::GlobalVariable, id)) => Some(Some(*id)),
                // A local class or function: not a USES target.
                Some(_) => Some(None),
                None => None,
            },
            ReadForm::SelfAttribute => {
                let class_qualified = use_fact.reader.rsplit_once('.').map(|(c, _)| c).unwrap_or_default();
                classes
                    .get(class_qualified)
                    .and_then(|c| c.fields.get(&use_fact.name))
                    .map(|id| Some(*id))
            }
        };
        match local {
            Some(Some(target)) => {
                graph.add_edge(EdgeType::Uses, reader, target)?;
            }
            Some(None) => {}
            None => pending.push((module_name.clone(), use_fact.clone())),
        }
    }

    if partial.modules.contains_key(&module_name) {
        partial.diagnostics.push(Diagnostic::DuplicateModule {
            module: module_name,
            file_path: file_path.to_string(),
        });
        return Ok(());
    }
    partial.pending_uses.extend(pending);
    partial.modules.insert(
        module_name,
        ModuleEntry {
            facts,
            node: module_id,
            symbols,
            classes,
        },
    );
    Ok(())
}
