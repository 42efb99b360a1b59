//! Two-phase repository indexing.
//!
//! Phase 1 scans every Python file once and emits all nodes plus the edges
//! that can be resolved inside a single file. Phase 2 resolves imports,
//! re-exports, base classes and inherited members across files. Phase 2
//! only adds edges.

mod phase1;
mod phase2;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use globset::{Glob, GlobSet, GlobSetBuilder};
use serde::Serialize;
use thiserror::Error;
use walkdir::WalkDir;

use crate::graph::{CodeGraph, GraphError};
use crate::parser::{ParseError, ParserError};
use crate::schema::{EdgeType, NodeLabel};

pub use phase1::{index_phase1, index_phase1_files, ClassEntry, ModuleEntry, PartialGraph};
pub use phase2::index_phase2;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid glob {pattern:?}: {message}")]
    Glob { pattern: String, message: String },
    #[error("repository has {found} Python files, more than the configured cap of {limit}")]
    TooManyFiles { found: usize, limit: usize },
    #[error("repository source size exceeds the indexing memory cap of {limit} bytes")]
    MemoryCapExceeded { limit: u64 },
    #[error(transparent)]
    Path(#[from] ParserError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone)]
pub struct IndexConfig {
    pub include_globs: Vec<String>,
    pub exclude_globs: Vec<String>,
    /// Skip `test*.py`, `*_test.py` and anything under `test/` or `tests/`.
    pub exclude_tests: bool,
    pub follow_symlinks: bool,
    pub max_files: usize,
    /// Upper bound on the total bytes of source held during indexing.
    pub max_source_bytes: u64,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            include_globs: vec!["**/*.py".to_string()],
            exclude_globs: Vec::new(),
            exclude_tests: false,
            follow_symlinks: false,
            max_files: 200_000,
            max_source_bytes: 1 << 30,
        }
    }
}

/// Something the indexer could not fully resolve. None of these are fatal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    ParseFailed(ParseError),
    NotUtf8 { file_path: String },
    DuplicateModule { module: String, file_path: String },
    ImportEscapesRoot { module: String, line: usize, level: u32 },
    UnresolvedImport { module: String, target: String },
    UnresolvedBase { class: String, base: String },
    InheritanceCycle { classes: Vec<String> },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::ParseFailed(e) => write!(f, "parse error: {e}"),
            Diagnostic::NotUtf8 { file_path } => write!(f, "{file_path}: not valid UTF-8, skipped"),
            Diagnostic::DuplicateModule { module, file_path } => {
                write!(f, "{file_path}: module {module} already defined by another file")
            }
            Diagnostic::ImportEscapesRoot { module, line, level } => write!(
                f,
                "{module}:{line}: relative import of level {level} escapes the repository root"
            ),
            Diagnostic::UnresolvedImport { module, target } => {
                write!(f, "{module}: cannot resolve import of {target}")
            }
            Diagnostic::UnresolvedBase { class, base } => {
                write!(f, "{class}: base {base} is not a repository class")
            }
            Diagnostic::InheritanceCycle { classes } => {
                write!(f, "inheritance cycle: {}", classes.join(" -> "))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexReport {
    pub repo_root: String,
    pub files_scanned: usize,
    pub files_failed: usize,
    pub nodes_by_label: BTreeMap<NodeLabel, usize>,
    pub edges_by_type: BTreeMap<EdgeType, usize>,
    pub total_nodes: usize,
    pub total_edges: usize,
    pub unresolved_imports: usize,
    pub unresolved_bases: usize,
    pub inheritance_cycles: usize,
    pub wall_time_ms: u128,
    pub diagnostics: Vec<Diagnostic>,
}

impl IndexReport {
    fn new(graph: &CodeGraph, outcome: &IndexOutcome, started: Instant) -> Self {
        let count = |pred: fn(&Diagnostic) -> bool| outcome.diagnostics.iter().filter(|d| pred(d)).count();
        Self {
            repo_root: graph.repo_root.clone(),
            files_scanned: outcome.files_scanned,
            files_failed: outcome.files_failed,
            nodes_by_label: graph.node_counts(),
            edges_by_type: graph.edge_counts(),
            total_nodes: graph.node_count(),
            total_edges: graph.edge_count(),
            unresolved_imports: count(|d| {
                matches!(d, Diagnostic::UnresolvedImport { .. } | Diagnostic::ImportEscapesRoot { .. })
            }),
            unresolved_bases: count(|d| matches!(d, Diagnostic::UnresolvedBase { .. })),
            inheritance_cycles: count(|d| matches!(d, Diagnostic::InheritanceCycle { .. })),
            wall_time_ms: started.elapsed().as_millis(),
            diagnostics: outcome.diagnostics.clone(),
        }
    }
}

impl fmt::Display for IndexReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |parts: Vec<String>| parts.join(", ");
        writeln!(f, "repository: {}", self.repo_root)?;
        writeln!(f, "files: {} scanned, {} failed", self.files_scanned, self.files_failed)?;
        writeln!(
            f,
            "{} nodes ({})",
            self.total_nodes,
            join(self.nodes_by_label.iter().map(|(l, n)| format!("{l} {n}")).collect())
        )?;
        writeln!(
            f,
            "{} edges ({})",
            self.total_edges,
            join(self.edges_by_type.iter().map(|(t, n)| format!("{t} {n}")).collect())
        )?;
        writeln!(
            f,
            "unresolved imports: {}, unresolved bases: {}, inheritance cycles: {}",
            self.unresolved_imports, self.unresolved_bases, self.inheritance_cycles
        )?;
        write!(f, "wall time: {} ms", self.wall_time_ms)
    }
}

/// Result of Phase 2.
#[derive(Debug, Clone)]
pub struct IndexOutcome {
    pub graph: CodeGraph,
    pub diagnostics: Vec<Diagnostic>,
    pub files_scanned: usize,
    pub files_failed: usize,
}

/// Index `repo_root` end to end.
pub fn index_repository(repo_root: &Path, config: &IndexConfig) -> Result<(CodeGraph, IndexReport), IndexError> {
    let started = Instant::now();
    let partial = index_phase1(repo_root, config)?;
    finish(partial, started)
}

/// Same as [`index_repository`] over an explicit file list, in the given
/// order. The result does not depend on that order.
pub fn index_files(
    repo_root: &Path,
    files: &[String],
    config: &IndexConfig,
) -> Result<(CodeGraph, IndexReport), IndexError> {
    let started = Instant::now();
    let partial = index_phase1_files(repo_root, files, config)?;
    finish(partial, started)
}

fn finish(partial: PartialGraph, started: Instant) -> Result<(CodeGraph, IndexReport), IndexError> {
    let outcome = index_phase2(partial)?;
    let report = IndexReport::new(&outcome.graph, &outcome, started);
    tracing::info!(
        nodes = report.total_nodes,
        edges = report.total_edges,
        ms = report.wall_time_ms as u64,
        "indexed repository"
    );
    Ok((outcome.graph, report))
}

fn build_globset(patterns: &[String]) -> Result<GlobSet, IndexError> {
    let mut builder = GlobSetBuilder::new();
    for p in patterns {
        let glob = Glob::new(p).map_err(|e| IndexError::Glob {
            pattern: p.clone(),
            message: e.to_string(),
        })?;
        builder.add(glob);
    }
    builder.build().map_err(|e| IndexError::Glob {
        pattern: patterns.join(","),
        message: e.to_string(),
    })
}

fn is_test_path(rel: &str) -> bool {
    let mut parts: Vec<&str> = rel.split('/').collect();
    let file = parts.pop().unwrap_or_default();
    file.starts_with("test") || file.ends_with("_test.py") || parts.iter().any(|d| *d == "test" || *d == "tests")
}

/// Repo-relative paths of the Python files selected by `config`, sorted.
pub fn discover_files(repo_root: &Path, config: &IndexConfig) -> Result<Vec<String>, IndexError> {
    let meta = std::fs::metadata(repo_root).map_err(|source| IndexError::Io {
        path: repo_root.to_path_buf(),
        source,
    })?;
    if !meta.is_dir() {
        return Err(IndexError::Io {
            path: repo_root.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotADirectory, "not a directory"),
        });
    }
    let include = build_globset(&config.include_globs)?;
    let exclude = build_globset(&config.exclude_globs)?;
    let mut files = Vec::new();
    let walker = WalkDir::new(repo_root)
        .follow_links(config.follow_symlinks)
        .sort_by_file_name();
    for entry in walker {
        let entry = entry.map_err(|e| IndexError::Io {
            path: e.path().map(Path::to_path_buf).unwrap_or_else(|| repo_root.to_path_buf()),
            source: e.into_io_error().unwrap_or_else(|| std::io::Error::other("filesystem loop")),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let Ok(rel) = entry.path().strip_prefix(repo_root) else {
            continue;
        };
        let Some(rel) = rel.to_str().map(|s| s.replace('\\', "/")) else {
            continue;
        };
        if !rel.ends_with(".py") || !include.is_match(&rel) || exclude.is_match(&rel) {
            continue;
        }
        if config.exclude_tests && is_test_path(&rel) {
            continue;
        }
        files.push(rel);
        if files.len() > config.max_files {
            return Err(IndexError::TooManyFiles {
                found: files.len(),
                limit: config.max_files,
            });
        }
    }
    files.sort();
    Ok(files)
}
