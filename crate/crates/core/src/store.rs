//! Snapshot persistence and the read-only graph handle.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CodeGraph, FileEntry};
use crate::parser::content_hash;
use crate::schema::{edge_identity, EdgeRecord, EdgeType, NodeId, NodeLabel, NodeRecord, SCHEMA_VERSION};

pub const FORMAT_VERSION: u32 = 1;
pub const META_FILE: &str = "meta.json";
pub const NODES_FILE: &str = "nodes.jsonl";
pub const EDGES_FILE: &str = "edges.jsonl";
const LOCK_FILE: &str = ".lock";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Snapshot { file: String, line: usize, message: String },
    #[error("unsupported {what} {found} (this build reads {supported})")]
    Version { what: &'static str, found: u32, supported: u32 },
    #[error("snapshot directory {0} is locked by another writer")]
    Locked(PathBuf),
    #[error("unknown node {0}")]
    NotFound(String),
    #[error("{label} nodes carry no code span")]
    NoCodeSpan { label: NodeLabel },
    #[error("{file_path} changed since it was indexed; re-index the repository")]
    StaleSource { file_path: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotMeta {
    pub format_version: u32,
    pub schema_version: u32,
    pub repo_root: String,
    pub created_at: Option<String>,
    pub files: Vec<FileEntry>,
}

struct DirLock(PathBuf);

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self, StoreError> {
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(StoreError::Locked(dir.to_path_buf())),
            Err(e) => Err(io_err(&path)(e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn write_atomic(dir: &Path, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), StoreError> {
    let tmp = dir.join(format!("{name}.tmp"));
    let dest = dir.join(name);
    let file = File::create(&tmp).map_err(io_err(&tmp))?;
    let mut out = BufWriter::new(file);
    body(&mut out).and_then(|_| out.flush()).map_err(io_err(&tmp))?;
    fs::rename(&tmp, &dest).map_err(io_err(&dest))
}

fn write_lines<T: Serialize>(out: &mut BufWriter<File>, items: impl Iterator<Item = T>) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut *out, &item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes `graph` to `dir` in canonical order. Writers are exclusive.
pub fn save_snapshot(graph: &CodeGraph, dir: &Path) -> Result<(), StoreError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let _lock = DirLock::acquire(dir)?;
    let meta = SnapshotMeta {
        format_version: FORMAT_VERSION,
        schema_version: SCHEMA_VERSION,
        repo_root: graph.repo_root.clone(),
        created_at: graph.created_at.clone(),
        files: graph.files().collect(),
    };
    write_atomic(dir, NODES_FILE, |out| write_lines(out, graph.nodes()))?;
    write_atomic(dir, EDGES_FILE, |out| write_lines(out, graph.edges()))?;
    write_atomic(dir, META_FILE, |out| {
        serde_json::to_writer_pretty(&mut *out, &meta)?;
        out.write_all(b"\n")
    })
}

fn read_lines<T: for<'de> Deserialize<'de>>(dir: &Path, name: &str) -> Result<Vec<(usize, T)>, StoreError> {
    let path = dir.join(name);
    let file = File::open(&path).map_err(io_err(&path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(&path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| StoreError::Snapshot {
            file: name.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, record));
    }
    Ok(out)
}

/// Reads a snapshot back into a [`CodeGraph`].
pub fn read_snapshot(dir: &Path) -> Result<CodeGraph, StoreError> {
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
    let meta: SnapshotMeta = serde_json::from_str(&text).map_err(|e| StoreError::Snapshot {
        file: META_FILE.to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    if meta.format_version != FORMAT_VERSION {
        return Err(StoreError::Version {
            what: "format_version",
            found: meta.format_version,
            supported: FORMAT_VERSION,
        });
    }
    if meta.schema_version != SCHEMA_VERSION {
        return Err(StoreError::Version {
            what: "schema_version",
            found: meta.schema_version,
            supported: SCHEMA_VERSION,
        });
    }

    let mut graph = CodeGraph::new(meta.repo_root);
    graph.created_at = meta.created_at;
    for f in meta.files {
        graph.add_file(f.path, f.hash);
    }
    for (line, node) in read_lines::<NodeRecord>(dir, NODES_FILE)? {
        let id = node.id;
        if !graph.insert_node(node).map_err(|e| StoreError::Snapshot {
            file: NODES_FILE.to_string(),
            line,
            message: e.to_string(),
        })? {
            return Err(StoreError::Snapshot {
                file: NODES_FILE.to_string(),
                line,
                message: format!("duplicate node {id}"),
            });
        }
    }
    for (line, edge) in read_lines::<EdgeRecord>(dir, EDGES_FILE)? {
        let bad = |message: String| StoreError::Snapshot {
            file: EDGES_FILE.to_string(),
            line,
            message,
        };
        for end in [edge.source, edge.target] {
            if graph.node(end).is_none() {
                return Err(bad(format!("dangling edge: node {end} is not in {NODES_FILE}")));
            }
        }
        if edge.id != edge_identity(edge.edge_type, edge.source, edge.target) {
            return Err(bad(format!("edge id {} does not match its endpoints", edge.id)));
        }
        graph.insert_edge_unchecked(edge);
    }
    Ok(graph)
}

/// Loads a snapshot and builds its indexes.
pub fn load_snapshot(dir: &Path) -> Result<GraphHandle, StoreError> {
    Ok(GraphHandle::new(read_snapshot(dir)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Out,
    In,
    Both,
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "out" => Ok(Direction::Out),
            "in" => Ok(Direction::In),
            "both" => Ok(Direction::Both),
            other => Err(format!("unknown direction {other:?} (expected out, in or both)")),
        }
    }
}

#[derive(Debug)]
struct Indexed {
    graph: CodeGraph,
    by_label: BTreeMap<NodeLabel, Vec<NodeId>>,
    by_label_name: HashMap<(NodeLabel, String), Vec<NodeId>>,
    /// Edge keys by source and by target, each in (type, other end) order.
    outgoing: HashMap<NodeId, Vec<(EdgeType, NodeId)>>,
    incoming: HashMap<NodeId, Vec<(EdgeType, NodeId)>>,
}

/// Immutable, cheaply cloneable view over one loaded graph.
#[derive(Debug, Clone)]
pub struct GraphHandle(Arc<Indexed>);

impl GraphHandle {
    pub fn new(graph: CodeGraph) -> Self {
        let mut by_label: BTreeMap<NodeLabel, Vec<NodeId>> = BTreeMap::new();
        let mut by_label_name: HashMap<(NodeLabel, String), Vec<NodeId>> = HashMap::new();
        for n in graph.nodes() {
            by_label.entry(n.label).or_default().push(n.id);
            by_label_name.entry((n.label, n.name.clone())).or_default().push(n.id);
        }
        let mut outgoing: HashMap<NodeId, Vec<(EdgeType, NodeId)>> = HashMap::new();
        let mut incoming: HashMap<NodeId, Vec<(EdgeType, NodeId)>> = HashMap::new();
        for e in graph.edges() {
            outgoing.entry(e.source).or_default().push((e.edge_type, e.target));
            incoming.entry(e.target).or_default().push((e.edge_type, e.source));
        }
        for list in incoming.values_mut() {
            list.sort();
        }
        Self(Arc::new(Indexed {
            graph,
            by_label,
            by_label_name,
            outgoing,
            incoming,
        }))
    }

    pub fn graph(&self) -> &CodeGraph {
        &self.0.graph
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeRecord> {
        self.0.graph.node(id)
    }

    /// Node ids with `label`, ascending.
    pub fn nodes_with_label(&self, label: NodeLabel) -> &[NodeId] {
        self.0.by_label.get(&label).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn find(&self, label: NodeLabel, name: &str) -> &[NodeId] {
        self.0
            .by_label_name
            .get(&(label, name.to_string()))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn has_edge(&self, edge_type: EdgeType, source: NodeId, target: NodeId) -> bool {
        self.0.graph.has_edge(edge_type, source, target)
    }

    /// Targets of `source` over edges of `edge_type` (any type if `None`).
    pub fn successors(&self, source: NodeId, edge_type: Option<EdgeType>) -> impl Iterator<Item = NodeId> + '_ {
        Self::adjacent(self.0.outgoing.get(&source), edge_type)
    }

    pub fn predecessors(&self, target: NodeId, edge_type: Option<EdgeType>) -> impl Iterator<Item = NodeId> + '_ {
        Self::adjacent(self.0.incoming.get(&target), edge_type)
    }

    fn adjacent(
        list: Option<&Vec<(EdgeType, NodeId)>>,
        edge_type: Option<EdgeType>,
    ) -> impl Iterator<Item = NodeId> + '_ {
        list.into_iter()
            .flatten()
            .filter(move |(t, _)| edge_type.is_none_or(|want| *t == want))
            .map(|(_, n)| *n)
    }

    /// Edges touching `node` with the node at the other end, sorted by
    /// (edge type, neighbor id).
    pub fn neighbors(
        &self,
        node: NodeId,
        direction: Direction,
        edge_type: Option<EdgeType>,
    ) -> Result<Vec<(EdgeRecord, NodeRecord)>, StoreError> {
        if self.node(node).is_none() {
            return Err(StoreError::NotFound(node.to_string()));
        }
        let graph = &self.0.graph;
        let mut keys: Vec<(EdgeType, NodeId, NodeId, NodeId)> = Vec::new();
        let matches = |t: &EdgeType| edge_type.is_none_or(|want| *t == want);
        if direction != Direction::In {
            for (t, other) in self.0.outgoing.get(&node).into_iter().flatten().filter(|(t, _)| matches(t)) {
                keys.push((*t, *other, node, *other));
            }
        }
        if direction != Direction::Out {
            for (t, other) in self.0.incoming.get(&node).into_iter().flatten().filter(|(t, _)| matches(t)) {
                keys.push((*t, *other, *other, node));
            }
        }
        keys.sort();
        keys.dedup();
        Ok(keys
            .into_iter()
            .map(|(t, other, s, d)| {
                let edge = graph
                    .out_edges(t, s)
                    .find(|e| e.target == d)
                    .expect("adjacency mirrors the edge set")
                    .clone();
                (edge, graph.node(other).expect("edges reference known nodes").clone())
            })
            .collect())
    }

    /// Source text of a span-bearing node, read from `repo_root` after
    /// checking the file still has its indexed hash.
    pub fn resolve_code(&self, node: NodeId, repo_root: &Path) -> Result<String, StoreError> {
        let record = self.node(node).ok_or_else(|| StoreError::NotFound(node.to_string()))?;
        let span = record.span.ok_or(StoreError::NoCodeSpan { label: record.label })?;
        let path = repo_root.join(&record.file_path);
        let stale = || StoreError::StaleSource {
            file_path: record.file_path.clone(),
        };
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(stale()),
            Err(e) => return Err(io_err(&path)(e)),
        };
        if self.0.graph.file_hash(&record.file_path) != Some(content_hash(&bytes).as_str()) {
            return Err(stale());
        }
        bytes
            .get(span.start_byte..span.end_byte)
            .and_then(|b| std::str::from_utf8(b).ok())
            .map(str::to_string)
            .ok_or_else(stale)
    }
}
