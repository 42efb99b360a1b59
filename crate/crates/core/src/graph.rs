use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{edge_identity, EdgeRecord, EdgeType, NodeId, NodeLabel, NodeRecord};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("node id collision: {id} is shared by {first} and {second}")]
    IdCollision {
        id: NodeId,
        first: String,
        second: String,
    },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("{edge_type} is not permitted from {source_label} to {target_label}")]
    ForbiddenEdge {
        edge_type: EdgeType,
        source_label: NodeLabel,
        target_label: NodeLabel,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub hash: String,
}

/// Canonical edge order: (type, source, target).
pub type EdgeKey = (EdgeType, NodeId, NodeId);

/// An indexed repository: nodes by id, edges in canonical order, and the
/// content hash of every indexed file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CodeGraph {
    pub repo_root: String,
    pub created_at: Option<String>,
    files: BTreeMap<String, String>,
    nodes: BTreeMap<NodeId, NodeRecord>,
    edges: BTreeMap<EdgeKey, EdgeRecord>,
}

impl CodeGraph {
    pub fn new(repo_root: impl Into<String>) -> Self {
        Self {
            repo_root: repo_root.into(),
            ..Self::default()
        }
    }

    pub fn add_file(&mut self, path: impl Into<String>, hash: impl Into<String>) {
        self.files.insert(path.into(), hash.into());
    }

    pub fn files(&self) -> impl Iterator<Item = FileEntry> + '_ {
        self.files.iter().map(|(path, hash)| FileEntry {
            path: path.clone(),
            hash: hash.clone(),
        })
    }

    pub fn file_hash(&self, path: &str) -> Option<&str> {
        self.files.get(path).map(String::as_str)
    }

    /// Inserts `node`. Re-inserting an identical identity keeps the first
    /// record; a different record under the same id is a collision.
    pub fn insert_node(&mut self, node: NodeRecord) -> Result<bool, GraphError> {
        match self.nodes.get(&node.id) {
            Some(existing) => {
                if existing.label == node.label
                    && existing.file_path == node.file_path
                    && existing.name == node.name
                    && existing.class_name == node.class_name
                {
                    Ok(false)
                } else {
                    Err(GraphError::IdCollision {
                        id: node.id,
                        first: format!("{} {}", existing.label, existing.name),
                        second: format!("{} {}", node.label, node.name),
                    })
                }
            }
            None => {
                self.nodes.insert(node.id, node);
                Ok(true)
            }
        }
    }

    /// Adds an edge after checking both endpoints exist and the schema
    /// permits the pair. USES edges get their association types from the
    /// endpoint labels. Returns false when the edge was already present.
    pub fn add_edge(&mut self, edge_type: EdgeType, source: NodeId, target: NodeId) -> Result<bool, GraphError> {
        let s = self.nodes.get(&source).ok_or(GraphError::UnknownNode(source))?.label;
        let t = self.nodes.get(&target).ok_or(GraphError::UnknownNode(target))?.label;
        if !edge_type.permits(s, t) {
            return Err(GraphError::ForbiddenEdge {
                edge_type,
                source_label: s,
                target_label: t,
            });
        }
        let key = (edge_type, source, target);
        if self.edges.contains_key(&key) {
            return Ok(false);
        }
        let uses = edge_type == EdgeType::Uses;
        self.edges.insert(
            key,
            EdgeRecord {
                id: edge_identity(edge_type, source, target),
                edge_type,
                source,
                target,
                source_association_type: uses.then_some(s),
                target_association_type: uses.then_some(t),
            },
        );
        Ok(true)
    }

    /// Inserts a record verbatim, without endpoint checks. Used when
    /// loading snapshots and in validation tests.
    pub fn insert_edge_unchecked(&mut self, edge: EdgeRecord) {
        self.edges.insert((edge.edge_type, edge.source, edge.target), edge);
    }

    pub fn has_edge(&self, edge_type: EdgeType, source: NodeId, target: NodeId) -> bool {
        self.edges.contains_key(&(edge_type, source, target))
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeRecord> {
        self.nodes.get(&id)
    }

    /// Nodes in id order.
    pub fn nodes(&self) -> impl Iterator<Item = &NodeRecord> {
        self.nodes.values()
    }

    /// Edges in (type, source, target) order.
    pub fn edges(&self) -> impl Iterator<Item = &EdgeRecord> {
        self.edges.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_counts(&self) -> BTreeMap<NodeLabel, usize> {
        let mut counts: BTreeMap<NodeLabel, usize> = NodeLabel::ALL.iter().map(|l| (*l, 0)).collect();
        for n in self.nodes.values() {
            *counts.entry(n.label).or_default() += 1;
        }
        counts
    }

    pub fn edge_counts(&self) -> BTreeMap<EdgeType, usize> {
        let mut counts: BTreeMap<EdgeType, usize> = EdgeType::ALL.iter().map(|t| (*t, 0)).collect();
        for e in self.edges.values() {
            *counts.entry(e.edge_type).or_default() += 1;
        }
        counts
    }

    /// Outgoing edges of `source` with the given type, in target order.
    pub fn out_edges(&self, edge_type: EdgeType, source: NodeId) -> impl Iterator<Item = &EdgeRecord> {
        let lo = (edge_type, source, NodeId::MIN);
        let hi = (edge_type, source, NodeId::MAX);
        self.edges.range(lo..=hi).map(|(_, e)| e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{node_identity, Span};

    fn rec(label: NodeLabel, qualified: &str) -> NodeRecord {
        NodeRecord {
            id: node_identity(label, "m.py", qualified),
            label,
            name: qualified.rsplit('.').next().unwrap().to_string(),
            file_path: "m.py".into(),
            class_name: label.has_class_name().then(|| "C".into()),
            signature: label.has_signature().then(|| "sig".into()),
            span: label.has_code_span().then_some(Span { start_byte: 0, end_byte: 1, start_line: 1, end_line: 1 }),
        }
    }

    #[test]
    fn uses_edges_carry_endpoint_labels() {
        let mut g = CodeGraph::new("r");
        let f = rec(NodeLabel::Method, "m.C.f");
        let x = rec(NodeLabel::Field, "m.C.x");
        let (fid, xid) = (f.id, x.id);
        g.insert_node(f).unwrap();
        g.insert_node(x).unwrap();
        assert!(g.add_edge(EdgeType::Uses, fid, xid).unwrap());
        assert!(!g.add_edge(EdgeType::Uses, fid, xid).unwrap());
        let e = g.edges().next().unwrap();
        assert_eq!(e.source_association_type, Some(NodeLabel::Method));
        assert_eq!(e.target_association_type, Some(NodeLabel::Field));
        assert!(matches!(
            g.add_edge(EdgeType::Contains, fid, xid),
            Err(GraphError::ForbiddenEdge { .. })
        ));
    }

    #[test]
    fn reinserting_same_identity_is_not_a_collision() {
        let mut g = CodeGraph::new("r");
        assert!(g.insert_node(rec(NodeLabel::Class, "m.C")).unwrap());
        assert!(!g.insert_node(rec(NodeLabel::Class, "m.C")).unwrap());
        let mut forged = rec(NodeLabel::Class, "m.D");
        forged.id = node_identity(NodeLabel::Class, "m.py", "m.C");
        assert!(matches!(g.insert_node(forged), Err(GraphError::IdCollision { .. })));
    }

    #[test]
    fn out_edges_by_range() {
        let mut g = CodeGraph::new("r");
        let c = rec(NodeLabel::Class, "m.C");
        let cid = c.id;
        g.insert_node(c).unwrap();
        let mut ids = Vec::new();
        for name in ["m.C.a", "m.C.b", "m.C.c"] {
            let m = rec(NodeLabel::Method, name);
            ids.push(m.id);
            g.insert_node(m).unwrap();
            g.add_edge(EdgeType::HasMethod, cid, *ids.last().unwrap()).unwrap();
        }
        ids.sort();
        let got: Vec<_> = g.out_edges(EdgeType::HasMethod, cid).map(|e| e.target).collect();
        assert_eq!(got, ids);
        assert_eq!(g.out_edges(EdgeType::HasField, cid).count(), 0);
    }
}
