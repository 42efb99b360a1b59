pub mod cli;
pub mod service;

use std::collections::BTreeMap;
use std::path::Path;

use codegraph_core::query::{execute_with_source, parse_query, Caps, QueryError, ResultTable};
use codegraph_core::schema::{EdgeType, NodeLabel};
use codegraph_core::store::GraphHandle;
use serde::Serialize;

/// Parses and runs `text`. `limit` tightens the query's own LIMIT.
/// The CLI and the HTTP service both go through here.
pub fn run_query(
    handle: &GraphHandle,
    text: &str,
    limit: Option<usize>,
    caps: Caps,
    source_root: Option<&Path>,
) -> Result<ResultTable, QueryError> {
    let mut query = parse_query(text)?;
    if let Some(l) = limit {
        query.limit = Some(query.limit.map_or(l, |q| q.min(l)));
    }
    Ok(execute_with_source(&query, handle, caps, source_root))
}

#[derive(Debug, Clone, Serialize)]
pub struct Stats {
    pub repo_root: String,
    pub created_at: Option<String>,
    pub files: usize,
    pub total_nodes: usize,
    pub total_edges: usize,
    pub nodes_by_label: BTreeMap<NodeLabel, usize>,
    pub edges_by_type: BTreeMap<EdgeType, usize>,
}

impl Stats {
    pub fn of(handle: &GraphHandle) -> Self {
        let g = handle.graph();
        Self {
            repo_root: g.repo_root.clone(),
            created_at: g.created_at.clone(),
            files: g.files().count(),
            total_nodes: g.node_count(),
            total_edges: g.edge_count(),
            nodes_by_label: g.node_counts(),
            edges_by_type: g.edge_counts(),
        }
    }
}

impl std::fmt::Display for Stats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let join = |parts: Vec<String>| parts.join(", ");
        writeln!(f, "repository: {}", self.repo_root)?;
        writeln!(f, "files: {}", self.files)?;
        writeln!(
            f,
            "{} nodes ({})",
            self.total_nodes,
            join(self.nodes_by_label.iter().map(|(l, n)| format!("{l} {n}")).collect())
        )?;
        write!(
            f,
            "{} edges ({})",
            self.total_edges,
            join(self.edges_by_type.iter().map(|(t, n)| format!("{t} {n}")).collect())
        )
    }
}
