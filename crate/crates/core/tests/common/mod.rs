#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use codegraph_core::graph::CodeGraph;
use codegraph_core::indexer::{index_repository, IndexConfig, IndexReport};
use codegraph_core::schema::{NodeLabel, NodeRecord};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn index_fixture(name: &str) -> (CodeGraph, IndexReport) {
    index_repository(&fixture(name), &IndexConfig::default()).expect("fixture indexes")
}

/// `Class.member` for methods and fields, the plain name otherwise.
pub fn describe(node: &NodeRecord) -> String {
    match &node.class_name {
        Some(c) => format!("{c}.{}", node.name),
        None => node.name.clone(),
    }
}

/// Edges as `TYPE source -> target` strings.
pub fn edge_strings(graph: &CodeGraph) -> BTreeSet<String> {
    graph
        .edges()
        .map(|e| {
            let s = graph.node(e.source).expect("source exists");
            let t = graph.node(e.target).expect("target exists");
            format!("{} {} -> {}", e.edge_type, describe(s), describe(t))
        })
        .collect()
}

pub fn find(graph: &CodeGraph, label: NodeLabel, described: &str) -> NodeRecord {
    graph
        .nodes()
        .find(|n| n.label == label && describe(n) == described)
        .unwrap_or_else(|| panic!("no {label} {described}"))
        .clone()
}
