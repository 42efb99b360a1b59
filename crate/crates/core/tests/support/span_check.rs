//! Checks that resolved code spans reparse as a definition of the node's
//! kind and name.

#![allow(dead_code)]

use std::path::Path;

use codegraph_core::parser::{extract_facts, DefKind, SourceUnit};
use codegraph_core::schema::NodeLabel;
use codegraph_core::store::GraphHandle;

/// Re-indents the first line to its original column, then strips the
/// indentation common to every non-blank line.
fn dedent(code: &str, column: usize) -> String {
    let text = format!("{}{code}", " ".repeat(column));
    let common = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    text.lines()
        .map(|l| if l.len() >= common { &l[common..] } else { l.trim_start() })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

/// Descriptions of every span-bearing node whose code does not reparse.
pub fn span_failures(handle: &GraphHandle, root: &Path) -> Vec<String> {
    let mut failures = Vec::new();
    let mut checked = 0;
    for node in handle.graph().nodes().filter(|n| n.span.is_some()) {
        checked += 1;
        let describe = format!("{} {} in {}", node.label, node.name, node.file_path);
        let code = match handle.resolve_code(node.id, root) {
            Ok(c) => c,
            Err(e) => {
                failures.push(format!("{describe}: {e}"));
                continue;
            }
        };
        let source = std::fs::read(root.join(&node.file_path)).unwrap();
        let start = node.span.unwrap().start_byte;
        let line_start = source[..start].iter().rposition(|b| *b == b'\n').map_or(0, |p| p + 1);
        let snippet = dedent(&code, start - line_start);
        let want = match node.label {
            NodeLabel::Class => DefKind::Class,
            NodeLabel::Function | NodeLabel::Method => DefKind::Function,
            NodeLabel::GlobalVariable => DefKind::GlobalVariable,
            other => {
                failures.push(format!("{describe}: {other} should not carry a span"));
                continue;
            }
        };
        match extract_facts(&SourceUnit::new("snippet.py", snippet.clone())) {
            Ok(facts) if facts.definitions.iter().any(|d| d.kind == want && d.name == node.name) => {}
            Ok(_) => failures.push(format!("{describe}: no {want:?} {} in {snippet:?}", node.name)),
            Err(e) => failures.push(format!("{describe}: {} in {snippet:?}", e.error)),
        }
    }
    assert!(checked > 0, "no span-bearing nodes");
    failures
}
