//! Random class hierarchies and a brute-force oracle that walks bases
//! recursively, depth first and left to right, keeping the first
//! definition of each member name.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use codegraph_core::indexer::{index_repository, Diagnostic, IndexConfig};
use codegraph_core::schema::{validate, EdgeType};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone)]
pub struct Class {
    pub bases: Vec<usize>,
    pub methods: BTreeSet<usize>,
    pub fields: BTreeSet<usize>,
}

/// Up to 8 classes with up to 3 distinct bases each; self-references and
/// back-references produce cycles, shared bases produce diamonds.
pub fn random_hierarchy(rng: &mut StdRng) -> Vec<Class> {
    let n = rng.random_range(1..=8usize);
    (0..n)
        .map(|_| {
            let mut all: Vec<usize> = (0..n).collect();
            all.shuffle(rng);
            let bases = all.into_iter().take(rng.random_range(0..=3usize.min(n))).collect();
            let methods = (0..4).filter(|_| rng.random_bool(0.4)).collect();
            let fields = (0..3).filter(|_| rng.random_bool(0.3)).collect();
            Class { bases, methods, fields }
        })
        .collect()
}

pub fn render(classes: &[Class]) -> String {
    let mut src = String::new();
    for (i, c) in classes.iter().enumerate() {
        let bases: Vec<String> = c.bases.iter().map(|b| format!("C{b}")).collect();
        src.push_str(&format!("class C{i}({}):\n", bases.join(", ")));
        if c.methods.is_empty() && c.fields.is_empty() {
            src.push_str("    pass\n");
        }
        for f in &c.fields {
            src.push_str(&format!("    f{f} = {i}\n"));
        }
        for m in &c.methods {
            src.push_str(&format!("    def m{m}(self):\n        return {i}\n"));
        }
        src.push('\n');
    }
    src
}

pub fn reaches(classes: &[Class], from: usize, to: usize) -> bool {
    let mut seen = BTreeSet::new();
    let mut todo = classes[from].bases.clone();
    while let Some(c) = todo.pop() {
        if c == to {
            return true;
        }
        if seen.insert(c) {
            todo.extend(classes[c].bases.iter().copied());
        }
    }
    false
}

fn walk(classes: &[Class], c: usize, seen: &mut BTreeSet<usize>, order: &mut Vec<usize>) {
    if !seen.insert(c) {
        return;
    }
    order.push(c);
    for &b in &classes[c].bases {
        walk(classes, b, seen, order);
    }
}

/// Expected inherited edges as `TYPE Cx -> Cy.member` strings.
pub fn oracle(classes: &[Class]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for (i, c) in classes.iter().enumerate() {
        if reaches(classes, i, i) {
            continue;
        }
        let mut order = Vec::new();
        let mut seen = BTreeSet::from([i]);
        for &b in &c.bases {
            walk(classes, b, &mut seen, &mut order);
        }
        let mut methods: BTreeMap<usize, usize> = BTreeMap::new();
        let mut fields: BTreeMap<usize, usize> = BTreeMap::new();
        for &a in &order {
            for &m in &classes[a].methods {
                if !c.methods.contains(&m) {
                    methods.entry(m).or_insert(a);
                }
            }
            for &f in &classes[a].fields {
                if !c.fields.contains(&f) {
                    fields.entry(f).or_insert(a);
                }
            }
        }
        out.extend(methods.iter().map(|(m, a)| format!("HAS_METHOD C{i} -> C{a}.m{m}")));
        out.extend(fields.iter().map(|(f, a)| format!("HAS_FIELD C{i} -> C{a}.f{f}")));
    }
    out
}

pub fn inherited(edges: &BTreeSet<String>) -> BTreeSet<String> {
    edges
        .iter()
        .filter(|e| {
            let Some((head, target)) = e.split_once(" -> ") else {
                return false;
            };
            let mut parts = head.split(' ');
            let (Some(kind), Some(source)) = (parts.next(), parts.next()) else {
                return false;
            };
            (kind == "HAS_METHOD" || kind == "HAS_FIELD") && !target.starts_with(&format!("{source}."))
        })
        .cloned()
        .collect()
}

/// Indexes `classes` as one module and compares the inherited member
/// edges, cycle diagnostics and INHERITS count with the oracle.
pub fn check(classes: &[Class]) -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    std::fs::write(dir.path().join("h.py"), render(classes)).map_err(|e| e.to_string())?;
    let (graph, report) = index_repository(dir.path(), &IndexConfig::default()).map_err(|e| e.to_string())?;
    let edges: BTreeSet<String> = graph
        .edges()
        .map(|e| {
            let d = |id| {
                let n = graph.node(id).unwrap();
                match &n.class_name {
                    Some(c) => format!("{c}.{}", n.name),
                    None => n.name.clone(),
                }
            };
            format!("{} {} -> {}", e.edge_type, d(e.source), d(e.target))
        })
        .collect();
    let got = inherited(&edges);
    let want = oracle(classes);
    if got != want {
        return Err(format!("{}
indexer: {got:?}
oracle: {want:?}", render(classes)));
    }
    if !validate(&graph).is_empty() {
        return Err("schema violations".into());
    }
    let in_cycle: BTreeSet<String> =
        (0..classes.len()).filter(|&i| reaches(classes, i, i)).map(|i| format!("h.C{i}")).collect();
    let reported: BTreeSet<String> = report
        .diagnostics
        .iter()
        .filter_map(|d| match d {
            Diagnostic::InheritanceCycle { classes } => Some(classes.clone()),
            _ => None,
        })
        .flatten()
        .collect();
    if reported != in_cycle {
        return Err(format!("cycles: reported {reported:?}, expected {in_cycle:?}"));
    }
    let declared: usize = classes.iter().map(|c| c.bases.len()).sum();
    if report.edges_by_type[&EdgeType::Inherits] != declared {
        return Err("INHERITS count differs from declared bases".into());
    }
    Ok(())
}
