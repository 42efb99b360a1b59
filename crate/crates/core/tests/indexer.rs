mod common;

use std::collections::BTreeSet;

use codegraph_core::indexer::{
    index_files, index_phase1, index_phase2, index_repository, Diagnostic, IndexConfig, IndexError,
};
use codegraph_core::schema::{validate, EdgeType, NodeLabel};
use common::{edge_strings, find, fixture, index_fixture};

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

#[test]
fn alpha_phase1_nodes_and_local_edges() {
    let partial = index_phase1(&fixture("alpha"), &IndexConfig::default()).unwrap();
    let counts = partial.graph.node_counts();
    assert_eq!(partial.graph.node_count(), 15);
    assert_eq!(counts[&NodeLabel::Module], 4);
    assert_eq!(counts[&NodeLabel::Class], 2);
    assert_eq!(counts[&NodeLabel::Method], 4);
    assert_eq!(counts[&NodeLabel::Function], 3);
    assert_eq!(counts[&NodeLabel::Field], 1);
    assert_eq!(counts[&NodeLabel::GlobalVariable], 1);
    let edges = edge_strings(&partial.graph);
    assert!(!edges.contains("CONTAINS pkg -> Engine"));
    assert!(!edges.contains("HAS_METHOD Engine -> Base.__init__"));
    // Engine(Base) is resolvable inside pkg/core.py.
    assert!(edges.contains("INHERITS Engine -> Base"));
}

#[test]
fn alpha_full_edge_set() {
    let (graph, report) = index_fixture("alpha");
    let expected = set(&[
        "CONTAINS pkg.core -> RATE",
        "CONTAINS pkg.core -> Base",
        "CONTAINS pkg.core -> Engine",
        "CONTAINS pkg.core -> helper",
        "CONTAINS pkg.util -> helper2",
        "CONTAINS main -> main",
        "CONTAINS pkg -> Engine",
        "HAS_METHOD Base -> Base.__init__",
        "HAS_METHOD Base -> Base.run",
        "HAS_METHOD Engine -> Engine.run",
        "HAS_METHOD Engine -> Engine.stop",
        "HAS_METHOD Engine -> Base.__init__",
        "HAS_FIELD Base -> Base.x",
        "HAS_FIELD Engine -> Base.x",
        "INHERITS Engine -> Base",
        "USES helper -> RATE",
        "USES Base.run -> Base.x",
    ]);
    assert_eq!(edge_strings(&graph), expected);
    assert_eq!(graph.edge_count(), 17);
    assert_eq!(report.total_nodes, 15);
    assert_eq!(report.edges_by_type[&EdgeType::Contains], 7);
    assert_eq!(report.edges_by_type[&EdgeType::HasMethod], 5);
    assert_eq!(report.edges_by_type[&EdgeType::HasField], 2);
    assert_eq!(report.edges_by_type[&EdgeType::Inherits], 1);
    assert_eq!(report.edges_by_type[&EdgeType::Uses], 2);
    assert_eq!(report.files_scanned, 4);
    assert!(validate(&graph).is_empty());
    assert!(report.to_string().contains("15 nodes"));
}

#[test]
fn phase2_only_adds_edges() {
    let partial = index_phase1(&fixture("beta"), &IndexConfig::default()).unwrap();
    let before: Vec<_> = partial.graph.nodes().cloned().collect();
    let before_edges = edge_strings(&partial.graph);
    let outcome = index_phase2(partial).unwrap();
    let after: Vec<_> = outcome.graph.nodes().cloned().collect();
    assert_eq!(before, after);
    assert!(before_edges.is_subset(&edge_strings(&outcome.graph)));
}

#[test]
fn beta_star_reexports_respect_all() {
    let (graph, _) = index_fixture("beta");
    let edges = edge_strings(&graph);
    for e in ["CONTAINS shapes -> Shape", "CONTAINS shapes -> UNIT", "CONTAINS shapes -> Circle"] {
        assert!(edges.contains(e), "missing {e}");
    }
    assert!(!edges.iter().any(|e| e.ends_with("-> _PRIVATE") && e.starts_with("CONTAINS shapes ")));
    // Re-export chain app.main -> shapes -> shapes.base.
    assert!(edges.contains("CONTAINS app.main -> UNIT"));
    assert!(edges.contains("CONTAINS app.main -> Circle"));
    assert!(edges.contains("USES scale -> UNIT"));
    let unit = find(&graph, NodeLabel::GlobalVariable, "UNIT");
    assert_eq!(unit.file_path, "shapes/base.py");
}

#[test]
fn beta_inheritance_and_members() {
    let (graph, report) = index_fixture("beta");
    let edges = edge_strings(&graph);
    for e in [
        "INHERITS Circle -> Shape",
        "INHERITS Big -> Shape",
        "INHERITS Wrapped -> Circle",
        "HAS_METHOD Circle -> Shape.describe",
        "HAS_FIELD Circle -> Shape.name",
        "USES Circle.label -> Shape.name",
        "USES Wrapped.size -> Circle.radius",
        "HAS_METHOD Wrapped -> Circle.area",
        "HAS_METHOD Wrapped -> Shape.describe",
        "HAS_METHOD D -> A.m",
        "HAS_FIELD D -> A.x",
    ] {
        assert!(edges.contains(e), "missing {e}");
    }
    assert!(!edges.contains("HAS_METHOD Circle -> Shape.area"), "local area shadows");
    assert!(!edges.contains("HAS_METHOD Wrapped -> Shape.area"));
    assert!(!edges.contains("HAS_METHOD D -> C.m"), "DFS reaches A.m through B first");
    // Cycle members get INHERITS but no propagation.
    assert!(edges.contains("INHERITS P -> Q") && edges.contains("INHERITS Q -> P"));
    assert!(!edges.contains("HAS_METHOD P -> Q.q"));
    assert!(report
        .diagnostics
        .contains(&Diagnostic::InheritanceCycle { classes: vec!["cycles.P".into(), "cycles.Q".into()] }));
    assert!(report
        .diagnostics
        .iter()
        .any(|d| matches!(d, Diagnostic::UnresolvedBase { base, .. } if base == "os.PathLike")));
    assert!(report
        .diagnostics
        .iter()
        .any(|d| matches!(d, Diagnostic::ImportEscapesRoot { module, level: 2, .. } if module == "app.main")));
    assert!(validate(&graph).is_empty());
}

#[test]
fn import_cycles_terminate_without_edges() {
    let (graph, _) = index_fixture("beta");
    let edges = edge_strings(&graph);
    assert!(!edges.iter().any(|e| e.starts_with("CONTAINS loop_")));
}

#[test]
fn enumeration_order_does_not_matter() {
    let root = fixture("beta");
    let config = IndexConfig::default();
    let files = codegraph_core::indexer::discover_files(&root, &config).unwrap();
    let mut reversed = files.clone();
    reversed.reverse();
    let (a, _) = index_files(&root, &files, &config).unwrap();
    let (b, _) = index_files(&root, &reversed, &config).unwrap();
    assert_eq!(a, b);
}

#[test]
fn empty_directory_gives_empty_graph() {
    let dir = tempfile::tempdir().unwrap();
    let (graph, report) = index_repository(dir.path(), &IndexConfig::default()).unwrap();
    assert_eq!((graph.node_count(), graph.edge_count()), (0, 0));
    assert_eq!(report.files_scanned, 0);
}

#[test]
fn single_function_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("one.py"), "def f():\n    return 1\n").unwrap();
    let (graph, _) = index_repository(dir.path(), &IndexConfig::default()).unwrap();
    assert_eq!(graph.node_count(), 2);
    assert_eq!(edge_strings(&graph), set(&["CONTAINS one -> f"]));
}

#[test]
fn renamed_file_changes_only_its_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let copy = |from: &std::path::Path, to: &std::path::Path| {
        for entry in walkdir::WalkDir::new(from) {
            let entry = entry.unwrap();
            let rel = entry.path().strip_prefix(from).unwrap();
            let dest = to.join(rel);
            if entry.file_type().is_dir() {
                std::fs::create_dir_all(&dest).unwrap();
            } else {
                std::fs::copy(entry.path(), &dest).unwrap();
            }
        }
    };
    copy(&fixture("alpha"), dir.path());
    let (before, _) = index_repository(dir.path(), &IndexConfig::default()).unwrap();
    std::fs::rename(dir.path().join("pkg/util.py"), dir.path().join("pkg/tools.py")).unwrap();
    let (after, _) = index_repository(dir.path(), &IndexConfig::default()).unwrap();

    let ids = |g: &codegraph_core::graph::CodeGraph, keep: fn(&str) -> bool| -> BTreeSet<_> {
        g.nodes().filter(|n| keep(&n.file_path)).map(|n| n.id).collect()
    };
    let others = |p: &str| p != "pkg/util.py" && p != "pkg/tools.py";
    assert_eq!(ids(&before, others), ids(&after, others));
    assert!(ids(&before, |p| p == "pkg/util.py").is_disjoint(&ids(&after, |p| p == "pkg/tools.py")));
    assert_eq!(before.node_count(), after.node_count());
    let unchanged = |g: &codegraph_core::graph::CodeGraph| -> BTreeSet<_> {
        g.edges()
            .filter(|e| {
                let s = g.node(e.source).unwrap();
                let t = g.node(e.target).unwrap();
                others(&s.file_path) && others(&t.file_path)
            })
            .map(|e| e.id)
            .collect()
    };
    assert_eq!(unchanged(&before), unchanged(&after));
}

#[test]
fn parse_failures_are_recorded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ok.py"), "X = 1\n").unwrap();
    std::fs::write(dir.path().join("bad.py"), "def broken(:\n").unwrap();
    std::fs::write(dir.path().join("latin.py"), b"S = '\xe9'\n").unwrap();
    let (graph, report) = index_repository(dir.path(), &IndexConfig::default()).unwrap();
    assert_eq!(report.files_failed, 2);
    assert!(report.diagnostics.iter().any(|d| matches!(d, Diagnostic::ParseFailed(e) if e.file_path == "bad.py")));
    assert!(report.diagnostics.iter().any(|d| matches!(d, Diagnostic::NotUtf8 { .. })));
    // bad.py survives as a MODULE node; latin.py is skipped.
    assert_eq!(graph.node_counts()[&NodeLabel::Module], 2);
    assert!(validate(&graph).is_empty());
}

#[test]
fn config_filters_and_caps() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("tests")).unwrap();
    std::fs::write(dir.path().join("a.py"), "A = 1\n").unwrap();
    std::fs::write(dir.path().join("test_a.py"), "T = 1\n").unwrap();
    std::fs::write(dir.path().join("tests/helpers.py"), "H = 1\n").unwrap();
    std::fs::write(dir.path().join("gen.py"), "G = 1\n").unwrap();

    let (g, _) = index_repository(dir.path(), &IndexConfig::default()).unwrap();
    assert_eq!(g.node_counts()[&NodeLabel::Module], 4);

    let config = IndexConfig {
        exclude_tests: true,
        exclude_globs: vec!["gen.py".into()],
        ..IndexConfig::default()
    };
    let (g, _) = index_repository(dir.path(), &config).unwrap();
    assert_eq!(g.node_counts()[&NodeLabel::Module], 1);

    let capped = IndexConfig { max_files: 2, ..IndexConfig::default() };
    assert!(matches!(
        index_repository(dir.path(), &capped),
        Err(IndexError::TooManyFiles { limit: 2, .. })
    ));
    let tiny = IndexConfig { max_source_bytes: 4, ..IndexConfig::default() };
    assert!(matches!(
        index_repository(dir.path(), &tiny),
        Err(IndexError::MemoryCapExceeded { .. })
    ));
    assert!(matches!(
        index_repository(&dir.path().join("missing"), &IndexConfig::default()),
        Err(IndexError::Io { .. })
    ));
}
