use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn codegraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_codegraph")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn indexed_alpha(dir: &Path) -> String {
    let out = dir.join("snap");
    let o = codegraph(&["index", fixture("alpha").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("15 nodes"), "{}", stdout(&o));
    out.to_str().unwrap().to_string()
}

#[test]
fn index_then_query() {
    let dir = tempfile::tempdir().unwrap();
    let snap = indexed_alpha(dir.path());
    let o = codegraph(&["query", &snap, r#"MATCH (m:MODULE {name: "pkg.core"})-[:CONTAINS]->(c:CLASS) RETURN c.name"#]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("Base") && text.contains("Engine"), "{text}");

    let o = codegraph(&["query", &snap, "MATCH (m:MODULE) RETURN m.name", "--limit", "2", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    assert_eq!(v["total_before_limit"], 4);

    let o = codegraph(&["stats", &snap, "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["total_nodes"], 15);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let snap = indexed_alpha(dir.path());
    let o = codegraph(&["query", &snap, "MATCH ("]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    assert_eq!(codegraph(&["query", &snap, "MATCH (n) RETURN n", "--bogus"]).status.code(), Some(1));
    assert_eq!(codegraph(&["stats", dir.path().join("missing").to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(codegraph(&["--help"]).status.code(), Some(0));
}

#[test]
fn chat_with_scripted_backend() {
    let dir = tempfile::tempdir().unwrap();
    let snap = indexed_alpha(dir.path());
    let script = dir.path().join("script.json");
    let query = r#"MATCH (m:MODULE {name: "pkg.core"})-[:CONTAINS]->(c:CLASS) RETURN c.name"#;
    let turns = serde_json::json!([
        {"content": "QUERIES:\nclasses in pkg.core", "prompt_tokens": 10, "completion_tokens": 2},
        {"content": query},
        {"content": "FINISH:\nBase and Engine."},
    ]);
    std::fs::write(&script, turns.to_string()).unwrap();
    let transcript = dir.path().join("t.jsonl");
    let mut child = Command::new(env!("CARGO_BIN_EXE_codegraph"))
        .args(["chat", &snap, "--script", script.to_str().unwrap(), "--transcript", transcript.to_str().unwrap()])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"Which classes does pkg.core define?\n").unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).trim(), "Base and Engine.");
    let lines = std::fs::read_to_string(&transcript).unwrap();
    assert!(lines.lines().count() >= 5);
    assert!(lines.contains("Engine"));
}
