//! Reference evaluator for the query language and a random query
//! generator. The evaluator assigns every pattern position in turn, only
//! checking a relationship once both of its ends are assigned, and shares
//! nothing with the engine beyond the AST.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet};

use codegraph_core::graph::CodeGraph;
use codegraph_core::query::{Cell, Expr, NodeSummary, Query, RelDirection, ReturnItem};
use codegraph_core::schema::{EdgeType, NodeId, NodeLabel, NodeRecord};
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::Rng;

fn prop(node: &NodeRecord, key: &str) -> Option<String> {
    match key {
        "name" => Some(node.name.clone()),
        "file_path" => Some(node.file_path.clone()),
        "class_name" => node.class_name.clone(),
        "signature" => node.signature.clone(),
        "label" => Some(node.label.to_string()),
        _ => None,
    }
}

fn holds(expr: &Expr, env: &HashMap<String, &NodeRecord>) -> bool {
    match expr {
        Expr::Cmp { var, key, op, value } => match prop(env[var], key) {
            None => false,
            Some(v) => match op {
                codegraph_core::query::CmpOp::Eq => v == *value,
                codegraph_core::query::CmpOp::Neq => v != *value,
                codegraph_core::query::CmpOp::Contains => v.contains(value.as_str()),
                codegraph_core::query::CmpOp::StartsWith => v.starts_with(value.as_str()),
                codegraph_core::query::CmpOp::EndsWith => v.ends_with(value.as_str()),
            },
        },
        Expr::And(a, b) => holds(a, env) && holds(b, env),
        Expr::Or(a, b) => holds(a, env) || holds(b, env),
        Expr::Not(e) => !holds(e, env),
    }
}

/// All result rows of `query` over `graph`, sorted, before LIMIT.
pub fn brute_force(query: &Query, graph: &CodeGraph) -> Vec<Vec<Cell>> {
    // One variable per named node plus one per anonymous position.
    let mut names: Vec<Option<String>> = Vec::new();
    let mut labels: Vec<Vec<NodeLabel>> = Vec::new();
    let mut props: Vec<Vec<(String, String)>> = Vec::new();
    let mut rels: Vec<(usize, usize, Option<EdgeType>)> = Vec::new();
    for pattern in &query.patterns {
        let mut vars = Vec::new();
        for node in &pattern.nodes {
            let existing = node.var.as_ref().and_then(|v| names.iter().position(|n| n.as_ref() == Some(v)));
            let idx = existing.unwrap_or_else(|| {
                names.push(node.var.clone());
                labels.push(Vec::new());
                props.push(Vec::new());
                names.len() - 1
            });
            labels[idx].extend(node.label);
            props[idx].extend(node.props.iter().cloned());
            vars.push(idx);
        }
        for (i, rel) in pattern.rels.iter().enumerate() {
            let (s, t) = match rel.direction {
                RelDirection::Right => (vars[i], vars[i + 1]),
                RelDirection::Left => (vars[i + 1], vars[i]),
            };
            rels.push((s, t, rel.edge_type));
        }
    }
    let nodes: Vec<&NodeRecord> = graph.nodes().collect();
    let edges: HashSet<(EdgeType, NodeId, NodeId)> =
        graph.edges().map(|e| (e.edge_type, e.source, e.target)).collect();
    let linked = |ty: Option<EdgeType>, s: NodeId, t: NodeId| match ty {
        Some(ty) => edges.contains(&(ty, s, t)),
        None => EdgeType::ALL.iter().any(|ty| edges.contains(&(*ty, s, t))),
    };
    let fits = |v: usize, n: &NodeRecord| {
        labels[v].iter().all(|l| *l == n.label)
            && props[v].iter().all(|(k, val)| prop(n, k).as_deref() == Some(val.as_str()))
    };

    let named: Vec<usize> = (0..names.len()).filter(|&i| names[i].is_some()).collect();
    let mut bindings: BTreeSet<Vec<NodeId>> = BTreeSet::new();
    let mut assignment: Vec<Option<&NodeRecord>> = vec![None; names.len()];
    fn assign<'g>(
        depth: usize,
        assignment: &mut Vec<Option<&'g NodeRecord>>,
        nodes: &[&'g NodeRecord],
        ok: &dyn Fn(usize, &[Option<&'g NodeRecord>]) -> bool,
        out: &mut dyn FnMut(&[Option<&'g NodeRecord>]),
    ) {
        if depth == assignment.len() {
            out(assignment);
            return;
        }
        for n in nodes {
            assignment[depth] = Some(n);
            if ok(depth, assignment) {
                assign(depth + 1, assignment, nodes, ok, out);
            }
        }
        assignment[depth] = None;
    }
    let ok = |depth: usize, a: &[Option<&NodeRecord>]| {
        fits(depth, a[depth].expect("just assigned"))
            && rels
                .iter()
                .filter(|(s, t, _)| (*s).max(*t) == depth)
                .all(|(s, t, ty)| linked(*ty, a[*s].unwrap().id, a[*t].unwrap().id))
    };
    assign(0, &mut assignment, &nodes, &ok, &mut |a| {
        bindings.insert(named.iter().map(|&i| a[i].unwrap().id).collect());
    });

    let mut rows = Vec::new();
    let mut count = 0i64;
    for binding in bindings {
        let env: HashMap<String, &NodeRecord> = named
            .iter()
            .zip(&binding)
            .map(|(&i, id)| (names[i].clone().unwrap(), graph.node(*id).unwrap()))
            .collect();
        if let Some(filter) = &query.filter {
            if !holds(filter, &env) {
                continue;
            }
        }
        count += 1;
        rows.push(
            query
                .items
                .iter()
                .map(|item| match item {
                    ReturnItem::Var(v) => Cell::Node(NodeSummary::from(env[v])),
                    ReturnItem::Prop { var, key, .. } => prop(env[var], key).map_or(Cell::Null, Cell::Text),
                    ReturnItem::CountStar => Cell::Int(0),
                })
                .collect::<Vec<_>>(),
        );
    }
    if query.items.contains(&ReturnItem::CountStar) {
        return vec![vec![Cell::Int(count)]];
    }
    rows.sort();
    rows
}

const VARS: [&str; 4] = ["a", "b", "c", "d"];
const KEYS: [&str; 6] = ["name", "file_path", "class_name", "class", "signature", "label"];
const OPS: [&str; 5] = ["=", "<>", "CONTAINS", "STARTS WITH", "ENDS WITH"];

fn keyword(rng: &mut StdRng, kw: &str) -> String {
    if rng.random_bool(0.2) {
        kw.to_lowercase()
    } else {
        kw.to_string()
    }
}

fn quoted(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Literal values drawn from the graph plus a few that match nothing.
pub fn literal_pool(graph: &CodeGraph) -> Vec<String> {
    let mut pool: BTreeSet<String> = ["zzz", "_", ".py", "pkg", "self", "CLASS", "METHOD", "(", ""]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for n in graph.nodes() {
        pool.insert(n.name.clone());
        pool.insert(n.file_path.clone());
        pool.insert(n.name.chars().take(2).collect());
        if let Some(c) = &n.class_name {
            pool.insert(c.clone());
        }
    }
    pool.into_iter().collect()
}

fn gen_expr(rng: &mut StdRng, vars: &[String], pool: &[String], depth: u32) -> String {
    let choice = if depth == 0 { 0 } else { rng.random_range(0..5) };
    match choice {
        0 | 1 => format!(
            "{}.{} {} {}",
            vars.choose(rng).unwrap(),
            KEYS.choose(rng).unwrap(),
            OPS.choose(rng).unwrap(),
            quoted(pool.choose(rng).unwrap())
        ),
        2 => format!("{} {}", keyword(rng, "NOT"), gen_expr(rng, vars, pool, depth - 1)),
        3 => format!(
            "({} {} {})",
            gen_expr(rng, vars, pool, depth - 1),
            keyword(rng, "AND"),
            gen_expr(rng, vars, pool, depth - 1)
        ),
        _ => format!(
            "{} {} {}",
            gen_expr(rng, vars, pool, depth - 1),
            keyword(rng, "OR"),
            gen_expr(rng, vars, pool, depth - 1)
        ),
    }
}

/// A random query with 0 to 3 relationship hops.
pub fn gen_query(rng: &mut StdRng, pool: &[String]) -> String {
    let hops = rng.random_range(0..=3usize);
    let split = if hops > 0 && rng.random_bool(0.3) { rng.random_range(0..=hops) } else { hops };
    let lengths: Vec<usize> = if split == hops { vec![hops] } else { vec![split, hops - split] };
    let mut bound: Vec<String> = Vec::new();
    let mut patterns = Vec::new();
    for len in lengths {
        let mut text = String::new();
        for i in 0..=len {
            if i > 0 {
                let ty = if rng.random_bool(0.65) {
                    format!(":{}", EdgeType::ALL.choose(rng).unwrap())
                } else {
                    String::new()
                };
                if rng.random_bool(0.5) {
                    text.push_str(&format!("-[{ty}]->"));
                } else {
                    text.push_str(&format!("<-[{ty}]-"));
                }
            }
            let mut node = String::from("(");
            if rng.random_bool(0.7) || (bound.is_empty() && i == len) {
                let v = VARS.choose(rng).unwrap().to_string();
                node.push_str(&v);
                if !bound.contains(&v) {
                    bound.push(v);
                }
            }
            if rng.random_bool(0.6) {
                node.push_str(&format!(":{}", NodeLabel::ALL.choose(rng).unwrap()));
            }
            if rng.random_bool(0.2) {
                let key = ["name", "class", "file_path"].choose(rng).unwrap();
                node.push_str(&format!(" {{{key}: {}}}", quoted(pool.choose(rng).unwrap())));
            }
            node.push(')');
            text.push_str(&node);
        }
        patterns.push(text);
    }
    let mut q = format!("{} {}", keyword(rng, "MATCH"), patterns.join(", "));
    if rng.random_bool(0.5) {
        let depth = rng.random_range(0..=2);
        q.push_str(&format!(" {} {}", keyword(rng, "WHERE"), gen_expr(rng, &bound, pool, depth)));
    }
    let items: Vec<String> = if rng.random_bool(0.15) {
        vec!["count(*)".to_string()]
    } else {
        (0..rng.random_range(1..=3))
            .map(|_| {
                let v = bound.choose(rng).unwrap();
                if rng.random_bool(0.4) {
                    v.clone()
                } else {
                    format!("{v}.{}", KEYS.choose(rng).unwrap())
                }
            })
            .collect()
    };
    q.push_str(&format!(" {} {}", keyword(rng, "RETURN"), items.join(", ")));
    if rng.random_bool(0.3) {
        q.push_str(&format!(" {} {}", keyword(rng, "LIMIT"), rng.random_range(1..=5)));
    }
    q
}

/// One single-hop query per (source label, edge type, target label).
pub fn label_edge_combinations() -> Vec<String> {
    let mut out = Vec::new();
    for s in NodeLabel::ALL {
        for t in EdgeType::ALL {
            for d in NodeLabel::ALL {
                out.push(format!("MATCH (a:{s})-[:{t}]->(b:{d}) RETURN a, b"));
            }
        }
    }
    out
}
