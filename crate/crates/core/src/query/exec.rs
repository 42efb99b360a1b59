use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::rc::Rc;

use super::parser::{Expr, Query, RelDirection, ReturnItem};
use super::{Caps, Cell, NodeSummary, ResultTable};
use crate::parser::content_hash;
use crate::schema::{EdgeType, NodeId, NodeLabel, NodeRecord};
use crate::store::GraphHandle;

/// Reads `code` properties from the repository checkout, withholding
/// text from files whose hash no longer matches the snapshot.
struct Sources<'a> {
    root: Option<&'a Path>,
    handle: &'a GraphHandle,
    files: RefCell<HashMap<String, Option<Rc<Vec<u8>>>>>,
}

impl Sources<'_> {
    fn code(&self, node: &NodeRecord) -> Option<String> {
        let root = self.root?;
        let span = node.span?;
        let bytes = self
            .files
            .borrow_mut()
            .entry(node.file_path.clone())
            .or_insert_with(|| {
                let bytes = std::fs::read(root.join(&node.file_path)).ok()?;
                let fresh = self.handle.graph().file_hash(&node.file_path) == Some(content_hash(&bytes).as_str());
                fresh.then(|| Rc::new(bytes))
            })
            .clone()?;
        let slice = bytes.get(span.start_byte..span.end_byte)?;
        std::str::from_utf8(slice).ok().map(str::to_string)
    }

    fn property(&self, node: &NodeRecord, key: &str) -> Option<String> {
        if key == "code" {
            self.code(node)
        } else {
            node.property(key).map(str::to_string)
        }
    }
}

#[derive(Debug, Default)]
struct Slot {
    var: Option<String>,
    labels: Vec<NodeLabel>,
    props: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy)]
struct Constraint {
    source: usize,
    target: usize,
    edge_type: Option<EdgeType>,
}

struct Matcher<'a> {
    handle: &'a GraphHandle,
    sources: &'a Sources<'a>,
    slots: Vec<Slot>,
    constraints: Vec<Constraint>,
    /// Slot visited at each search depth.
    order: Vec<usize>,
    /// Constraints checked once the slot at each depth is assigned.
    checks: Vec<Vec<Constraint>>,
    /// Depth from which every remaining slot is anonymous.
    tail: usize,
    named: Vec<usize>,
}

impl<'a> Matcher<'a> {
    fn new(query: &Query, handle: &'a GraphHandle, sources: &'a Sources<'a>) -> Self {
        let mut slots: Vec<Slot> = Vec::new();
        let mut by_var: BTreeMap<String, usize> = BTreeMap::new();
        let mut constraints = Vec::new();
        for pattern in &query.patterns {
            let mut ids = Vec::new();
            for node in &pattern.nodes {
                let idx = match &node.var {
                    Some(v) => *by_var.entry(v.clone()).or_insert_with(|| {
                        slots.push(Slot {
                            var: Some(v.clone()),
                            ..Slot::default()
                        });
                        slots.len() - 1
                    }),
                    None => {
                        slots.push(Slot::default());
                        slots.len() - 1
                    }
                };
                slots[idx].labels.extend(node.label);
                slots[idx].props.extend(node.props.iter().cloned());
                ids.push(idx);
            }
            for (i, rel) in pattern.rels.iter().enumerate() {
                let (source, target) = match rel.direction {
                    RelDirection::Right => (ids[i], ids[i + 1]),
                    RelDirection::Left => (ids[i + 1], ids[i]),
                };
                constraints.push(Constraint {
                    source,
                    target,
                    edge_type: rel.edge_type,
                });
            }
        }

        // Visit slots connected to already placed ones first, named
        // before anonymous, so anonymous tails can stop at the first match.
        let mut order: Vec<usize> = Vec::new();
        let mut placed = vec![false; slots.len()];
        while order.len() < slots.len() {
            let connected = |s: usize| {
                constraints
                    .iter()
                    .any(|c| (c.source == s && placed[c.target]) || (c.target == s && placed[c.source]))
            };
            let next = (0..slots.len())
                .filter(|&s| !placed[s])
                .min_by_key(|&s| {
                    (
                        !connected(s),
                        slots[s].var.is_none(),
                        std::cmp::Reverse(slots[s].props.len()),
                        slots[s].labels.is_empty(),
                        s,
                    )
                })
                .expect("an unplaced slot remains");
            placed[next] = true;
            order.push(next);
        }
        let depth_of: Vec<usize> = {
            let mut d = vec![0; slots.len()];
            for (i, &s) in order.iter().enumerate() {
                d[s] = i;
            }
            d
        };
        let mut checks = vec![Vec::new(); slots.len()];
        for c in &constraints {
            checks[depth_of[c.source].max(depth_of[c.target])].push(*c);
        }
        let tail = order
            .iter()
            .rposition(|&s| slots[s].var.is_some())
            .map_or(0, |p| p + 1);
        let named = order.iter().copied().filter(|&s| slots[s].var.is_some()).collect();
        Self {
            handle,
            sources,
            slots,
            constraints,
            order,
            checks,
            tail,
            named,
        }
    }

    fn fits(&self, slot: &Slot, id: NodeId) -> bool {
        let Some(node) = self.handle.node(id) else {
            return false;
        };
        slot.labels.iter().all(|l| *l == node.label)
            && slot
                .props
                .iter()
                .all(|(k, v)| self.sources.property(node, k).as_deref() == Some(v.as_str()))
    }

    fn linked(&self, c: &Constraint, assignment: &[Option<NodeId>]) -> bool {
        let (Some(s), Some(t)) = (assignment[c.source], assignment[c.target]) else {
            return false;
        };
        match c.edge_type {
            Some(ty) => self.handle.has_edge(ty, s, t),
            None => EdgeType::ALL.iter().any(|ty| self.handle.has_edge(*ty, s, t)),
        }
    }

    fn candidates(&self, slot: usize, assignment: &[Option<NodeId>]) -> Vec<NodeId> {
        for c in &self.constraints {
            if c.target == slot {
                if let Some(src) = assignment[c.source] {
                    return dedup(self.handle.successors(src, c.edge_type).collect());
                }
            }
            if c.source == slot {
                if let Some(dst) = assignment[c.target] {
                    return dedup(self.handle.predecessors(dst, c.edge_type).collect());
                }
            }
        }
        match self.slots[slot].labels.first() {
            Some(label) => self.handle.nodes_with_label(*label).to_vec(),
            None => self.handle.graph().nodes().map(|n| n.id).collect(),
        }
    }

    /// Tries every node for the slot at `depth`, calling `done` on each
    /// complete assignment until it returns true.
    fn search(&self, depth: usize, assignment: &mut Vec<Option<NodeId>>, done: &mut dyn FnMut(&[Option<NodeId>]) -> bool) -> bool {
        if depth == self.order.len() {
            return done(assignment);
        }
        let slot = self.order[depth];
        for id in self.candidates(slot, assignment) {
            if !self.fits(&self.slots[slot], id) {
                continue;
            }
            assignment[slot] = Some(id);
            if self.checks[depth].iter().all(|c| self.linked(c, assignment)) && self.search(depth + 1, assignment, done) {
                assignment[slot] = None;
                return true;
            }
            assignment[slot] = None;
        }
        false
    }

    /// Distinct assignments of the named variables, keyed by variable name.
    fn bindings(&self) -> BTreeSet<Vec<(String, NodeId)>> {
        let mut out = BTreeSet::new();
        let mut assignment = vec![None; self.slots.len()];
        let tail = self.tail;
        let mut record = |a: &[Option<NodeId>]| -> bool {
            let row: Vec<(String, NodeId)> = self
                .named
                .iter()
                .map(|&s| (self.slots[s].var.clone().expect("named slot"), a[s].expect("assigned")))
                .collect();
            out.insert(row);
            false
        };
        self.search_split(0, tail, &mut assignment, &mut record);
        out
    }

    /// Like `search`, but once `depth` reaches `tail` only one completion
    /// is needed per prefix.
    fn search_split(
        &self,
        depth: usize,
        tail: usize,
        assignment: &mut Vec<Option<NodeId>>,
        record: &mut dyn FnMut(&[Option<NodeId>]) -> bool,
    ) {
        if depth == tail {
            let mut found = false;
            self.search(depth, assignment, &mut |_| {
                found = true;
                true
            });
            if found {
                record(assignment);
            }
            return;
        }
        let slot = self.order[depth];
        for id in self.candidates(slot, assignment) {
            if !self.fits(&self.slots[slot], id) {
                continue;
            }
            assignment[slot] = Some(id);
            if self.checks[depth].iter().all(|c| self.linked(c, assignment)) {
                self.search_split(depth + 1, tail, assignment, record);
            }
            assignment[slot] = None;
        }
    }
}

fn dedup(mut ids: Vec<NodeId>) -> Vec<NodeId> {
    ids.sort();
    ids.dedup();
    ids
}

fn eval(expr: &Expr, binding: &HashMap<&str, &NodeRecord>, sources: &Sources<'_>) -> bool {
    match expr {
        Expr::Cmp { var, key, op, value } => binding
            .get(var.as_str())
            .and_then(|n| sources.property(n, key))
            .is_some_and(|actual| op.eval(&actual, value)),
        Expr::And(a, b) => eval(a, binding, sources) && eval(b, binding, sources),
        Expr::Or(a, b) => eval(a, binding, sources) || eval(b, binding, sources),
        Expr::Not(e) => !eval(e, binding, sources),
    }
}

/// Runs `query` without access to source text; `code` reads as null.
pub fn execute(query: &Query, handle: &GraphHandle, caps: Caps) -> ResultTable {
    execute_with_source(query, handle, caps, None)
}

/// Runs `query`, resolving `code` properties against `source_root`.
pub fn execute_with_source(query: &Query, handle: &GraphHandle, caps: Caps, source_root: Option<&Path>) -> ResultTable {
    let sources = Sources {
        root: source_root,
        handle,
        files: RefCell::new(HashMap::new()),
    };
    let matcher = Matcher::new(query, handle, &sources);
    let mut matched = Vec::new();
    for row in matcher.bindings() {
        let binding: HashMap<&str, &NodeRecord> = row
            .iter()
            .map(|(v, id)| (v.as_str(), handle.node(*id).expect("bound node exists")))
            .collect();
        if query.filter.as_ref().is_none_or(|f| eval(f, &binding, &sources)) {
            matched.push(row);
        }
    }

    let columns: Vec<String> = query.items.iter().map(ReturnItem::column_name).collect();
    let mut rows: Vec<Vec<Cell>> = if query.is_aggregate() {
        vec![vec![Cell::Int(matched.len() as i64)]]
    } else {
        matched
            .iter()
            .map(|row| {
                let lookup = |var: &str| {
                    let id = row.iter().find(|(v, _)| v == var).expect("variables are checked at parse time").1;
                    handle.node(id).expect("bound node exists")
                };
                query
                    .items
                    .iter()
                    .map(|item| match item {
                        ReturnItem::Var(v) => Cell::Node(NodeSummary::from(lookup(v))),
                        ReturnItem::Prop { var, key, .. } => {
                            sources.property(lookup(var), key).map_or(Cell::Null, Cell::Text)
                        }
                        ReturnItem::CountStar => unreachable!("aggregates are handled above"),
                    })
                    .collect()
            })
            .collect()
    };
    rows.sort();

    let total_before_limit = rows.len();
    if let Some(limit) = query.limit {
        rows.truncate(limit);
    }
    let mut truncated = false;
    if rows.len() > caps.max_rows {
        rows.truncate(caps.max_rows);
        truncated = true;
    }
    let mut used = 0usize;
    for (i, row) in rows.iter().enumerate() {
        used = used.saturating_add(row.iter().map(|c| c.display_text().len() + 3).sum::<usize>());
        if used > caps.max_chars {
            rows.truncate(i);
            truncated = true;
            break;
        }
    }
    ResultTable {
        columns,
        rows,
        truncated,
        total_before_limit,
    }
}
