//! Cypher-subset query language over a [`GraphHandle`](crate::store::GraphHandle).

mod exec;
mod lexer;
mod parser;
mod render;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::schema::{NodeId, NodeLabel, NodeRecord};

pub use exec::{execute, execute_with_source};
pub use parser::{parse_query, CmpOp, Expr, NodePattern, Pattern, Query, RelDirection, RelPattern, ReturnItem, MAX_HOPS, QUERY_PROPERTIES};
pub use render::render_result;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("syntax error at line {line}, column {column} near {token:?}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        token: String,
        message: String,
    },
    #[error("unknown node label {name:?} at line {line}, column {column}; labels are MODULE, CLASS, FUNCTION, METHOD, FIELD, GLOBAL_VARIABLE")]
    UnknownLabel { name: String, line: usize, column: usize },
    #[error("unknown relationship type {name:?} at line {line}, column {column}; types are CONTAINS, HAS_METHOD, HAS_FIELD, INHERITS, USES")]
    UnknownEdgeType { name: String, line: usize, column: usize },
    #[error("unknown property {name:?} at line {line}, column {column}; properties are name, file_path, class_name (or class), signature, label, code")]
    UnknownProperty { name: String, line: usize, column: usize },
    #[error("variable {name:?} is not bound in MATCH")]
    UnboundVariable { name: String },
    #[error("query has {hops} relationship hops, the limit is {max}")]
    TooManyHops { hops: usize, max: usize },
    #[error("count(*) cannot be combined with other return items")]
    MixedAggregation,
}

impl QueryError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            QueryError::Syntax { .. } => "syntax_error",
            QueryError::UnknownLabel { .. } => "unknown_label",
            QueryError::UnknownEdgeType { .. } => "unknown_edge_type",
            QueryError::UnknownProperty { .. } => "unknown_property",
            QueryError::UnboundVariable { .. } => "unbound_variable",
            QueryError::TooManyHops { .. } => "too_many_hops",
            QueryError::MixedAggregation => "mixed_aggregation",
        }
    }

    /// True for names outside the schema, as opposed to malformed text.
    pub fn is_schema_error(&self) -> bool {
        matches!(
            self,
            QueryError::UnknownLabel { .. } | QueryError::UnknownEdgeType { .. } | QueryError::UnknownProperty { .. }
        )
    }

    /// 1-based (line, column) when the error has one.
    pub fn position(&self) -> Option<(usize, usize)> {
        match self {
            QueryError::Syntax { line, column, .. }
            | QueryError::UnknownLabel { line, column, .. }
            | QueryError::UnknownEdgeType { line, column, .. }
            | QueryError::UnknownProperty { line, column, .. } => Some((*line, *column)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    pub max_rows: usize,
    pub max_chars: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            max_rows: 100,
            max_chars: 4000,
        }
    }
}

impl Caps {
    pub fn unlimited() -> Self {
        Self {
            max_rows: usize::MAX,
            max_chars: usize::MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct NodeSummary {
    pub id: NodeId,
    pub label: NodeLabel,
    pub name: String,
    pub file_path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_name: Option<String>,
}

impl From<&NodeRecord> for NodeSummary {
    fn from(n: &NodeRecord) -> Self {
        Self {
            id: n.id,
            label: n.label,
            name: n.name.clone(),
            file_path: n.file_path.clone(),
            class_name: n.class_name.clone(),
        }
    }
}

/// One result cell. Rows sort by their cells, with
/// `Null < Int < Text < Node` and nodes ordered by id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Cell {
    Null,
    Int(i64),
    Text(String),
    Node(NodeSummary),
}

impl Cell {
    pub fn display_text(&self) -> String {
        match self {
            Cell::Null => "null".to_string(),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Node(n) => match &n.class_name {
                Some(c) => format!("{} {c}.{} ({})", n.label, n.name, n.file_path),
                None => format!("{} {} ({})", n.label, n.name, n.file_path),
            },
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Null => s.serialize_none(),
            Cell::Int(n) => s.serialize_i64(*n),
            Cell::Text(t) => s.serialize_str(t),
            Cell::Node(n) => n.serialize(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Set when the row or character cap dropped rows.
    pub truncated: bool,
    /// Row count after WHERE and before LIMIT and caps.
    pub total_before_limit: usize,
}
