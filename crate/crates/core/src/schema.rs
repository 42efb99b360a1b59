//! Node and edge type system, node identity, and schema validation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::graph::CodeGraph;

/// Schema listing injected into agent prompts and served by the HTTP API.
pub const SCHEMA_TEXT: &str = include_str!("../resources/schema_v1.txt");
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeLabel {
    Module,
    Class,
    Function,
    Method,
    Field,
    GlobalVariable,
}

impl NodeLabel {
    pub const ALL: [NodeLabel; 6] = [
        NodeLabel::Module,
        NodeLabel::Class,
        NodeLabel::Function,
        NodeLabel::Method,
        NodeLabel::Field,
        NodeLabel::GlobalVariable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeLabel::Module => "MODULE",
            NodeLabel::Class => "CLASS",
            NodeLabel::Function => "FUNCTION",
            NodeLabel::Method => "METHOD",
            NodeLabel::Field => "FIELD",
            NodeLabel::GlobalVariable => "GLOBAL_VARIABLE",
        }
    }

    pub fn has_class_name(self) -> bool {
        matches!(self, NodeLabel::Method | NodeLabel::Field)
    }

    pub fn has_signature(self) -> bool {
        matches!(self, NodeLabel::Class | NodeLabel::Function | NodeLabel::Method)
    }

    pub fn has_code_span(self) -> bool {
        matches!(
            self,
            NodeLabel::Class | NodeLabel::Function | NodeLabel::Method | NodeLabel::GlobalVariable
        )
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EdgeType {
    Contains,
    HasMethod,
    HasField,
    Inherits,
    Uses,
}

impl EdgeType {
    pub const ALL: [EdgeType; 5] = [
        EdgeType::Contains,
        EdgeType::HasMethod,
        EdgeType::HasField,
        EdgeType::Inherits,
        EdgeType::Uses,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeType::Contains => "CONTAINS",
            EdgeType::HasMethod => "HAS_METHOD",
            EdgeType::HasField => "HAS_FIELD",
            EdgeType::Inherits => "INHERITS",
            EdgeType::Uses => "USES",
        }
    }

    pub fn allowed_sources(self) -> &'static [NodeLabel] {
        match self {
            EdgeType::Contains => &[NodeLabel::Module],
            EdgeType::HasMethod | EdgeType::HasField | EdgeType::Inherits => &[NodeLabel::Class],
            EdgeType::Uses => &[NodeLabel::Function, NodeLabel::Method],
        }
    }

    pub fn allowed_targets(self) -> &'static [NodeLabel] {
        match self {
            EdgeType::Contains => &[NodeLabel::Class, NodeLabel::Function, NodeLabel::GlobalVariable],
            EdgeType::HasMethod => &[NodeLabel::Method],
            EdgeType::HasField => &[NodeLabel::Field],
            EdgeType::Inherits => &[NodeLabel::Class],
            EdgeType::Uses => &[NodeLabel::GlobalVariable, NodeLabel::Field],
        }
    }

    pub fn permits(self, source: NodeLabel, target: NodeLabel) -> bool {
        self.allowed_sources().contains(&source) && self.allowed_targets().contains(&target)
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EdgeType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EdgeType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

macro_rules! digest_id {
    ($name:ident) => {
        /// 128-bit digest rendered as 32 lowercase hex characters.
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name([u8; 16]);

        impl $name {
            pub const MIN: Self = Self([0; 16]);
            pub const MAX: Self = Self([0xff; 16]);

            fn digest(parts: &[&str]) -> Self {
                let mut hasher = Sha256::new();
                for (i, part) in parts.iter().enumerate() {
                    if i > 0 {
                        hasher.update([0x1f]);
                    }
                    hasher.update(part.as_bytes());
                }
                let full = hasher.finalize();
                let mut out = [0u8; 16];
                out.copy_from_slice(&full[..16]);
                Self(out)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&hex::encode(self.0))
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self)
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let mut out = [0u8; 16];
                if s.len() != 32 || s.bytes().any(|b| b.is_ascii_uppercase()) {
                    return Err(format!("expected 32 lowercase hex characters, got {s:?}"));
                }
                hex::decode_to_slice(s, &mut out).map_err(|e| format!("{s:?}: {e}"))?;
                Ok(Self(out))
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

digest_id!(NodeId);
digest_id!(EdgeId);

/// Digest of `label 0x1f file_path 0x1f qualified_name`, truncated to 128 bits.
pub fn node_identity(label: NodeLabel, file_path: &str, qualified_name: &str) -> NodeId {
    NodeId::digest(&[label.as_str(), file_path, qualified_name])
}

/// Digest of `type 0x1f source 0x1f target`, truncated to 128 bits.
pub fn edge_identity(edge_type: EdgeType, source: NodeId, target: NodeId) -> EdgeId {
    EdgeId::digest(&[edge_type.as_str(), &source.to_string(), &target.to_string()])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start_byte: usize,
    pub end_byte: usize,
    pub start_line: usize,
    pub end_line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: NodeId,
    pub label: NodeLabel,
    pub name: String,
    pub file_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
}

impl NodeRecord {
    /// Property lookup used by the query engine. `class` is an alias of
    /// `class_name`.
    pub fn property(&self, key: &str) -> Option<&str> {
        match key {
            "label" => Some(self.label.as_str()),
            "name" => Some(&self.name),
            "file_path" => Some(&self.file_path),
            "class_name" | "class" => self.class_name.as_deref(),
            "signature" => self.signature.as_deref(),
            _ => None,
        }
    }
}

/// Property keys the query language accepts on nodes.
pub const NODE_PROPERTIES: [&str; 6] = ["name", "file_path", "class_name", "class", "signature", "label"];

pub fn canonical_property(key: &str) -> Option<&'static str> {
    match key {
        "name" => Some("name"),
        "file_path" => Some("file_path"),
        "class_name" | "class" => Some("class_name"),
        "signature" => Some("signature"),
        "label" => Some("label"),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub id: EdgeId,
    #[serde(rename = "type")]
    pub edge_type: EdgeType,
    pub source: NodeId,
    pub target: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_association_type: Option<NodeLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_association_type: Option<NodeLabel>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Endpoint {
        edge: EdgeId,
        edge_type: EdgeType,
        source: Option<NodeLabel>,
        target: Option<NodeLabel>,
    },
    DanglingEdge {
        edge: EdgeId,
        missing: NodeId,
    },
    NodeAttribute {
        node: NodeId,
        label: NodeLabel,
        detail: String,
    },
    EdgeAttribute {
        edge: EdgeId,
        detail: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Endpoint { edge, edge_type, source, target } => write!(
                f,
                "edge {edge}: {edge_type} not permitted from {} to {}",
                source.map_or("?", |l| l.as_str()),
                target.map_or("?", |l| l.as_str())
            ),
            Violation::DanglingEdge { edge, missing } => {
                write!(f, "edge {edge}: endpoint {missing} does not exist")
            }
            Violation::NodeAttribute { node, label, detail } => {
                write!(f, "node {node} ({label}): {detail}")
            }
            Violation::EdgeAttribute { edge, detail } => write!(f, "edge {edge}: {detail}"),
        }
    }
}

fn check_node(node: &NodeRecord, out: &mut Vec<Violation>) {
    let mut problems = Vec::new();
    let label = node.label;
    if node.name.is_empty() {
        problems.push("empty name".to_string());
    }
    if node.file_path.is_empty() {
        problems.push("empty file_path".to_string());
    }
    let presence = [
        ("class_name", label.has_class_name(), node.class_name.is_some()),
        ("signature", label.has_signature(), node.signature.is_some()),
        ("span", label.has_code_span(), node.span.is_some()),
    ];
    for (attr, required, present) in presence {
        if required && !present {
            problems.push(format!("missing {attr}"));
        } else if !required && present {
            problems.push(format!("unexpected {attr}"));
        }
    }
    if let Some(span) = node.span {
        if span.start_byte >= span.end_byte {
            problems.push("empty span".to_string());
        }
    }
    out.extend(problems.into_iter().map(|detail| Violation::NodeAttribute {
        node: node.id,
        label,
        detail,
    }));
}

/// Every schema violation in `graph`; empty when the graph is well formed.
pub fn validate(graph: &CodeGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    for node in graph.nodes() {
        check_node(node, &mut out);
    }
    for edge in graph.edges() {
        let source = graph.node(edge.source).map(|n| n.label);
        let target = graph.node(edge.target).map(|n| n.label);
        for (id, label) in [(edge.source, source), (edge.target, target)] {
            if label.is_none() {
                out.push(Violation::DanglingEdge { edge: edge.id, missing: id });
            }
        }
        if let (Some(s), Some(t)) = (source, target) {
            if !edge.edge_type.permits(s, t) {
                out.push(Violation::Endpoint {
                    edge: edge.id,
                    edge_type: edge.edge_type,
                    source,
                    target,
                });
            }
        }
        let attrs = (edge.source_association_type, edge.target_association_type);
        if edge.edge_type == EdgeType::Uses {
            match attrs {
                (Some(sa), Some(ta)) => {
                    if Some(sa) != source || Some(ta) != target {
                        out.push(Violation::EdgeAttribute {
                            edge: edge.id,
                            detail: "association types do not match endpoint labels".into(),
                        });
                    }
                }
                _ => out.push(Violation::EdgeAttribute {
                    edge: edge.id,
                    detail: "USES edge missing association types".into(),
                }),
            }
        } else if attrs != (None, None) {
            out.push(Violation::EdgeAttribute {
                edge: edge.id,
                detail: format!("{} edge carries association types", edge.edge_type),
            });
        }
    }
    out
}
