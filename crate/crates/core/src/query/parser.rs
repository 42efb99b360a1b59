use std::collections::BTreeSet;
use std::fmt;

use super::lexer::{tokenize, Tok, Token};
use super::QueryError;
use crate::schema::{EdgeType, NodeLabel};

/// Maximum number of relationship hops across all patterns of a query.
pub const MAX_HOPS: usize = 4;

/// Property keys accepted in patterns, WHERE and RETURN. `class` is an
/// alias of `class_name`; `code` is read from the source file.
pub const QUERY_PROPERTIES: [&str; 7] = ["name", "file_path", "class_name", "class", "signature", "label", "code"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub patterns: Vec<Pattern>,
    pub filter: Option<Expr>,
    pub items: Vec<ReturnItem>,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub nodes: Vec<NodePattern>,
    /// `rels[i]` joins `nodes[i]` and `nodes[i + 1]`.
    pub rels: Vec<RelPattern>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodePattern {
    pub var: Option<String>,
    pub label: Option<NodeLabel>,
    /// Canonical property key and required value.
    pub props: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelDirection {
    /// `-[]->`, from the left node to the right node.
    Right,
    /// `<-[]-`, from the right node to the left node.
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelPattern {
    pub direction: RelDirection,
    pub edge_type: Option<EdgeType>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Neq,
    Contains,
    StartsWith,
    EndsWith,
}

impl CmpOp {
    pub fn eval(self, value: &str, operand: &str) -> bool {
        match self {
            CmpOp::Eq => value == operand,
            CmpOp::Neq => value != operand,
            CmpOp::Contains => value.contains(operand),
            CmpOp::StartsWith => value.starts_with(operand),
            CmpOp::EndsWith => value.ends_with(operand),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Neq => "<>",
            CmpOp::Contains => "CONTAINS",
            CmpOp::StartsWith => "STARTS WITH",
            CmpOp::EndsWith => "ENDS WITH",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Cmp {
        var: String,
        key: String,
        op: CmpOp,
        value: String,
    },
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReturnItem {
    Var(String),
    /// Variable, canonical key, and the key as written (for the column name).
    Prop { var: String, key: String, written: String },
    CountStar,
}

impl ReturnItem {
    pub fn column_name(&self) -> String {
        match self {
            ReturnItem::Var(v) => v.clone(),
            ReturnItem::Prop { var, written, .. } => format!("{var}.{written}"),
            ReturnItem::CountStar => "count(*)".to_string(),
        }
    }
}

impl Query {
    pub fn hops(&self) -> usize {
        self.patterns.iter().map(|p| p.rels.len()).sum()
    }

    pub fn is_aggregate(&self) -> bool {
        self.items.contains(&ReturnItem::CountStar)
    }

    /// Named node variables in order of first appearance.
    pub fn variables(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for p in &self.patterns {
            for n in &p.nodes {
                if let Some(v) = &n.var {
                    if seen.insert(v.clone()) {
                        out.push(v.clone());
                    }
                }
            }
        }
        out
    }
}

fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl fmt::Display for NodePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        if let Some(v) = &self.var {
            write!(f, "{v}")?;
        }
        if let Some(l) = self.label {
            write!(f, ":{l}")?;
        }
        if !self.props.is_empty() {
            let props: Vec<String> = self.props.iter().map(|(k, v)| format!("{k}: {}", quote(v))).collect();
            if self.var.is_some() || self.label.is_some() {
                write!(f, " ")?;
            }
            write!(f, "{{{}}}", props.join(", "))?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Cmp { var, key, op, value } => write!(f, "{var}.{key} {} {}", op.as_str(), quote(value)),
            Expr::And(a, b) => write!(f, "({a} AND {b})"),
            Expr::Or(a, b) => write!(f, "({a} OR {b})"),
            Expr::Not(e) => write!(f, "NOT {e}"),
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let patterns: Vec<String> = self
            .patterns
            .iter()
            .map(|p| {
                let mut s = p.nodes[0].to_string();
                for (rel, node) in p.rels.iter().zip(&p.nodes[1..]) {
                    let t = rel.edge_type.map(|t| format!(":{t}")).unwrap_or_default();
                    match rel.direction {
                        RelDirection::Right => s.push_str(&format!("-[{t}]->")),
                        RelDirection::Left => s.push_str(&format!("<-[{t}]-")),
                    }
                    s.push_str(&node.to_string());
                }
                s
            })
            .collect();
        write!(f, "MATCH {}", patterns.join(", "))?;
        if let Some(e) = &self.filter {
            write!(f, " WHERE {e}")?;
        }
        let items: Vec<String> = self.items.iter().map(ReturnItem::column_name).collect();
        write!(f, " RETURN {}", items.join(", "))?;
        if let Some(n) = self.limit {
            write!(f, " LIMIT {n}")?;
        }
        Ok(())
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, offset: usize) -> &Token {
        &self.tokens[(self.pos + offset).min(self.tokens.len() - 1)]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> QueryError {
        let t = self.peek();
        QueryError::Syntax {
            line: t.line,
            column: t.column,
            token: t.text.clone(),
            message: format!("expected {expected}"),
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        let hit = self.is_keyword(kw);
        if hit {
            self.bump();
        }
        hit
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), QueryError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.error(kw))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        let hit = &self.peek().tok == tok;
        if hit {
            self.bump();
        }
        hit
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> Result<Token, QueryError> {
        if &self.peek().tok == tok {
            Ok(self.bump())
        } else {
            Err(self.error(what))
        }
    }

    fn ident(&mut self, what: &str) -> Result<Token, QueryError> {
        match &self.peek().tok {
            Tok::Ident(_) => Ok(self.bump()),
            _ => Err(self.error(what)),
        }
    }

    fn string(&mut self) -> Result<String, QueryError> {
        match self.peek().tok.clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.error("a quoted string")),
        }
    }

    fn property_key(&mut self) -> Result<(String, String), QueryError> {
        let t = self.ident("a property name")?;
        let written = t.text.clone();
        let canonical = match written.as_str() {
            "class" | "class_name" => "class_name".to_string(),
            k if QUERY_PROPERTIES.contains(&k) => k.to_string(),
            _ => {
                return Err(QueryError::UnknownProperty {
                    name: written,
                    line: t.line,
                    column: t.column,
                })
            }
        };
        Ok((canonical, written))
    }

    fn query(&mut self) -> Result<Query, QueryError> {
        self.expect_keyword("MATCH")?;
        let mut patterns = vec![self.pattern()?];
        while self.eat(&Tok::Comma) {
            patterns.push(self.pattern()?);
        }
        let filter = if self.eat_keyword("WHERE") { Some(self.or_expr()?) } else { None };
        if !self.is_keyword("RETURN") {
            return Err(self.error(if filter.is_some() { "AND, OR or RETURN" } else { "WHERE, RETURN or a relationship" }));
        }
        self.bump();
        let mut items = vec![self.item()?];
        while self.eat(&Tok::Comma) {
            items.push(self.item()?);
        }
        let limit = if self.eat_keyword("LIMIT") {
            let t = self.peek().clone();
            match &t.tok {
                Tok::Int(n) => match n.parse::<usize>() {
                    Ok(v) if v > 0 => {
                        self.bump();
                        Some(v)
                    }
                    _ => return Err(self.error("a positive integer")),
                },
                _ => return Err(self.error("a positive integer")),
            }
        } else {
            None
        };
        self.eat(&Tok::Semicolon);
        if self.peek().tok != Tok::Eof {
            return Err(self.error(if limit.is_some() { "end of query" } else { "LIMIT or end of query" }));
        }
        Ok(Query {
            patterns,
            filter,
            items,
            limit,
        })
    }

    fn pattern(&mut self) -> Result<Pattern, QueryError> {
        let mut nodes = vec![self.node()?];
        let mut rels = Vec::new();
        while matches!(self.peek().tok, Tok::Dash | Tok::LeftArrow) {
            rels.push(self.rel()?);
            nodes.push(self.node()?);
        }
        Ok(Pattern { nodes, rels })
    }

    fn node(&mut self) -> Result<NodePattern, QueryError> {
        self.expect(&Tok::LParen, "(")?;
        let var = match &self.peek().tok {
            Tok::Ident(_) => Some(self.bump().text),
            _ => None,
        };
        let label = if self.eat(&Tok::Colon) {
            let t = self.ident("a node label")?;
            let label = t.text.to_ascii_uppercase().parse::<NodeLabel>().map_err(|_| QueryError::UnknownLabel {
                name: t.text.clone(),
                line: t.line,
                column: t.column,
            })?;
            Some(label)
        } else {
            None
        };
        let mut props = Vec::new();
        if self.eat(&Tok::LBrace) {
            loop {
                let (key, _) = self.property_key()?;
                self.expect(&Tok::Colon, ":")?;
                props.push((key, self.string()?));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(&Tok::RBrace, "} or ,")?;
        }
        self.expect(&Tok::RParen, if props.is_empty() { ") or {" } else { ")" })?;
        Ok(NodePattern { var, label, props })
    }

    fn rel(&mut self) -> Result<RelPattern, QueryError> {
        let left = self.eat(&Tok::LeftArrow);
        if !left {
            self.expect(&Tok::Dash, "-")?;
        }
        self.expect(&Tok::LBracket, "[")?;
        let edge_type = if self.eat(&Tok::Colon) {
            let t = self.ident("a relationship type")?;
            let ty = t.text.to_ascii_uppercase().parse::<EdgeType>().map_err(|_| QueryError::UnknownEdgeType {
                name: t.text.clone(),
                line: t.line,
                column: t.column,
            })?;
            Some(ty)
        } else {
            None
        };
        self.expect(&Tok::RBracket, "]")?;
        if left {
            self.expect(&Tok::Dash, "-")?;
            Ok(RelPattern {
                direction: RelDirection::Left,
                edge_type,
            })
        } else {
            self.expect(&Tok::Arrow, "->")?;
            Ok(RelPattern {
                direction: RelDirection::Right,
                edge_type,
            })
        }
    }

    fn item(&mut self) -> Result<ReturnItem, QueryError> {
        if self.is_keyword("count") && self.peek_at(1).tok == Tok::LParen {
            self.bump();
            self.bump();
            self.expect(&Tok::Star, "*")?;
            self.expect(&Tok::RParen, ")")?;
            return Ok(ReturnItem::CountStar);
        }
        let var = self.ident("a variable or count(*)")?.text;
        if self.eat(&Tok::Dot) {
            let (key, written) = self.property_key()?;
            Ok(ReturnItem::Prop { var, key, written })
        } else {
            Ok(ReturnItem::Var(var))
        }
    }

    fn or_expr(&mut self) -> Result<Expr, QueryError> {
        let mut e = self.and_expr()?;
        while self.eat_keyword("OR") {
            e = Expr::Or(Box::new(e), Box::new(self.and_expr()?));
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> Result<Expr, QueryError> {
        let mut e = self.not_expr()?;
        while self.eat_keyword("AND") {
            e = Expr::And(Box::new(e), Box::new(self.not_expr()?));
        }
        Ok(e)
    }

    fn not_expr(&mut self) -> Result<Expr, QueryError> {
        if self.eat_keyword("NOT") {
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        if self.eat(&Tok::LParen) {
            let e = self.or_expr()?;
            self.expect(&Tok::RParen, ")")?;
            return Ok(e);
        }
        let var = self.ident("a comparison")?.text;
        self.expect(&Tok::Dot, ".")?;
        let (key, _) = self.property_key()?;
        let op = match &self.peek().tok {
            Tok::Eq => CmpOp::Eq,
            Tok::Neq => CmpOp::Neq,
            Tok::Ident(s) if s.eq_ignore_ascii_case("CONTAINS") => CmpOp::Contains,
            Tok::Ident(s) if s.eq_ignore_ascii_case("STARTS") => {
                self.bump();
                if !self.is_keyword("WITH") {
                    return Err(self.error("WITH"));
                }
                CmpOp::StartsWith
            }
            Tok::Ident(s) if s.eq_ignore_ascii_case("ENDS") => {
                self.bump();
                if !self.is_keyword("WITH") {
                    return Err(self.error("WITH"));
                }
                CmpOp::EndsWith
            }
            _ => return Err(self.error("=, <>, CONTAINS, STARTS WITH or ENDS WITH")),
        };
        self.bump();
        let value = self.string()?;
        Ok(Expr::Cmp { var, key, op, value })
    }
}

fn expr_vars<'a>(e: &'a Expr, out: &mut Vec<&'a str>) {
    match e {
        Expr::Cmp { var, .. } => out.push(var),
        Expr::And(a, b) | Expr::Or(a, b) => {
            expr_vars(a, out);
            expr_vars(b, out);
        }
        Expr::Not(inner) => expr_vars(inner, out),
    }
}

/// Parses and checks a query: labels, edge types and property keys must
/// come from the schema, every variable must be bound by MATCH, at most
/// [`MAX_HOPS`] relationships, and `count(*)` cannot be mixed with other
/// return items.
pub fn parse_query(text: &str) -> Result<Query, QueryError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let query = parser.query()?;

    let hops = query.hops();
    if hops > MAX_HOPS {
        return Err(QueryError::TooManyHops { hops, max: MAX_HOPS });
    }
    let bound: BTreeSet<String> = query.variables().into_iter().collect();
    let mut used = Vec::new();
    if let Some(e) = &query.filter {
        expr_vars(e, &mut used);
    }
    for item in &query.items {
        match item {
            ReturnItem::Var(v) | ReturnItem::Prop { var: v, .. } => used.push(v),
            ReturnItem::CountStar => {}
        }
    }
    if let Some(v) = used.into_iter().find(|v| !bound.contains(*v)) {
        return Err(QueryError::UnboundVariable { name: v.to_string() });
    }
    if query.is_aggregate() && query.items.len() > 1 {
        return Err(QueryError::MixedAggregation);
    }
    Ok(query)
}
