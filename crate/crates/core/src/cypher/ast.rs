use std::fmt;

use crate::graph::{EdgeType, Label};

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub fulltext: Option<FulltextCall>,
    pub patterns: Vec<Pattern>,
    pub conditions: Vec<Condition>,
    pub returns: Vec<ReturnItem>,
    pub order_by: Option<OrderBy>,
    pub limit: Option<u64>,
}

/// `CALL fulltext('<index>', "<query>") YIELD <node>, <score>`
#[derive(Debug, Clone, PartialEq)]
pub struct FulltextCall {
    pub index: String,
    pub query: String,
    pub node_var: String,
    pub score_var: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodePattern {
    pub var: Option<String>,
    pub label: Option<Label>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `-[...]->`
    Out,
    /// `<-[...]-`
    In,
    /// `-[...]-`
    Either,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hop {
    pub rel_type: Option<EdgeType>,
    pub direction: Direction,
    pub node: NodePattern,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub start: NodePattern,
    pub hops: Vec<Hop>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var(String),
    Property(String, String),
}

impl Expr {
    pub fn var(&self) -> &str {
        match self {
            Expr::Var(v) | Expr::Property(v, _) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Str(String),
    Int(i64),
    Float(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Expr(Expr),
    Literal(Literal),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
    Contains,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::Contains];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Contains => "CONTAINS",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub left: Expr,
    pub op: CmpOp,
    pub right: Operand,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnItem {
    pub expr: Expr,
    pub alias: Option<String>,
}

impl ReturnItem {
    pub fn column_name(&self) -> String {
        self.alias.clone().unwrap_or_else(|| self.expr.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderBy {
    pub expr: Expr,
    pub descending: bool,
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var(v) => f.write_str(v),
            Expr::Property(v, p) => write!(f, "{v}.{p}"),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Str(s) => f.write_str(&quote(s)),
            Literal::Int(i) => write!(f, "{i}"),
            Literal::Float(x) => write!(f, "{x:?}"),
        }
    }
}

impl fmt::Display for NodePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        if let Some(v) = &self.var {
            f.write_str(v)?;
        }
        if let Some(l) = self.label {
            write!(f, ":{l}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.start)?;
        for hop in &self.hops {
            let inner = match hop.rel_type {
                Some(t) => format!("[:{t}]"),
                None => "[]".to_string(),
            };
            match hop.direction {
                Direction::Out => write!(f, "-{inner}->")?,
                Direction::In => write!(f, "<-{inner}-")?,
                Direction::Either => write!(f, "-{inner}-")?,
            }
            write!(f, "{}", hop.node)?;
        }
        Ok(())
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if let Some(ft) = &self.fulltext {
            parts.push(format!(
                "CALL fulltext('{}', {}) YIELD {}, {}",
                ft.index,
                quote(&ft.query),
                ft.node_var,
                ft.score_var
            ));
        }
        if !self.patterns.is_empty() {
            let ps: Vec<String> = self.patterns.iter().map(ToString::to_string).collect();
            parts.push(format!("MATCH {}", ps.join(", ")));
        }
        if !self.conditions.is_empty() {
            let cs: Vec<String> = self
                .conditions
                .iter()
                .map(|c| {
                    let right = match &c.right {
                        Operand::Expr(e) => e.to_string(),
                        Operand::Literal(l) => l.to_string(),
                    };
                    format!("{} {} {}", c.left, c.op.symbol(), right)
                })
                .collect();
            parts.push(format!("WHERE {}", cs.join(" AND ")));
        }
        let rs: Vec<String> = self
            .returns
            .iter()
            .map(|r| match &r.alias {
                Some(a) => format!("{} AS {a}", r.expr),
                None => r.expr.to_string(),
            })
            .collect();
        parts.push(format!("RETURN {}", rs.join(", ")));
        if let Some(o) = &self.order_by {
            parts.push(format!(
                "ORDER BY {} {}",
                o.expr,
                if o.descending { "DESC" } else { "ASC" }
            ));
        }
        if let Some(l) = self.limit {
            parts.push(format!("LIMIT {l}"));
        }
        f.write_str(&parts.join(" "))
    }
}
