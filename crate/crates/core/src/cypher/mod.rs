//! CQL-S: a small Cypher-style query language over the property graph.
//!
//! Linear MATCH chains of up to three hops, WHERE comparisons joined by AND,
//! one optional fulltext call, RETURN with aliases, ORDER BY and LIMIT.

mod ast;
mod exec;
mod generate;
mod parser;

use std::collections::HashMap;

use thiserror::Error;

pub use ast::*;
pub use exec::{compare_values, execute, Cell, ResultTable};
pub use generate::random_query;
pub use parser::{bound_variables, parse, MAX_HOPS};

use crate::graph::{EdgeType, Label};

pub const FULLTEXT_INDEX: &str = "sentences";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("syntax error at offset {pos}: expected {expected}, found {found}")]
    Syntax {
        pos: usize,
        expected: String,
        found: String,
    },
    #[error("unknown label `{0}` at offset {1}")]
    UnknownLabel(String, usize),
    #[error("unknown relationship type `{0}` at offset {1}")]
    UnknownRelationship(String, usize),
    #[error("unknown fulltext index `{0}` at offset {1}")]
    UnknownIndex(String, usize),
    #[error("LIMIT must be a positive integer, found {0} at offset {1}")]
    InvalidLimit(String, usize),
    #[error("variable `{0}` is not bound by CALL or MATCH")]
    UnboundVariable(String),
    #[error("unknown property `{prop}` on `{var}` ({labels})")]
    UnknownProperty {
        var: String,
        prop: String,
        labels: String,
    },
    #[error("schema violation: {0}")]
    Schema(String),
}

impl QueryError {
    pub(crate) fn syntax(pos: usize, expected: &str, found: &str) -> Self {
        QueryError::Syntax {
            pos,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}

/// Parses and validates in one step.
pub fn parse_validated(src: &str) -> Result<Query, QueryError> {
    let q = parse(src)?;
    validate(&q)?;
    Ok(q)
}

fn label_list(labels: &[Label]) -> String {
    labels.iter().map(|l| l.name()).collect::<Vec<_>>().join("|")
}

/// Label each named variable is constrained to; the fulltext node is a Sentence.
pub(crate) fn variable_labels(q: &Query) -> Result<HashMap<String, Option<Label>>, QueryError> {
    let mut labels: HashMap<String, Option<Label>> = HashMap::new();
    let mut constrain = |var: &str, label: Option<Label>| -> Result<(), QueryError> {
        let slot = labels.entry(var.to_string()).or_insert(None);
        match (*slot, label) {
            (Some(a), Some(b)) if a != b => Err(QueryError::Schema(format!(
                "variable `{var}` is used as both {a} and {b}"
            ))),
            (None, l) => {
                *slot = l;
                Ok(())
            }
            _ => Ok(()),
        }
    };
    if let Some(ft) = &q.fulltext {
        constrain(&ft.node_var, Some(Label::Sentence))?;
    }
    for p in &q.patterns {
        for n in std::iter::once(&p.start).chain(p.hops.iter().map(|h| &h.node)) {
            if let Some(v) = &n.var {
                constrain(v, n.label)?;
            }
        }
    }
    Ok(labels)
}

fn hop_allowed(ty: Option<EdgeType>, dir: Direction, left: Label, right: Label) -> bool {
    let types: Vec<EdgeType> = match ty {
        Some(t) => vec![t],
        None => EdgeType::ALL.to_vec(),
    };
    types.iter().any(|t| match dir {
        Direction::Out => t.allows(left, right),
        Direction::In => t.allows(right, left),
        Direction::Either => t.allows(left, right) || t.allows(right, left),
    })
}

fn candidates(label: Option<Label>) -> Vec<Label> {
    label.map_or_else(|| Label::ALL.to_vec(), |l| vec![l])
}

/// Checks hop endpoints against the schema and property names against labels.
pub fn validate(q: &Query) -> Result<(), QueryError> {
    let labels = variable_labels(q)?;
    let resolve = |n: &NodePattern| match &n.var {
        Some(v) => labels.get(v).copied().flatten(),
        None => n.label,
    };
    for p in &q.patterns {
        let mut left = &p.start;
        for hop in &p.hops {
            let (l, r) = (resolve(left), resolve(&hop.node));
            let ok = candidates(l)
                .into_iter()
                .any(|a| candidates(r).into_iter().any(|b| hop_allowed(hop.rel_type, hop.direction, a, b)));
            if !ok {
                let ty = hop.rel_type.map_or("any relationship".to_string(), |t| t.to_string());
                let expected: Vec<String> = match hop.rel_type {
                    Some(t) => Label::ALL
                        .iter()
                        .flat_map(|&a| Label::ALL.iter().map(move |&b| (a, b)))
                        .filter(|&(a, b)| t.allows(a, b))
                        .map(|(a, b)| format!("({a})->({b})"))
                        .collect(),
                    None => vec![],
                };
                let mut shown = Pattern {
                    start: left.clone(),
                    hops: vec![hop.clone()],
                };
                shown.start.label = l;
                shown.hops[0].node.label = r;
                return Err(QueryError::Schema(format!(
                    "hop {shown} is not allowed for {ty}{}",
                    if expected.is_empty() {
                        String::new()
                    } else {
                        format!("; expected {}", expected.join(" or "))
                    }
                )));
            }
            left = &hop.node;
        }
    }

    let score_var = q.fulltext.as_ref().map(|f| f.score_var.as_str());
    let check_expr = |e: &Expr| -> Result<(), QueryError> {
        if let Expr::Property(v, prop) = e {
            if Some(v.as_str()) == score_var {
                return Err(QueryError::UnknownProperty {
                    var: v.clone(),
                    prop: prop.clone(),
                    labels: "fulltext score".into(),
                });
            }
            let allowed = candidates(labels.get(v).copied().flatten());
            if !allowed.iter().any(|l| l.properties().contains(&prop.as_str())) {
                return Err(QueryError::UnknownProperty {
                    var: v.clone(),
                    prop: prop.clone(),
                    labels: label_list(&allowed),
                });
            }
        }
        Ok(())
    };
    let comparable = |e: &Expr| -> Result<(), QueryError> {
        match e {
            Expr::Var(v) if Some(v.as_str()) != score_var => Err(QueryError::Schema(format!(
                "node `{v}` cannot be compared; use one of its properties"
            ))),
            _ => Ok(()),
        }
    };
    for c in &q.conditions {
        check_expr(&c.left)?;
        comparable(&c.left)?;
        if let Operand::Expr(e) = &c.right {
            check_expr(e)?;
            comparable(e)?;
        }
    }
    for r in &q.returns {
        check_expr(&r.expr)?;
    }
    if let Some(o) = &q.order_by {
        check_expr(&o.expr)?;
    }
    Ok(())
}
