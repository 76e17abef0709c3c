use std::collections::HashSet;

use super::ast::*;
use super::QueryError;
use crate::graph::{EdgeType, Label};

pub const MAX_HOPS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Number(String),
    Sym(&'static str),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::End => "end of input".into(),
        }
    }
}

const SYMBOLS: &[&str] = &["<=", ">=", "(", ")", "[", "]", ":", ",", ".", "-", "<", ">", "="];

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, QueryError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c == b'"' || c == b'\'' {
            let quote = c;
            let mut s = String::new();
            i += 1;
            let mut closed = false;
            let mut chars = src[i..].char_indices();
            while let Some((off, ch)) = chars.next() {
                if ch == '\\' {
                    match chars.next() {
                        Some((_, e)) => s.push(e),
                        None => break,
                    }
                } else if ch as u32 == quote as u32 {
                    i += off + 1;
                    closed = true;
                    break;
                } else {
                    s.push(ch);
                }
            }
            if !closed {
                return Err(QueryError::syntax(start, "closing quote", "end of input"));
            }
            out.push((Tok::Str(s), start));
            continue;
        }
        if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'-' || bytes[j] == b'+') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            out.push((Tok::Number(src[start..i].to_string()), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
            continue;
        }
        if c == b'`' {
            let end = src[i + 1..]
                .find('`')
                .ok_or_else(|| QueryError::syntax(start, "closing backtick", "end of input"))?;
            out.push((Tok::Ident(src[i + 1..i + 1 + end].to_string()), start));
            i += end + 2;
            continue;
        }
        match SYMBOLS.iter().find(|s| src[i..].starts_with(*s)) {
            Some(s) => {
                out.push((Tok::Sym(s), start));
                i += s.len();
            }
            None => {
                let ch = src[i..].chars().next().unwrap();
                return Err(QueryError::syntax(start, "a token", &format!("`{ch}`")));
            }
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

const RESERVED: &[&str] = &[
    "CALL", "YIELD", "MATCH", "WHERE", "AND", "RETURN", "ORDER", "BY", "ASC", "DESC", "LIMIT",
    "CONTAINS", "AS",
];

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn err<T>(&self, expected: &str) -> Result<T, QueryError> {
        Err(QueryError::syntax(self.offset(), expected, &self.peek().describe()))
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), QueryError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.err(kw)
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), QueryError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(&format!("`{s}`"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, QueryError> {
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.iter().any(|r| r.eq_ignore_ascii_case(&s)) => {
                self.pos += 1;
                Ok(s)
            }
            _ => self.err(what),
        }
    }

    /// Label or relationship type name; keywords such as CONTAINS are allowed.
    fn type_name(&mut self, what: &str) -> Result<String, QueryError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.pos += 1;
                Ok(s)
            }
            _ => self.err(what),
        }
    }

    fn string(&mut self) -> Result<String, QueryError> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("a string literal"),
        }
    }

    fn fulltext(&mut self) -> Result<FulltextCall, QueryError> {
        let name_at = self.offset();
        let name = self.ident("procedure name")?;
        if name != "fulltext" {
            return Err(QueryError::syntax(name_at, "fulltext", &format!("`{name}`")));
        }
        self.expect_sym("(")?;
        let index_at = self.offset();
        let index = self.string()?;
        if index != "sentences" {
            return Err(QueryError::UnknownIndex(index, index_at));
        }
        self.expect_sym(",")?;
        let query = self.string()?;
        self.expect_sym(")")?;
        self.expect_kw("YIELD")?;
        let node_var = self.ident("node variable")?;
        self.expect_sym(",")?;
        let score_var = self.ident("score variable")?;
        if node_var == score_var {
            return self.err("distinct YIELD variables");
        }
        Ok(FulltextCall {
            index,
            query,
            node_var,
            score_var,
        })
    }

    fn node(&mut self) -> Result<NodePattern, QueryError> {
        self.expect_sym("(")?;
        let var = match self.peek() {
            Tok::Ident(_) => Some(self.ident("variable")?),
            _ => None,
        };
        let label = if self.eat_sym(":") {
            let at = self.offset();
            let name = self.type_name("label")?;
            Some(
                name.parse::<Label>()
                    .map_err(|_| QueryError::UnknownLabel(name, at))?,
            )
        } else {
            None
        };
        self.expect_sym(")")?;
        Ok(NodePattern { var, label })
    }

    fn rel_body(&mut self) -> Result<Option<EdgeType>, QueryError> {
        self.expect_sym("[")?;
        let t = if self.eat_sym(":") {
            let at = self.offset();
            let name = self.type_name("relationship type")?;
            Some(
                name.parse::<EdgeType>()
                    .map_err(|_| QueryError::UnknownRelationship(name, at))?,
            )
        } else {
            None
        };
        self.expect_sym("]")?;
        Ok(t)
    }

    fn pattern(&mut self) -> Result<Pattern, QueryError> {
        let start = self.node()?;
        let mut hops = Vec::new();
        loop {
            let at = self.offset();
            let (rel_type, direction) = if self.is_sym("<") && matches!(self.peek_at(1), Tok::Sym("-")) {
                self.pos += 2;
                let t = self.rel_body()?;
                self.expect_sym("-")?;
                (t, Direction::In)
            } else if self.is_sym("-") {
                self.pos += 1;
                let t = self.rel_body()?;
                self.expect_sym("-")?;
                if self.eat_sym(">") {
                    (t, Direction::Out)
                } else {
                    (t, Direction::Either)
                }
            } else {
                break;
            };
            if hops.len() == MAX_HOPS {
                return Err(QueryError::syntax(at, "at most 3 hops per pattern", "a fourth hop"));
            }
            let node = self.node()?;
            hops.push(Hop {
                rel_type,
                direction,
                node,
            });
        }
        Ok(Pattern { start, hops })
    }

    fn expr(&mut self) -> Result<Expr, QueryError> {
        let v = self.ident("variable")?;
        if self.eat_sym(".") {
            let p = self.ident("property name")?;
            Ok(Expr::Property(v, p))
        } else {
            Ok(Expr::Var(v))
        }
    }

    fn literal_or_expr(&mut self) -> Result<Operand, QueryError> {
        let negative = self.eat_sym("-");
        match self.peek().clone() {
            Tok::Number(n) => {
                let at = self.offset();
                self.pos += 1;
                let text = if negative { format!("-{n}") } else { n };
                if text.contains(['.', 'e', 'E']) {
                    text.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .map(|x| Operand::Literal(Literal::Float(x)))
                        .ok_or_else(|| QueryError::syntax(at, "a finite number", &text))
                } else {
                    text.parse::<i64>()
                        .map(|i| Operand::Literal(Literal::Int(i)))
                        .map_err(|_| QueryError::syntax(at, "a 64-bit integer", &text))
                }
            }
            _ if negative => self.err("a number"),
            Tok::Str(s) => {
                self.pos += 1;
                Ok(Operand::Literal(Literal::Str(s)))
            }
            Tok::Ident(_) => Ok(Operand::Expr(self.expr()?)),
            _ => self.err("a literal or property"),
        }
    }

    fn condition(&mut self) -> Result<Condition, QueryError> {
        let left = self.expr()?;
        let op = if self.eat_kw("CONTAINS") {
            CmpOp::Contains
        } else {
            let op = match self.peek() {
                Tok::Sym("=") => CmpOp::Eq,
                Tok::Sym("<") => CmpOp::Lt,
                Tok::Sym("<=") => CmpOp::Le,
                Tok::Sym(">") => CmpOp::Gt,
                Tok::Sym(">=") => CmpOp::Ge,
                _ => return self.err("a comparison operator"),
            };
            self.pos += 1;
            op
        };
        let right = self.literal_or_expr()?;
        Ok(Condition { left, op, right })
    }

    fn query(&mut self) -> Result<Query, QueryError> {
        let fulltext = if self.eat_kw("CALL") {
            Some(self.fulltext()?)
        } else {
            None
        };
        let mut patterns = Vec::new();
        if self.eat_kw("MATCH") {
            patterns.push(self.pattern()?);
            while self.eat_sym(",") {
                patterns.push(self.pattern()?);
            }
        }
        if fulltext.is_none() && patterns.is_empty() {
            return self.err("CALL or MATCH");
        }
        let mut conditions = Vec::new();
        if self.eat_kw("WHERE") {
            conditions.push(self.condition()?);
            while self.eat_kw("AND") {
                conditions.push(self.condition()?);
            }
        }
        self.expect_kw("RETURN")?;
        let mut returns = Vec::new();
        loop {
            let expr = self.expr()?;
            let alias = if self.eat_kw("AS") {
                Some(self.ident("alias")?)
            } else {
                None
            };
            returns.push(ReturnItem { expr, alias });
            if !self.eat_sym(",") {
                break;
            }
        }
        let order_by = if self.eat_kw("ORDER") {
            self.expect_kw("BY")?;
            let expr = self.expr()?;
            let descending = if self.eat_kw("DESC") {
                true
            } else {
                self.eat_kw("ASC");
                false
            };
            Some(OrderBy { expr, descending })
        } else {
            None
        };
        let limit = if self.eat_kw("LIMIT") {
            let at = self.offset();
            match self.peek().clone() {
                Tok::Number(n) => {
                    self.pos += 1;
                    match n.parse::<u64>() {
                        Ok(0) | Err(_) => return Err(QueryError::InvalidLimit(n, at)),
                        Ok(l) => Some(l),
                    }
                }
                Tok::Sym("-") => return Err(QueryError::InvalidLimit("negative".into(), at)),
                _ => return self.err("a positive integer"),
            }
        } else {
            None
        };
        if *self.peek() != Tok::End {
            return self.err("end of query");
        }
        Ok(Query {
            fulltext,
            patterns,
            conditions,
            returns,
            order_by,
            limit,
        })
    }
}

/// Variables introduced by the CALL and MATCH clauses, in first-appearance order.
pub fn bound_variables(q: &Query) -> Vec<String> {
    let mut seen = Vec::new();
    let mut push = |v: &str| {
        if !seen.iter().any(|s: &String| s == v) {
            seen.push(v.to_string());
        }
    };
    if let Some(ft) = &q.fulltext {
        push(&ft.node_var);
        push(&ft.score_var);
    }
    for p in &q.patterns {
        for n in std::iter::once(&p.start).chain(p.hops.iter().map(|h| &h.node)) {
            if let Some(v) = &n.var {
                push(v);
            }
        }
    }
    seen
}

pub fn parse(src: &str) -> Result<Query, QueryError> {
    if src.trim().is_empty() {
        return Err(QueryError::syntax(0, "a query", "empty input"));
    }
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let q = p.query()?;
    let bound: HashSet<String> = bound_variables(&q).into_iter().collect();
    if let Some(ft) = &q.fulltext {
        let score_in_pattern = q.patterns.iter().any(|p| {
            std::iter::once(&p.start)
                .chain(p.hops.iter().map(|h| &h.node))
                .any(|n| n.var.as_deref() == Some(ft.score_var.as_str()))
        });
        if score_in_pattern {
            return Err(QueryError::Schema(format!(
                "`{}` is a score and cannot be matched as a node",
                ft.score_var
            )));
        }
    }
    let used = q
        .conditions
        .iter()
        .flat_map(|c| {
            let right = match &c.right {
                Operand::Expr(e) => Some(e),
                Operand::Literal(_) => None,
            };
            std::iter::once(&c.left).chain(right)
        })
        .chain(q.returns.iter().map(|r| &r.expr))
        .chain(q.order_by.iter().map(|o| &o.expr));
    for e in used {
        if !bound.contains(e.var()) {
            return Err(QueryError::UnboundVariable(e.var().to_string()));
        }
    }
    Ok(q)
}
