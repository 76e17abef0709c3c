use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use super::ast::*;
use super::{validate, variable_labels, QueryError};
use crate::graph::{Label, NodeId, PropertyGraph, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Node { id: NodeId, label: Label, name: String },
    Value(Value),
}

impl Cell {
    pub fn node_id(&self) -> Option<NodeId> {
        match self {
            Cell::Node { id, .. } => Some(*id),
            Cell::Value(_) => None,
        }
    }

    fn sort_value(&self) -> Value {
        match self {
            Cell::Node { id, .. } => Value::Int(*id as i64),
            Cell::Value(v) => v.clone(),
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Node { name, .. } => f.write_str(name),
            Cell::Value(Value::Null) => Ok(()),
            Cell::Value(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for row in &self.rows {
            out.write_record(row.iter().map(ToString::to_string))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }
}

enum Num {
    Int(i64),
    Float(f64),
}

/// Strict decimal number: optional sign, digits, optional fraction and exponent.
fn parse_number(s: &str) -> Option<Num> {
    let body = s.strip_prefix(['-', '+']).unwrap_or(s);
    let mut chars = body.chars().peekable();
    let mut digits = 0;
    while chars.peek().is_some_and(char::is_ascii_digit) {
        chars.next();
        digits += 1;
    }
    if digits == 0 {
        return None;
    }
    if chars.peek() == Some(&'.') {
        chars.next();
        let mut frac = 0;
        while chars.peek().is_some_and(char::is_ascii_digit) {
            chars.next();
            frac += 1;
        }
        if frac == 0 {
            return None;
        }
    }
    if matches!(chars.peek(), Some('e' | 'E')) {
        chars.next();
        if matches!(chars.peek(), Some('-' | '+')) {
            chars.next();
        }
        let mut exp = 0;
        while chars.peek().is_some_and(char::is_ascii_digit) {
            chars.next();
            exp += 1;
        }
        if exp == 0 {
            return None;
        }
    }
    if chars.next().is_some() {
        return None;
    }
    if let Ok(i) = s.parse::<i64>() {
        return Some(Num::Int(i));
    }
    s.parse::<f64>().ok().filter(|x| x.is_finite()).map(Num::Float)
}

fn numeric(v: &Value) -> Option<Num> {
    match v {
        Value::Int(i) => Some(Num::Int(*i)),
        Value::Float(x) => Some(Num::Float(*x)),
        Value::Str(s) => parse_number(s),
        _ => None,
    }
}

fn cmp_num(a: Num, b: Num) -> Option<Ordering> {
    match (a, b) {
        (Num::Int(x), Num::Int(y)) => Some(x.cmp(&y)),
        (Num::Int(x), Num::Float(y)) => (x as f64).partial_cmp(&y),
        (Num::Float(x), Num::Int(y)) => x.partial_cmp(&(y as f64)),
        (Num::Float(x), Num::Float(y)) => x.partial_cmp(&y),
    }
}

/// WHERE comparison: numeric when both sides read as numbers, otherwise
/// lexicographic on the printed forms. Null and list values never compare.
pub fn compare_values(a: &Value, b: &Value) -> Option<Ordering> {
    if matches!(a, Value::Null | Value::List(_)) || matches!(b, Value::Null | Value::List(_)) {
        return None;
    }
    if let (Some(x), Some(y)) = (numeric(a), numeric(b)) {
        return cmp_num(x, y);
    }
    Some(a.to_string().cmp(&b.to_string()))
}

fn condition_holds(op: CmpOp, a: &Value, b: &Value) -> bool {
    if op == CmpOp::Contains {
        return match (a, b) {
            (Value::Str(x), Value::Str(y)) => x.contains(y.as_str()),
            _ => false,
        };
    }
    match compare_values(a, b) {
        None => false,
        Some(o) => match op {
            CmpOp::Eq => o == Ordering::Equal,
            CmpOp::Lt => o == Ordering::Less,
            CmpOp::Le => o != Ordering::Greater,
            CmpOp::Gt => o == Ordering::Greater,
            CmpOp::Ge => o != Ordering::Less,
            CmpOp::Contains => unreachable!(),
        },
    }
}

/// ORDER BY key order: numbers, then strings, then nulls and lists.
fn sort_cmp(a: &Value, b: &Value) -> Ordering {
    fn class(v: &Value) -> u8 {
        match v {
            Value::Int(_) | Value::Float(_) => 0,
            Value::Str(_) => 1,
            Value::Null | Value::List(_) => 2,
        }
    }
    match (a, b) {
        (Value::Str(x), Value::Str(y)) => x.cmp(y),
        _ if class(a) == 0 && class(b) == 0 => {
            cmp_num(numeric(a).unwrap(), numeric(b).unwrap()).unwrap_or(Ordering::Equal)
        }
        _ => class(a).cmp(&class(b)),
    }
}

struct HopSpec {
    left: usize,
    right: usize,
    hop: Hop,
}

struct Plan<'q> {
    slot_labels: Vec<Option<Label>>,
    var_slot: HashMap<&'q str, usize>,
    hops: Vec<HopSpec>,
    fulltext_slot: Option<usize>,
}

fn plan<'q>(q: &'q Query, labels: &HashMap<String, Option<Label>>) -> Plan<'q> {
    let mut plan = Plan {
        slot_labels: Vec::new(),
        var_slot: HashMap::new(),
        hops: Vec::new(),
        fulltext_slot: None,
    };
    let slot_for = |plan: &mut Plan<'q>, n: &'q NodePattern| -> usize {
        match &n.var {
            Some(v) => {
                if let Some(&s) = plan.var_slot.get(v.as_str()) {
                    return s;
                }
                plan.slot_labels.push(labels.get(v).copied().flatten());
                plan.var_slot.insert(v, plan.slot_labels.len() - 1);
                plan.slot_labels.len() - 1
            }
            None => {
                plan.slot_labels.push(n.label);
                plan.slot_labels.len() - 1
            }
        }
    };
    if let Some(ft) = &q.fulltext {
        plan.slot_labels.push(Some(Label::Sentence));
        plan.var_slot.insert(&ft.node_var, 0);
        plan.fulltext_slot = Some(0);
    }
    for p in &q.patterns {
        let mut left = slot_for(&mut plan, &p.start);
        for hop in &p.hops {
            let right = slot_for(&mut plan, &hop.node);
            plan.hops.push(HopSpec {
                left,
                right,
                hop: hop.clone(),
            });
            left = right;
        }
    }
    plan
}

/// Edge indices that can realize `hop` between two bound nodes.
fn hop_edges(graph: &PropertyGraph, spec: &HopSpec, a: NodeId, b: NodeId) -> Vec<usize> {
    let mut out: Vec<usize> = graph
        .incident_edge_indices(a)
        .filter(|&i| {
            let e = &graph.edges()[i];
            if spec.hop.rel_type.is_some_and(|t| t != e.ty) {
                return false;
            }
            let fwd = e.start == a && e.end == b;
            let back = e.start == b && e.end == a;
            match spec.hop.direction {
                Direction::Out => fwd,
                Direction::In => back,
                Direction::Either => fwd || back,
            }
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

struct Binder<'a> {
    graph: &'a PropertyGraph,
    plan: &'a Plan<'a>,
    fulltext: Option<Vec<NodeId>>,
    accept: &'a dyn Fn(&[NodeId]) -> bool,
    out: Vec<(Vec<NodeId>, Vec<usize>)>,
}

impl Binder<'_> {
    fn candidates(&self, slot: usize, bound: &[NodeId]) -> Vec<NodeId> {
        if Some(slot) == self.plan.fulltext_slot {
            return self.fulltext.clone().unwrap_or_default();
        }
        let anchor = self.plan.hops.iter().find_map(|h| {
            if h.right == slot && h.left < slot {
                Some((h, h.left, false))
            } else if h.left == slot && h.right < slot {
                Some((h, h.right, true))
            } else {
                None
            }
        });
        let mut c: Vec<NodeId> = match anchor {
            Some((spec, other, slot_is_left)) => {
                let b = bound[other];
                let mut v: Vec<NodeId> = graph_neighbours(self.graph, b)
                    .into_iter()
                    .filter(|&n| {
                        let (l, r) = if slot_is_left { (n, b) } else { (b, n) };
                        !hop_edges(self.graph, spec, l, r).is_empty()
                    })
                    .collect();
                v.sort_unstable();
                v.dedup();
                v
            }
            None => (0..self.graph.node_count()).collect(),
        };
        if let Some(label) = self.plan.slot_labels[slot] {
            c.retain(|&n| self.graph.nodes()[n].label == label);
        }
        c
    }

    fn bind(&mut self, bound: &mut Vec<NodeId>) {
        let slot = bound.len();
        if slot == self.plan.slot_labels.len() {
            if (self.accept)(bound) {
                let mut used = Vec::new();
                self.assign_edges(bound, 0, &mut used);
            }
            return;
        }
        for n in self.candidates(slot, bound) {
            bound.push(n);
            let consistent = self.plan.hops.iter().all(|h| {
                h.left.max(h.right) != slot || !hop_edges(self.graph, h, bound[h.left], bound[h.right]).is_empty()
            });
            if consistent {
                self.bind(bound);
            }
            bound.pop();
        }
    }

    fn assign_edges(&mut self, nodes: &[NodeId], k: usize, used: &mut Vec<usize>) {
        if k == self.plan.hops.len() {
            self.out.push((nodes.to_vec(), used.clone()));
            return;
        }
        let h = &self.plan.hops[k];
        for e in hop_edges(self.graph, h, nodes[h.left], nodes[h.right]) {
            if used.contains(&e) {
                continue;
            }
            used.push(e);
            self.assign_edges(nodes, k + 1, used);
            used.pop();
        }
    }
}

fn graph_neighbours(graph: &PropertyGraph, n: NodeId) -> Vec<NodeId> {
    graph
        .incident_edge_indices(n)
        .map(|i| {
            let e = &graph.edges()[i];
            if e.start == n {
                e.end
            } else {
                e.start
            }
        })
        .collect()
}

/// Validates and runs a query. Rows come out in binding order (slot node ids
/// in first-appearance order, then edge ids), are filtered by WHERE, stably
/// sorted by ORDER BY and cut by LIMIT.
pub fn execute(q: &Query, graph: &PropertyGraph) -> Result<ResultTable, QueryError> {
    validate(q)?;
    let labels = variable_labels(q)?;
    let plan = plan(q, &labels);
    let scores: HashMap<NodeId, f64> = q
        .fulltext
        .as_ref()
        .map(|ft| graph.fulltext_search(&ft.query, None).into_iter().collect())
        .unwrap_or_default();
    let fulltext = q.fulltext.as_ref().map(|_| {
        let mut ids: Vec<NodeId> = scores.keys().copied().collect();
        ids.sort_unstable();
        ids
    });
    let score_var = q.fulltext.as_ref().map(|f| f.score_var.as_str());

    let eval = |e: &Expr, nodes: &[NodeId]| -> Cell {
        let var = e.var();
        if Some(var) == score_var {
            return Cell::Value(Value::Float(scores[&nodes[0]]));
        }
        let node = &graph.nodes()[nodes[plan.var_slot[var]]];
        match e {
            Expr::Var(_) => Cell::Node {
                id: node.id,
                label: node.label,
                name: node.name().to_string(),
            },
            Expr::Property(_, p) => Cell::Value(node.property(p).unwrap_or(Value::Null)),
        }
    };
    let accept = |nodes: &[NodeId]| {
        q.conditions.iter().all(|c| {
            let left = eval(&c.left, nodes).sort_value();
            let right = match &c.right {
                Operand::Expr(e) => eval(e, nodes).sort_value(),
                Operand::Literal(Literal::Str(s)) => Value::Str(s.clone()),
                Operand::Literal(Literal::Int(i)) => Value::Int(*i),
                Operand::Literal(Literal::Float(x)) => Value::Float(*x),
            };
            condition_holds(c.op, &left, &right)
        })
    };

    let mut binder = Binder {
        graph,
        plan: &plan,
        fulltext,
        accept: &accept,
        out: Vec::new(),
    };
    binder.bind(&mut Vec::new());
    let mut bindings = binder.out;
    bindings.sort();

    if let Some(o) = &q.order_by {
        let mut keyed: Vec<(Value, (Vec<NodeId>, Vec<usize>))> = bindings
            .into_iter()
            .map(|b| (eval(&o.expr, &b.0).sort_value(), b))
            .collect();
        keyed.sort_by(|a, b| {
            let ord = sort_cmp(&a.0, &b.0);
            if o.descending {
                ord.reverse()
            } else {
                ord
            }
        });
        bindings = keyed.into_iter().map(|(_, b)| b).collect();
    }
    if let Some(limit) = q.limit {
        bindings.truncate(limit as usize);
    }
    Ok(ResultTable {
        columns: q.returns.iter().map(ReturnItem::column_name).collect(),
        rows: bindings
            .iter()
            .map(|(nodes, _)| q.returns.iter().map(|r| eval(&r.expr, nodes)).collect())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AbstractRecord;
    use crate::cypher::parse;
    use crate::embedding::{Embedder, HashingEmbedder};
    use crate::graph::EdgeType;
    use crate::taxonomy::CategoryType;

    fn record(id: &str, cites: u64, year: i32) -> AbstractRecord {
        AbstractRecord {
            id: id.into(),
            title: format!("Title {id}"),
            text: "text".into(),
            first_author: "A. Author".into(),
            year,
            keywords: vec![],
            url: format!("https://example.org/{id}"),
            citation_count: cites,
        }
    }

    fn mini_graph() -> PropertyGraph {
        let emb = HashingEmbedder::new(16, 0);
        let mut g = PropertyGraph::new();
        let mut abstracts = Vec::new();
        for (id, c, y) in [("P1", 5, 1990), ("P2", 40, 2001), ("P3", 12, 1958)] {
            let a = g.add_abstract(&record(id, c, y));
            let t = g.upsert_term(Label::TimeReference, &y.to_string(), None).unwrap();
            g.add_edge(EdgeType::WasPublishedIn, a, t).unwrap();
            abstracts.push(a);
        }
        let tok = g.upsert_entity("tokamak", CategoryType::NuclearFusionDeviceType).unwrap();
        let w = g.upsert_entity("tungsten", CategoryType::ChemicalElementOrCompound).unwrap();
        for (i, (text, ents)) in [
            ("The tokamak wall is tungsten.", vec![tok, w]),
            ("A tokamak plasma.", vec![tok]),
            ("Tungsten erosion.", vec![w]),
        ]
        .into_iter()
        .enumerate()
        {
            let s = g.add_sentence(text, emb.embed(text).unwrap()).unwrap();
            g.add_edge(EdgeType::HasSentence, abstracts[i], s).unwrap();
            for e in ents {
                g.add_edge(EdgeType::Contains, s, e).unwrap();
            }
        }
        g
    }

    fn run(g: &PropertyGraph, q: &str) -> ResultTable {
        execute(&parse(q).unwrap(), g).unwrap()
    }

    fn col(t: &ResultTable, i: usize) -> Vec<String> {
        t.rows.iter().map(|r| r[i].to_string()).collect()
    }

    #[test]
    fn top_cited_with_limit() {
        let g = mini_graph();
        let t = run(&g, "MATCH (a:Abstract) RETURN a.sourceId, a.citationCount ORDER BY a.citationCount DESC LIMIT 3");
        assert_eq!(col(&t, 0), ["P2", "P3", "P1"]);
        assert_eq!(t.columns, ["a.sourceId", "a.citationCount"]);
    }

    #[test]
    fn year_filter_compares_numerically() {
        let g = mini_graph();
        let t = run(
            &g,
            "MATCH (a:Abstract)-[:WAS_PUBLISHED_IN]->(t:TimeReference) WHERE t.name >= 1990 RETURN a.sourceId",
        );
        assert_eq!(col(&t, 0), ["P1", "P2"]);
    }

    #[test]
    fn single_hop_matches_contains_edges() {
        let g = mini_graph();
        let t = run(&g, r#"MATCH (s:Sentence)-[:CONTAINS]->(e:Entity) WHERE e.name = "tokamak" RETURN s"#);
        let tok = g.find(Label::Entity, "tokamak").unwrap();
        let expected: Vec<NodeId> = g
            .edges()
            .iter()
            .filter(|e| e.ty == EdgeType::Contains && e.end == tok)
            .map(|e| e.start)
            .collect();
        let got: Vec<NodeId> = t.rows.iter().map(|r| r[0].node_id().unwrap()).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn fulltext_with_hop() {
        let g = mini_graph();
        let t = run(
            &g,
            r#"CALL fulltext('sentences', "tungsten") YIELD node, score MATCH (a:Abstract)-[:HAS_SENTENCE]->(node) RETURN node, a.sourceId ORDER BY score DESC"#,
        );
        assert_eq!(col(&t, 1).len(), 2);
        assert!(t.rows.iter().all(|r| r[0].to_string().to_lowercase().contains("tungsten")));
    }

    #[test]
    fn order_ties_keep_binding_order() {
        let g = mini_graph();
        let t = run(&g, "MATCH (e:Entity) RETURN e ORDER BY e.edges");
        let ids: Vec<_> = t.rows.iter().map(|r| r[0].node_id().unwrap()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
    }

    #[test]
    fn csv_output() {
        let g = mini_graph();
        let t = run(&g, "MATCH (a:Abstract) WHERE a.sourceId = 'P1' RETURN a.sourceId AS id, a.url");
        assert_eq!(t.to_csv(), "id,a.url\nP1,https://example.org/P1\n");
    }

    #[test]
    fn number_parsing_is_strict() {
        assert!(parse_number("1958").is_some());
        assert!(parse_number("-2.5e3").is_some());
        for s in ["", "nan", "inf", "1.", ".5", "1e", "12a", "1 2"] {
            assert!(parse_number(s).is_none(), "{s}");
        }
        assert_eq!(compare_values(&Value::Str("10".into()), &Value::Int(9)), Some(Ordering::Greater));
        assert_eq!(compare_values(&Value::Str("b".into()), &Value::Int(9)), Some(Ordering::Greater));
        assert_eq!(compare_values(&Value::Null, &Value::Int(9)), None);
    }
}
