//! Embedded property graph: typed nodes and edges, degree bookkeeping, an
//! inverted full-text index over sentences and a JSON Lines snapshot format.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value as Json};

use crate::corpus::{AbstractRecord, SentenceUnit};
use crate::embedding::{Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::resolution::ResolvedEntity;
use crate::taxonomy::CategoryType;
use crate::text::tokenize;

pub const SNAPSHOT_VERSION: u32 = 1;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Abstract,
    Sentence,
    Entity,
    Person,
    TimeReference,
    KeyWord,
}

impl Label {
    pub const ALL: [Label; 6] = [
        Label::Abstract,
        Label::Sentence,
        Label::Entity,
        Label::Person,
        Label::TimeReference,
        Label::KeyWord,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Label::Abstract => "Abstract",
            Label::Sentence => "Sentence",
            Label::Entity => "Entity",
            Label::Person => "Person",
            Label::TimeReference => "TimeReference",
            Label::KeyWord => "KeyWord",
        }
    }

    /// Labels that carry `name`, `types` and `edges` and are unique by name.
    pub fn is_term(self) -> bool {
        matches!(
            self,
            Label::Entity | Label::Person | Label::TimeReference | Label::KeyWord
        )
    }

    /// Labels that may appear as CONTAINS targets and CC endpoints.
    pub fn is_entity_like(self) -> bool {
        matches!(self, Label::Entity | Label::Person | Label::TimeReference)
    }

    pub fn properties(self) -> &'static [&'static str] {
        match self {
            Label::Abstract => &["name", "text", "url", "citationCount", "sourceId"],
            Label::Sentence => &["name", "embeddings"],
            _ => &["name", "types", "edges"],
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Label {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Label::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| format!("unknown label `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeType {
    HasFirstAuthor,
    WasPublishedIn,
    HasKeyword,
    HasSentence,
    Contains,
    Cc,
}

impl EdgeType {
    pub const ALL: [EdgeType; 6] = [
        EdgeType::HasFirstAuthor,
        EdgeType::WasPublishedIn,
        EdgeType::HasKeyword,
        EdgeType::HasSentence,
        EdgeType::Contains,
        EdgeType::Cc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EdgeType::HasFirstAuthor => "HAS_FIRST_AUTHOR",
            EdgeType::WasPublishedIn => "WAS_PUBLISHED_IN",
            EdgeType::HasKeyword => "HAS_KEYWORD",
            EdgeType::HasSentence => "HAS_SENTENCE",
            EdgeType::Contains => "CONTAINS",
            EdgeType::Cc => "CC",
        }
    }

    /// Whether an edge of this type may run from `start` to `end`.
    pub fn allows(self, start: Label, end: Label) -> bool {
        match self {
            EdgeType::HasFirstAuthor => start == Label::Abstract && end == Label::Person,
            EdgeType::WasPublishedIn => start == Label::Abstract && end == Label::TimeReference,
            EdgeType::HasKeyword => start == Label::Abstract && end == Label::KeyWord,
            EdgeType::HasSentence => start == Label::Abstract && end == Label::Sentence,
            EdgeType::Contains => start == Label::Sentence && end.is_entity_like(),
            EdgeType::Cc => start.is_entity_like() && end.is_entity_like(),
        }
    }

    pub fn properties(self) -> &'static [&'static str] {
        match self {
            EdgeType::Cc => &["weight", "text"],
            _ => &[],
        }
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EdgeType {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        EdgeType::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown relationship type `{s}`"))
    }
}

/// Scalar view of a property, as seen by the query engine.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<f64>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Str(s) => f.write_str(s),
            Value::List(xs) => write!(f, "[{} values]", xs.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeProps {
    Abstract {
        name: String,
        text: String,
        url: String,
        citation_count: u64,
        source_id: String,
    },
    Sentence {
        name: String,
        embeddings: EmbeddingVector,
    },
    Term {
        name: String,
        types: Option<CategoryType>,
        edges: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub label: Label,
    pub props: NodeProps,
}

impl Node {
    pub fn name(&self) -> &str {
        match &self.props {
            NodeProps::Abstract { name, .. }
            | NodeProps::Sentence { name, .. }
            | NodeProps::Term { name, .. } => name,
        }
    }

    pub fn embedding(&self) -> Option<&EmbeddingVector> {
        match &self.props {
            NodeProps::Sentence { embeddings, .. } => Some(embeddings),
            _ => None,
        }
    }

    pub fn types(&self) -> Option<CategoryType> {
        match &self.props {
            NodeProps::Term { types, .. } => *types,
            _ => None,
        }
    }

    pub fn degree(&self) -> Option<u64> {
        match &self.props {
            NodeProps::Term { edges, .. } => Some(*edges),
            _ => None,
        }
    }

    pub fn url(&self) -> Option<&str> {
        match &self.props {
            NodeProps::Abstract { url, .. } => Some(url),
            _ => None,
        }
    }

    /// Property by its schema key; `None` when the label has no such key.
    pub fn property(&self, key: &str) -> Option<Value> {
        Some(match (&self.props, key) {
            (_, "name") => Value::Str(self.name().to_string()),
            (NodeProps::Abstract { text, .. }, "text") => Value::Str(text.clone()),
            (NodeProps::Abstract { url, .. }, "url") => Value::Str(url.clone()),
            (NodeProps::Abstract { citation_count, .. }, "citationCount") => {
                Value::Int(*citation_count as i64)
            }
            (NodeProps::Abstract { source_id, .. }, "sourceId") => Value::Str(source_id.clone()),
            (NodeProps::Sentence { embeddings, .. }, "embeddings") => {
                Value::List(embeddings.as_slice().iter().map(|&x| x as f64).collect())
            }
            (NodeProps::Term { types, .. }, "types") => match types {
                Some(t) => Value::Str(t.name().to_string()),
                None => Value::Null,
            },
            (NodeProps::Term { edges, .. }, "edges") => Value::Int(*edges as i64),
            _ => return None,
        })
    }

    fn properties_json(&self) -> Json {
        match &self.props {
            NodeProps::Abstract {
                name,
                text,
                url,
                citation_count,
                source_id,
            } => json!({
                "name": name, "text": text, "url": url,
                "citationCount": citation_count, "sourceId": source_id,
            }),
            NodeProps::Sentence { name, embeddings } => {
                json!({ "name": name, "embeddings": embeddings })
            }
            NodeProps::Term { name, types, edges } => {
                json!({ "name": name, "types": types, "edges": edges })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub ty: EdgeType,
    pub start: NodeId,
    pub end: NodeId,
    /// CC only: number of shared sentences.
    pub weight: u64,
    /// CC only: semantic predicate.
    pub text: Option<String>,
}

impl Edge {
    pub fn property(&self, key: &str) -> Option<Value> {
        match (self.ty, key) {
            (EdgeType::Cc, "weight") => Some(Value::Int(self.weight as i64)),
            (EdgeType::Cc, "text") => Some(self.text.clone().map_or(Value::Null, Value::Str)),
            _ => None,
        }
    }

    fn properties_json(&self) -> Json {
        match self.ty {
            EdgeType::Cc => json!({ "weight": self.weight, "text": self.text }),
            _ => json!({}),
        }
    }
}

/// Token-based, case-insensitive inverted index over Sentence nodes.
#[derive(Debug, Clone, Default)]
pub struct FullTextIndex {
    postings: HashMap<String, Vec<(NodeId, u32)>>,
    documents: usize,
}

impl FullTextIndex {
    pub fn add(&mut self, id: NodeId, text: &str) {
        let mut tf: BTreeMap<String, u32> = BTreeMap::new();
        for t in tokenize(text) {
            *tf.entry(t).or_insert(0) += 1;
        }
        for (t, n) in tf {
            self.postings.entry(t).or_default().push((id, n));
        }
        self.documents += 1;
    }

    pub fn documents(&self) -> usize {
        self.documents
    }

    pub fn document_frequency(&self, token: &str) -> usize {
        self.postings.get(token).map_or(0, Vec::len)
    }

    /// `score(d) = sum over query tokens of tf(t, d) * ln(1 + N / df(t))`,
    /// repeated query tokens counting repeatedly. Sorted by descending score,
    /// then node id.
    pub fn search(&self, query: &str, limit: Option<usize>) -> Vec<(NodeId, f64)> {
        let n = self.documents as f64;
        let mut scores: HashMap<NodeId, f64> = HashMap::new();
        for t in tokenize(query) {
            if let Some(posting) = self.postings.get(&t) {
                let idf = (1.0 + n / posting.len() as f64).ln();
                for &(id, tf) in posting {
                    *scores.entry(id).or_insert(0.0) += tf as f64 * idf;
                }
            }
        }
        let mut hits: Vec<(NodeId, f64)> = scores.into_iter().collect();
        hits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        if let Some(limit) = limit {
            hits.truncate(limit);
        }
        hits
    }
}

#[derive(Debug, Clone, Default)]
pub struct PropertyGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    terms: HashMap<(Label, String), NodeId>,
    edge_set: HashMap<(EdgeType, NodeId, NodeId), usize>,
    fulltext: FullTextIndex,
}

impl PartialEq for PropertyGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GraphCounts {
    pub nodes: usize,
    pub edges: usize,
    pub nodes_by_label: BTreeMap<String, usize>,
    pub edges_by_type: BTreeMap<String, usize>,
}

fn cc_key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    (a.min(b), a.max(b))
}

impl PropertyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn fulltext(&self) -> &FullTextIndex {
        &self.fulltext
    }

    pub fn out_edges(&self, id: NodeId) -> impl Iterator<Item = &Edge> {
        self.out_adj
            .get(id)
            .into_iter()
            .flatten()
            .map(move |&i| &self.edges[i])
    }

    pub fn in_edges(&self, id: NodeId) -> impl Iterator<Item = &Edge> {
        self.in_adj
            .get(id)
            .into_iter()
            .flatten()
            .map(move |&i| &self.edges[i])
    }

    /// Edge indices touching `id`, outgoing first.
    pub fn incident_edge_indices(&self, id: NodeId) -> impl Iterator<Item = usize> + '_ {
        self.out_adj
            .get(id)
            .into_iter()
            .flatten()
            .chain(self.in_adj.get(id).into_iter().flatten())
            .copied()
    }

    pub fn find(&self, label: Label, name: &str) -> Option<NodeId> {
        self.terms.get(&(label, name.to_string())).copied()
    }

    /// Entity-like node for a name under any of its possible labels.
    pub fn find_entity(&self, name: &str) -> Option<NodeId> {
        [Label::Entity, Label::Person, Label::TimeReference]
            .into_iter()
            .find_map(|l| self.find(l, name))
    }

    pub fn ids_with_label(&self, label: Label) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().filter(move |n| n.label == label).map(|n| n.id)
    }

    pub fn entity_like_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .filter(|n| n.label.is_entity_like())
            .map(|n| n.id)
    }

    fn push_node(&mut self, label: Label, props: NodeProps) -> NodeId {
        let id = self.nodes.len();
        if label == Label::Sentence {
            if let NodeProps::Sentence { name, .. } = &props {
                self.fulltext.add(id, name);
            }
        }
        self.nodes.push(Node { id, label, props });
        self.out_adj.push(Vec::new());
        self.in_adj.push(Vec::new());
        id
    }

    pub fn add_abstract(&mut self, record: &AbstractRecord) -> NodeId {
        self.push_node(
            Label::Abstract,
            NodeProps::Abstract {
                name: record.title.clone(),
                text: record.text.clone(),
                url: record.url.clone(),
                citation_count: record.citation_count,
                source_id: record.id.clone(),
            },
        )
    }

    /// Dimension shared by the sentence embeddings, if any sentence exists.
    pub fn embedding_dimension(&self) -> Option<usize> {
        self.nodes.iter().find_map(|n| n.embedding().map(EmbeddingVector::dimension))
    }

    pub fn add_sentence(&mut self, text: &str, embeddings: EmbeddingVector) -> Result<NodeId> {
        if let Some(dim) = self.embedding_dimension() {
            if dim != embeddings.dimension() {
                return Err(Error::DimensionMismatch {
                    left: embeddings.dimension(),
                    right: dim,
                });
            }
        }
        Ok(self.push_node(
            Label::Sentence,
            NodeProps::Sentence {
                name: text.to_string(),
                embeddings,
            },
        ))
    }

    /// Returns the node for `(label, name)`, creating it if absent.
    pub fn upsert_term(&mut self, label: Label, name: &str, types: Option<CategoryType>) -> Result<NodeId> {
        if !label.is_term() {
            return Err(Error::Graph(format!("{label} nodes are not unique by name")));
        }
        if name.trim().is_empty() {
            return Err(Error::Graph(format!("{label} name is empty")));
        }
        if let Some(id) = self.find(label, name) {
            return Ok(id);
        }
        let id = self.push_node(
            label,
            NodeProps::Term {
                name: name.to_string(),
                types,
                edges: 0,
            },
        );
        self.terms.insert((label, name.to_string()), id);
        Ok(id)
    }

    /// Label follows the category: Person and Time Reference entities get
    /// their own labels, everything else is an Entity.
    pub fn upsert_entity(&mut self, name: &str, category: CategoryType) -> Result<NodeId> {
        let label = match category {
            CategoryType::Person => Label::Person,
            CategoryType::TimeReference => Label::TimeReference,
            _ => Label::Entity,
        };
        self.upsert_term(label, name, Some(category))
    }

    fn check_endpoints(&self, ty: EdgeType, start: NodeId, end: NodeId) -> Result<()> {
        let (Some(s), Some(e)) = (self.node(start), self.node(end)) else {
            return Err(Error::Graph(format!(
                "{ty} edge {start}->{end} references a missing node"
            )));
        };
        if !ty.allows(s.label, e.label) {
            return Err(Error::Graph(format!(
                "{ty} cannot link {} `{}` to {} `{}`",
                s.label,
                s.name(),
                e.label,
                e.name()
            )));
        }
        Ok(())
    }

    fn push_edge(&mut self, edge: Edge) -> usize {
        let idx = self.edges.len();
        self.out_adj[edge.start].push(idx);
        self.in_adj[edge.end].push(idx);
        self.edge_set.insert((edge.ty, edge.start, edge.end), idx);
        self.edges.push(edge);
        idx
    }

    /// Adds a non-CC edge; adding an existing edge is a no-op.
    pub fn add_edge(&mut self, ty: EdgeType, start: NodeId, end: NodeId) -> Result<usize> {
        if ty == EdgeType::Cc {
            return Err(Error::Graph("CC edges are set with set_cc".into()));
        }
        self.check_endpoints(ty, start, end)?;
        if let Some(&idx) = self.edge_set.get(&(ty, start, end)) {
            return Ok(idx);
        }
        Ok(self.push_edge(Edge {
            ty,
            start,
            end,
            weight: 0,
            text: None,
        }))
    }

    pub fn cc_edge(&self, a: NodeId, b: NodeId) -> Option<&Edge> {
        let (s, e) = cc_key(a, b);
        self.edge_set
            .get(&(EdgeType::Cc, s, e))
            .map(|&i| &self.edges[i])
    }

    /// Creates or reweights the CC edge of an unordered pair, stored with the
    /// lower id first. Existing predicate text is kept.
    pub fn set_cc(&mut self, a: NodeId, b: NodeId, weight: u64) -> Result<usize> {
        if a == b {
            return Err(Error::Graph(format!("CC self-loop on node {a}")));
        }
        if weight == 0 {
            return Err(Error::Graph("CC weight must be positive".into()));
        }
        let (s, e) = cc_key(a, b);
        self.check_endpoints(EdgeType::Cc, s, e)?;
        if let Some(&idx) = self.edge_set.get(&(EdgeType::Cc, s, e)) {
            self.edges[idx].weight = weight;
            return Ok(idx);
        }
        Ok(self.push_edge(Edge {
            ty: EdgeType::Cc,
            start: s,
            end: e,
            weight,
            text: None,
        }))
    }

    pub fn set_cc_text(&mut self, a: NodeId, b: NodeId, text: Option<String>) -> Result<()> {
        let (s, e) = cc_key(a, b);
        let idx = *self
            .edge_set
            .get(&(EdgeType::Cc, s, e))
            .ok_or_else(|| Error::Graph(format!("no CC edge between {a} and {b}")))?;
        self.edges[idx].text = text;
        Ok(())
    }

    /// Removes the CC edge of a pair. Degrees are not touched until
    /// [`PropertyGraph::recompute_degrees`].
    pub fn remove_cc_edge(&mut self, a: NodeId, b: NodeId) -> bool {
        let (s, e) = cc_key(a, b);
        let Some(idx) = self.edge_set.get(&(EdgeType::Cc, s, e)).copied() else {
            return false;
        };
        self.edges.remove(idx);
        self.rebuild_edge_indices();
        true
    }

    fn rebuild_edge_indices(&mut self) {
        self.out_adj = vec![Vec::new(); self.nodes.len()];
        self.in_adj = vec![Vec::new(); self.nodes.len()];
        self.edge_set.clear();
        for (i, e) in self.edges.iter().enumerate() {
            self.out_adj[e.start].push(i);
            self.in_adj[e.end].push(i);
            self.edge_set.insert((e.ty, e.start, e.end), i);
        }
    }

    /// Number of CC edges incident to each node.
    pub fn cc_degrees(&self) -> Vec<u64> {
        let mut deg = vec![0u64; self.nodes.len()];
        for e in self.edges.iter().filter(|e| e.ty == EdgeType::Cc) {
            deg[e.start] += 1;
            deg[e.end] += 1;
        }
        deg
    }

    /// Sets every term node's `edges` to its CC degree.
    pub fn recompute_degrees(&mut self) {
        let deg = self.cc_degrees();
        for n in &mut self.nodes {
            if let NodeProps::Term { edges, .. } = &mut n.props {
                *edges = deg[n.id];
            }
        }
    }

    pub fn fulltext_search(&self, query: &str, limit: Option<usize>) -> Vec<(NodeId, f64)> {
        self.fulltext.search(query, limit)
    }

    pub fn sentence_abstract(&self, sentence: NodeId) -> Option<NodeId> {
        self.in_edges(sentence)
            .find(|e| e.ty == EdgeType::HasSentence)
            .map(|e| e.start)
    }

    pub fn abstract_sentences(&self, abstract_id: NodeId) -> Vec<NodeId> {
        self.out_edges(abstract_id)
            .filter(|e| e.ty == EdgeType::HasSentence)
            .map(|e| e.end)
            .collect()
    }

    pub fn sentence_entities(&self, sentence: NodeId) -> Vec<NodeId> {
        self.out_edges(sentence)
            .filter(|e| e.ty == EdgeType::Contains)
            .map(|e| e.end)
            .collect()
    }

    pub fn entity_sentences(&self, entity: NodeId) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = self
            .in_edges(entity)
            .filter(|e| e.ty == EdgeType::Contains)
            .map(|e| e.start)
            .collect();
        v.sort_unstable();
        v
    }

    pub fn counts(&self) -> GraphCounts {
        let mut c = GraphCounts {
            nodes: self.nodes.len(),
            edges: self.edges.len(),
            ..Default::default()
        };
        for n in &self.nodes {
            *c.nodes_by_label.entry(n.label.name().into()).or_insert(0) += 1;
        }
        for e in &self.edges {
            *c.edges_by_type.entry(e.ty.name().into()).or_insert(0) += 1;
        }
        c
    }

    /// Full scan of the schema rules. Returns every violation found.
    pub fn validate_schema(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let mut seen_terms: HashSet<(Label, &str)> = HashSet::new();
        let mut dim = None;
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                problems.push(format!("node at position {i} has id {}", n.id));
            }
            let shape_ok = matches!(
                (n.label, &n.props),
                (Label::Abstract, NodeProps::Abstract { .. })
                    | (Label::Sentence, NodeProps::Sentence { .. })
                    | (
                        Label::Entity | Label::Person | Label::TimeReference | Label::KeyWord,
                        NodeProps::Term { .. }
                    )
            );
            if !shape_ok {
                problems.push(format!("node {i} has properties of the wrong label"));
            }
            if n.label.is_term() && !seen_terms.insert((n.label, n.name())) {
                problems.push(format!("duplicate {} node `{}`", n.label, n.name()));
            }
            if let Some(e) = n.embedding() {
                match dim {
                    None => dim = Some(e.dimension()),
                    Some(d) if d != e.dimension() => {
                        problems.push(format!("sentence {i} has embedding dimension {}", e.dimension()))
                    }
                    _ => {}
                }
            }
        }
        let mut cc_pairs = HashSet::new();
        for (i, e) in self.edges.iter().enumerate() {
            let (Some(s), Some(t)) = (self.node(e.start), self.node(e.end)) else {
                problems.push(format!("edge {i} ({}) has a dangling endpoint", e.ty));
                continue;
            };
            if !e.ty.allows(s.label, t.label) {
                problems.push(format!("edge {i}: {} from {} to {}", e.ty, s.label, t.label));
            }
            if e.ty == EdgeType::Cc {
                if e.start >= e.end {
                    problems.push(format!("CC edge {i} is not stored lower id first"));
                }
                if e.weight == 0 {
                    problems.push(format!("CC edge {i} has zero weight"));
                }
                if !cc_pairs.insert(cc_key(e.start, e.end)) {
                    problems.push(format!("duplicate CC edge between {} and {}", e.start, e.end));
                }
            } else if e.weight != 0 || e.text.is_some() {
                problems.push(format!("{} edge {i} carries CC properties", e.ty));
            }
        }
        let deg = self.cc_degrees();
        for n in &self.nodes {
            if let Some(d) = n.degree() {
                if d != deg[n.id] {
                    problems.push(format!(
                        "{} `{}` has edges={d} but CC degree {}",
                        n.label,
                        n.name(),
                        deg[n.id]
                    ));
                }
            }
        }
        problems
    }

    /// Schema description embedded in query-generation prompts.
    pub fn schema_text() -> String {
        let mut s = String::from("Node labels and properties:\n");
        for l in Label::ALL {
            s.push_str(&format!("- {}: {}\n", l.name(), l.properties().join(", ")));
        }
        s.push_str("Relationship types:\n");
        let endpoints = [
            (EdgeType::HasFirstAuthor, "Abstract", "Person"),
            (EdgeType::WasPublishedIn, "Abstract", "TimeReference"),
            (EdgeType::HasKeyword, "Abstract", "KeyWord"),
            (EdgeType::HasSentence, "Abstract", "Sentence"),
            (EdgeType::Contains, "Sentence", "Entity"),
            (EdgeType::Cc, "Entity", "Entity"),
        ];
        for (t, a, b) in endpoints {
            let props = t.properties();
            if props.is_empty() {
                s.push_str(&format!("- (:{a})-[:{}]->(:{b})\n", t.name()));
            } else {
                s.push_str(&format!(
                    "- (:{a})-[:{} {{{}}}]->(:{b})\n",
                    t.name(),
                    props.join(", ")
                ));
            }
        }
        s.push_str("Full-text index `sentences` over Sentence.name.\n");
        s
    }

    /// Serializes the snapshot as JSON Lines.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header = json!({
            "version": SNAPSHOT_VERSION,
            "node_count": self.nodes.len(),
            "edge_count": self.edges.len(),
        });
        writeln!(w, "{header}")?;
        for n in &self.nodes {
            let line = json!({ "id": n.id, "label": n.label.name(), "properties": n.properties_json() });
            writeln!(w, "{line}")?;
        }
        for e in &self.edges {
            let line = json!({
                "type": e.ty.name(), "start": e.start, "end": e.end,
                "properties": e.properties_json(),
            });
            writeln!(w, "{line}")?;
        }
        w.flush()
    }

    /// Writes the snapshot next to `path` and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
        {
            let w = std::io::BufWriter::new(tmp.as_file_mut());
            self.write_jsonl(w).map_err(|e| Error::io(path, e))?;
        }
        tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
        Ok(())
    }

    /// Loads a snapshot; any defect fails the whole load.
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_jsonl(std::io::BufReader::new(file), path)
    }

    pub fn read_jsonl<R: BufRead>(reader: R, path: &Path) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Malformed {
            path: path.into(),
            line,
            message,
        };
        let mut lines = reader.lines().enumerate();
        let Some((_, header)) = lines.next() else {
            return Ok(PropertyGraph::new());
        };
        let header = header.map_err(|e| Error::io(path, e))?;
        let header: Json = serde_json::from_str(&header).map_err(|e| bad(1, e.to_string()))?;
        let version = header["version"]
            .as_u64()
            .ok_or_else(|| bad(1, "header lacks version".into()))? as u32;
        if version != SNAPSHOT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: SNAPSHOT_VERSION,
            });
        }
        let count = |k: &str| {
            header[k]
                .as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| bad(1, format!("header lacks {k}")))
        };
        let (node_count, edge_count) = (count("node_count")?, count("edge_count")?);

        let mut g = PropertyGraph::new();
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let v: Json = serde_json::from_str(&line).map_err(|e| bad(lineno, e.to_string()))?;
            if v.get("label").is_some() {
                if !g.edges.is_empty() {
                    return Err(bad(lineno, "node line after edge lines".into()));
                }
                let (label, props) = parse_node(&v).map_err(|m| bad(lineno, m))?;
                if v["id"].as_u64() != Some(g.nodes.len() as u64) {
                    return Err(bad(lineno, "node ids must be contiguous from 0".into()));
                }
                let id = g.push_node(label, props);
                if label.is_term() {
                    let name = g.nodes[id].name().to_string();
                    if g.terms.insert((label, name.clone()), id).is_some() {
                        return Err(bad(lineno, format!("duplicate {label} `{name}`")));
                    }
                }
            } else {
                let edge = parse_edge(&v).map_err(|m| bad(lineno, m))?;
                g.check_endpoints(edge.ty, edge.start, edge.end)
                    .map_err(|e| bad(lineno, e.to_string()))?;
                if g.edge_set.contains_key(&(edge.ty, edge.start, edge.end)) {
                    return Err(bad(lineno, "duplicate edge".into()));
                }
                g.push_edge(edge);
            }
        }
        if g.nodes.len() != node_count || g.edges.len() != edge_count {
            return Err(bad(
                1,
                format!(
                    "header announces {node_count} nodes and {edge_count} edges, file has {} and {}",
                    g.nodes.len(),
                    g.edges.len()
                ),
            ));
        }
        Ok(g)
    }
}

fn str_prop(p: &Map<String, Json>, k: &str) -> std::result::Result<String, String> {
    p.get(k)
        .and_then(Json::as_str)
        .map(str::to_string)
        .ok_or_else(|| format!("missing string property `{k}`"))
}

fn u64_prop(p: &Map<String, Json>, k: &str) -> std::result::Result<u64, String> {
    p.get(k)
        .and_then(Json::as_u64)
        .ok_or_else(|| format!("missing integer property `{k}`"))
}

fn parse_node(v: &Json) -> std::result::Result<(Label, NodeProps), String> {
    let label: Label = v["label"].as_str().ok_or("label is not a string")?.parse()?;
    let p = v["properties"].as_object().ok_or("missing properties")?;
    let props = match label {
        Label::Abstract => NodeProps::Abstract {
            name: str_prop(p, "name")?,
            text: str_prop(p, "text")?,
            url: str_prop(p, "url")?,
            citation_count: u64_prop(p, "citationCount")?,
            source_id: str_prop(p, "sourceId")?,
        },
        Label::Sentence => {
            let raw = p
                .get("embeddings")
                .and_then(Json::as_array)
                .ok_or("missing embeddings")?;
            let comps = raw
                .iter()
                .map(|x| x.as_f64().map(|f| f as f32))
                .collect::<Option<Vec<f32>>>()
                .ok_or("non-numeric embedding component")?;
            NodeProps::Sentence {
                name: str_prop(p, "name")?,
                embeddings: EmbeddingVector::from_raw(comps),
            }
        }
        _ => NodeProps::Term {
            name: str_prop(p, "name")?,
            types: match p.get("types") {
                None | Some(Json::Null) => None,
                Some(t) => Some(
                    serde_json::from_value(t.clone()).map_err(|e| format!("bad types: {e}"))?,
                ),
            },
            edges: u64_prop(p, "edges")?,
        },
    };
    Ok((label, props))
}

fn parse_edge(v: &Json) -> std::result::Result<Edge, String> {
    let ty: EdgeType = v["type"].as_str().ok_or("edge type is not a string")?.parse()?;
    let start = v["start"].as_u64().ok_or("missing start")? as usize;
    let end = v["end"].as_u64().ok_or("missing end")? as usize;
    let p = v["properties"].as_object().ok_or("missing properties")?;
    let (weight, text) = if ty == EdgeType::Cc {
        let w = u64_prop(p, "weight")?;
        if w == 0 {
            return Err("CC weight must be positive".into());
        }
        let text = match p.get("text") {
            None | Some(Json::Null) => None,
            Some(Json::String(s)) => Some(s.clone()),
            Some(_) => return Err("CC text must be a string".into()),
        };
        (w, text)
    } else {
        (0, None)
    };
    Ok(Edge {
        ty,
        start,
        end,
        weight,
        text,
    })
}

/// Materializes records, sentences and resolved entities. CC edges are
/// added separately by the relations stage.
pub fn build_graph(
    records: &[AbstractRecord],
    sentences: &[SentenceUnit],
    entities: &[ResolvedEntity],
    embedder: &dyn Embedder,
) -> Result<PropertyGraph> {
    let known: HashSet<&str> = records.iter().map(|r| r.id.as_str()).collect();
    if let Some(s) = sentences.iter().find(|s| !known.contains(s.abstract_id.as_str())) {
        return Err(Error::Graph(format!(
            "sentence {}#{} references unknown abstract `{}`",
            s.abstract_id, s.index, s.abstract_id
        )));
    }
    let embeddings: Vec<Result<EmbeddingVector>> = sentences
        .par_iter()
        .map(|s| embedder.embed(&s.text).map_err(|e| e.for_record(&s.abstract_id)))
        .collect();
    let mut by_record: HashMap<&str, Vec<(usize, &SentenceUnit)>> = HashMap::new();
    for (i, s) in sentences.iter().enumerate() {
        by_record.entry(s.abstract_id.as_str()).or_default().push((i, s));
    }
    let mut embeddings: Vec<Option<EmbeddingVector>> = embeddings
        .into_iter()
        .map(|r| r.map(Some))
        .collect::<Result<_>>()?;

    let mut g = PropertyGraph::new();
    let mut sentence_nodes: HashMap<(&str, usize), NodeId> = HashMap::new();
    for r in records {
        let a = g.add_abstract(r);
        if !r.first_author.trim().is_empty() {
            let p = g.upsert_term(Label::Person, r.first_author.trim(), Some(CategoryType::Person))?;
            g.add_edge(EdgeType::HasFirstAuthor, a, p)?;
        }
        let t = g.upsert_term(
            Label::TimeReference,
            &r.year.to_string(),
            Some(CategoryType::TimeReference),
        )?;
        g.add_edge(EdgeType::WasPublishedIn, a, t)?;
        for k in &r.keywords {
            if k.trim().is_empty() {
                continue;
            }
            let kw = g.upsert_term(Label::KeyWord, k.trim(), None)?;
            g.add_edge(EdgeType::HasKeyword, a, kw)?;
        }
        let mut units = by_record.remove(r.id.as_str()).unwrap_or_default();
        units.sort_by_key(|(_, s)| s.index);
        for (i, s) in units {
            let emb = embeddings[i].take().expect("each sentence embedded once");
            let sid = g.add_sentence(&s.text, emb)?;
            g.add_edge(EdgeType::HasSentence, a, sid)?;
            if sentence_nodes.insert((s.abstract_id.as_str(), s.index), sid).is_some() {
                return Err(Error::Graph(format!(
                    "sentence {}#{} appears twice",
                    s.abstract_id, s.index
                )));
            }
        }
    }
    for ent in entities {
        let id = g
            .upsert_entity(&ent.canonical, ent.category)
            .map_err(|e| Error::Graph(format!("entity `{}`: {e}", ent.canonical)))?;
        for (abstract_id, index) in &ent.sources {
            let sid = sentence_nodes
                .get(&(abstract_id.as_str(), *index))
                .ok_or_else(|| {
                    Error::Graph(format!(
                        "entity `{}` references missing sentence {abstract_id}#{index}",
                        ent.canonical
                    ))
                })?;
            g.add_edge(EdgeType::Contains, *sid, id)?;
        }
    }
    Ok(g)
}
