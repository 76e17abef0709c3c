//! Graph-augmented question answering: entity extraction, query generation,
//! retrieval, similarity ranking, triplet filtering and grounded answers.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use crate::cypher::{self, Cell, Expr};
use crate::embedding::{similarity, Embedder};
use crate::error::{Error, Result};
use crate::graph::{EdgeType, Label, NodeId, PropertyGraph};
use crate::llm::{Document, Gateway, PromptContext, StructuredReply};
use crate::resolution::normalize_surface;
use crate::text::{content_tokens, lemmatize};

/// Sentences passed to the answer prompt.
pub const PROMPT_SENTENCES: usize = 6;
/// Triplets passed to the answer prompt.
pub const PROMPT_TRIPLETS: usize = 10;
pub const NO_DOCUMENTS: &str = "No supporting documents were found in the knowledge graph for this question.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetrievalRequest {
    pub question: String,
    pub k: usize,
}

impl RetrievalRequest {
    pub fn new(question: impl Into<String>, k: usize) -> Result<Self> {
        let question = question.into();
        if question.trim().is_empty() {
            return Err(Error::Precondition("question is empty".into()));
        }
        if k == 0 {
            return Err(Error::Precondition("k must be at least 1".into()));
        }
        Ok(RetrievalRequest { question, k })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankedHit {
    pub sentence: NodeId,
    pub abstract_node: NodeId,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryOrigin {
    Generated,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Retrieval {
    pub entities: Vec<String>,
    /// The query that produced the candidates.
    pub query: String,
    pub origin: QueryOrigin,
    /// Hits follow the query's own ORDER BY instead of similarity.
    pub ordered_by_query: bool,
    pub hits: Vec<RankedHit>,
}

/// Entities named in the question, normalized without the in-text check.
/// Falls back to the question's content tokens when the provider fails.
pub fn extract_query_entities(question: &str, gateway: &Gateway) -> Vec<String> {
    let ctx = PromptContext::Ner {
        sentence: question.to_string(),
    };
    let surfaces: Vec<String> = match gateway.ask(&ctx) {
        Ok(StructuredReply::Entities(pairs)) => pairs.into_iter().map(|(s, _)| s).collect(),
        Ok(other) => {
            log::warn!("entity extraction returned a {} reply; using content words", other.kind());
            return dedup(content_tokens(question));
        }
        Err(e) => {
            log::warn!("entity extraction failed ({e}); using content words");
            return dedup(content_tokens(question));
        }
    };
    dedup(
        surfaces
            .iter()
            .filter_map(|s| normalize_surface(s, None).canonical())
            .collect(),
    )
}

fn dedup(items: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    items.into_iter().filter(|s| seen.insert(s.clone())).collect()
}

/// Candidate sentences in result order, each with the row of its first
/// appearance. Abstract cells contribute all of their sentences.
fn candidates_from_table(graph: &PropertyGraph, table: &cypher::ResultTable) -> Vec<(NodeId, usize)> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (row, cells) in table.rows.iter().enumerate() {
        for cell in cells {
            let Cell::Node { id, label, .. } = cell else {
                continue;
            };
            let sentences = match label {
                Label::Sentence => vec![*id],
                Label::Abstract => graph.abstract_sentences(*id),
                _ => continue,
            };
            for s in sentences {
                if seen.insert(s) {
                    out.push((s, row));
                }
            }
        }
    }
    out
}

fn generated_query(question: &str, gateway: &Gateway) -> Result<cypher::Query> {
    let ctx = PromptContext::CypherGeneration {
        question: question.to_string(),
        schema: PropertyGraph::schema_text(),
    };
    match gateway.ask(&ctx)? {
        StructuredReply::Query(text) => Ok(cypher::parse_validated(&text)?),
        other => Err(Error::Provider(format!("expected a query, got a {} reply", other.kind()))),
    }
}

fn fallback_query(entities: &[String]) -> cypher::Query {
    let text = format!(
        "CALL fulltext('{}', {}) YIELD node, score RETURN node, score",
        cypher::FULLTEXT_INDEX,
        cypher::Literal::Str(entities.join(" "))
    );
    cypher::parse(&text).expect("fallback query is well formed")
}

/// Runs the generated query (or the fulltext fallback), then scores every
/// candidate sentence by its scalar product with the question embedding.
/// Hits are sorted by descending score and node id, unless the query orders
/// its rows by something other than the fulltext score.
pub fn retrieve(
    request: &RetrievalRequest,
    graph: &PropertyGraph,
    gateway: &Gateway,
    embedder: &dyn Embedder,
) -> Result<Retrieval> {
    let entities = extract_query_entities(&request.question, gateway);
    let generated = match generated_query(&request.question, gateway) {
        Ok(q) => match cypher::execute(&q, graph) {
            Ok(table) => {
                let c = candidates_from_table(graph, &table);
                if c.is_empty() {
                    log::info!("generated query returned no sentences; falling back to fulltext");
                    None
                } else {
                    Some((q, c))
                }
            }
            Err(e) => {
                log::warn!("generated query failed ({e}); falling back to fulltext");
                None
            }
        },
        Err(e) => {
            log::warn!("query generation failed ({e}); falling back to fulltext");
            None
        }
    };
    let (query, origin, candidates) = match generated {
        Some((q, c)) => (q, QueryOrigin::Generated, c),
        None => {
            let q = fallback_query(&entities);
            let table = cypher::execute(&q, graph)?;
            let c = candidates_from_table(graph, &table);
            (q, QueryOrigin::Fallback, c)
        }
    };
    let score_var = query.fulltext.as_ref().map(|f| f.score_var.as_str());
    let ordered_by_query = query
        .order_by
        .as_ref()
        .is_some_and(|o| !matches!(&o.expr, Expr::Var(v) if Some(v.as_str()) == score_var));

    let mut hits = Vec::with_capacity(candidates.len());
    let mut rows = HashMap::new();
    if !candidates.is_empty() {
        let q = embedder.embed(&request.question)?;
        for (s, row) in candidates {
            let node = graph
                .node(s)
                .ok_or_else(|| Error::Graph(format!("no node {s}")))?;
            let emb = node
                .embedding()
                .ok_or_else(|| Error::Graph(format!("sentence {s} has no embedding")))?;
            let abstract_node = graph
                .sentence_abstract(s)
                .ok_or_else(|| Error::Graph(format!("sentence {s} has no abstract")))?;
            hits.push(RankedHit {
                sentence: s,
                abstract_node,
                score: similarity(q.as_slice(), emb.as_slice())?,
            });
            rows.insert(s, row);
        }
    }
    let by_score = |a: &RankedHit, b: &RankedHit| b.score.total_cmp(&a.score).then(a.sentence.cmp(&b.sentence));
    if ordered_by_query {
        hits.sort_by(|a, b| rows[&a.sentence].cmp(&rows[&b.sentence]).then_with(|| by_score(a, b)));
    } else {
        hits.sort_by(by_score);
    }
    Ok(Retrieval {
        entities,
        query: query.to_string(),
        origin,
        ordered_by_query,
        hits,
    })
}

/// Distinct parent abstracts in first-hit order, at most `k`.
pub fn select_top_abstracts(hits: &[RankedHit], k: usize) -> Vec<NodeId> {
    let mut out = Vec::new();
    for h in hits {
        if out.len() == k {
            break;
        }
        if !out.contains(&h.abstract_node) {
            out.push(h.abstract_node);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct TripletRef {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl From<(String, String, String)> for TripletRef {
    fn from((subject, predicate, object): (String, String, String)) -> Self {
        TripletRef {
            subject,
            predicate,
            object,
        }
    }
}

/// Keeps triplets whose subject or object is a query entity, or whose
/// predicate shares a lemma with a content word of the question. When nothing
/// is kept, returns every triplet by descending occurrence of its endpoints.
pub fn filter_triplets<F>(
    triplets: &[TripletRef],
    entities: &[String],
    question: &str,
    occurrences: F,
) -> Vec<TripletRef>
where
    F: Fn(&str) -> u64,
{
    let wanted: HashSet<String> = entities.iter().map(|e| e.to_lowercase()).collect();
    let question_lemmas: HashSet<String> = content_tokens(question).iter().map(|t| lemmatize(t)).collect();
    let kept: Vec<TripletRef> = triplets
        .iter()
        .filter(|t| {
            wanted.contains(&t.subject.to_lowercase())
                || wanted.contains(&t.object.to_lowercase())
                || content_tokens(&t.predicate)
                    .iter()
                    .any(|w| question_lemmas.contains(&lemmatize(w)))
        })
        .cloned()
        .collect();
    if !kept.is_empty() {
        return kept;
    }
    let mut all = triplets.to_vec();
    all.sort_by_cached_key(|t| std::cmp::Reverse(occurrences(&t.subject) + occurrences(&t.object)));
    all
}

/// Sentences mentioning an entity-like node of that name.
pub fn entity_occurrences(graph: &PropertyGraph, name: &str) -> u64 {
    graph.find_entity(name).map_or(0, |id| {
        graph
            .in_edges(id)
            .filter(|e| e.ty == EdgeType::Contains)
            .count() as u64
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Source {
    pub title: String,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HitRef {
    pub abstract_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Answer {
    #[serde(rename = "answer")]
    pub text: String,
    pub sources: Vec<Source>,
    pub triplets: Vec<TripletRef>,
    pub hits: Vec<HitRef>,
    #[serde(skip)]
    pub retrieval: Option<Retrieval>,
}

impl Answer {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("answer serializes")
    }
}

fn abstract_field(graph: &PropertyGraph, id: NodeId, key: &str) -> String {
    graph
        .node(id)
        .and_then(|n| n.property(key))
        .map(|v| v.to_string())
        .unwrap_or_default()
}

/// Retrieves, selects the top-k abstracts and asks for a grounded answer.
/// Sources are taken from the retrieved abstracts, never from the provider.
pub fn answer(
    request: &RetrievalRequest,
    graph: &PropertyGraph,
    gateway: &Gateway,
    embedder: &dyn Embedder,
) -> Result<Answer> {
    let retrieval = retrieve(request, graph, gateway, embedder)?;
    let hits: Vec<HitRef> = retrieval
        .hits
        .iter()
        .map(|h| HitRef {
            abstract_id: abstract_field(graph, h.abstract_node, "sourceId"),
            score: h.score,
        })
        .collect();
    if retrieval.hits.is_empty() {
        return Ok(Answer {
            text: NO_DOCUMENTS.to_string(),
            sources: vec![],
            triplets: vec![],
            hits,
            retrieval: Some(retrieval),
        });
    }
    let top = select_top_abstracts(&retrieval.hits, request.k);
    let sources: Vec<Source> = top
        .iter()
        .map(|&a| Source {
            title: abstract_field(graph, a, "name"),
            url: abstract_field(graph, a, "url"),
        })
        .collect();
    let documents: Vec<Document> = top
        .iter()
        .map(|&a| Document {
            title: abstract_field(graph, a, "name"),
            url: abstract_field(graph, a, "url"),
            text: abstract_field(graph, a, "text"),
        })
        .collect();
    let sentences: Vec<String> = retrieval
        .hits
        .iter()
        .filter(|h| top.contains(&h.abstract_node))
        .take(PROMPT_SENTENCES)
        .map(|h| graph.node(h.sentence).map_or_else(String::new, |n| n.name().to_string()))
        .collect();
    let all: Vec<TripletRef> = crate::relations::graph_triplets(graph)
        .into_iter()
        .map(TripletRef::from)
        .collect();
    let mut triplets = filter_triplets(&all, &retrieval.entities, &request.question, |name| {
        entity_occurrences(graph, name)
    });
    triplets.truncate(PROMPT_TRIPLETS);

    let ctx = PromptContext::AnswerGeneration {
        question: request.question.clone(),
        documents,
        sentences: sentences.clone(),
        triplets: triplets
            .iter()
            .map(|t| (t.subject.clone(), t.predicate.clone(), t.object.clone()))
            .collect(),
    };
    let mut answer = Answer {
        text: String::new(),
        sources,
        triplets,
        hits,
        retrieval: Some(retrieval),
    };
    match gateway.ask(&ctx) {
        Ok(StructuredReply::Answer(text)) => {
            answer.text = text;
            Ok(answer)
        }
        Ok(other) => {
            answer.text = sentences.join(" ");
            Err(Error::Generation {
                source: Box::new(Error::Provider(format!(
                    "expected an answer, got a {} reply",
                    other.kind()
                ))),
                partial: Box::new(answer),
            })
        }
        Err(e) => {
            answer.text = sentences.join(" ");
            Err(Error::Generation {
                source: Box::new(e),
                partial: Box::new(answer),
            })
        }
    }
}
