//! Co-occurrence (CC) edges and LLM relation extraction for statistically
//! selected entity pairs.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::{similarity, Embedder};
use crate::error::{Error, Result};
use crate::graph::{EdgeType, NodeId, PropertyGraph};
use crate::llm::{Gateway, PromptContext, StructuredReply};
use crate::ner::write_jsonl;

pub const DEFAULT_PERCENTILE: f64 = 99.7;
pub const DEFAULT_SENTENCES_PER_PAIR: usize = 6;

/// Recounts CC edges from CONTAINS edges: one edge per unordered entity
/// pair sharing a sentence, weighted by the number of shared sentences.
/// Predicate text on surviving edges is kept. Degrees are refreshed.
pub fn build_cc_edges(graph: &mut PropertyGraph) -> Result<usize> {
    let mut counts: BTreeMap<(NodeId, NodeId), u64> = BTreeMap::new();
    let sentences: Vec<NodeId> = graph.ids_with_label(crate::graph::Label::Sentence).collect();
    for s in sentences {
        let mut ents = graph.sentence_entities(s);
        ents.sort_unstable();
        ents.dedup();
        for i in 0..ents.len() {
            for j in i + 1..ents.len() {
                *counts.entry((ents[i], ents[j])).or_insert(0) += 1;
            }
        }
    }
    let stale: Vec<(NodeId, NodeId)> = graph
        .edges()
        .iter()
        .filter(|e| e.ty == EdgeType::Cc && !counts.contains_key(&(e.start, e.end)))
        .map(|e| (e.start, e.end))
        .collect();
    for (a, b) in stale {
        graph.remove_cc_edge(a, b);
    }
    for (&(a, b), &w) in &counts {
        graph.set_cc(a, b, w)?;
    }
    graph.recompute_degrees();
    Ok(counts.len())
}

/// How the degree threshold's spread term is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeSpread {
    /// `sigma / sqrt(N)`
    #[default]
    StandardError,
    /// `sigma`
    StandardDeviation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateSettings {
    pub percentile: f64,
    pub spread: DegreeSpread,
    /// Multiplier of the spread term.
    pub sigmas: f64,
}

impl Default for CandidateSettings {
    fn default() -> Self {
        CandidateSettings {
            percentile: DEFAULT_PERCENTILE,
            spread: DegreeSpread::StandardError,
            sigmas: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct PairCandidate {
    /// Recurrent node.
    pub n: NodeId,
    pub p: NodeId,
    pub cc_weight: u64,
}

/// Nearest-rank percentile: the smallest value whose rank reaches
/// `ceil(P / 100 * N)` in ascending order. The percentile is taken in
/// millionths of a percent so the rank is computed exactly.
pub fn nearest_rank_percentile(values: &[u64], percentile: f64) -> Option<u64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as u128;
    let ppm = (percentile.clamp(0.0, 100.0) * 1e6).round() as u128;
    let rank = (ppm * n).div_ceil(100_000_000).clamp(1, n) as usize;
    Some(sorted[rank - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub weight: u64,
    pub degree: f64,
}

/// `w*` over all CC weights and `d* = mean + k * spread` over the CC degrees
/// of every entity-like node (population standard deviation).
pub fn thresholds(graph: &PropertyGraph, settings: &CandidateSettings) -> Option<Thresholds> {
    let weights: Vec<u64> = graph
        .edges()
        .iter()
        .filter(|e| e.ty == EdgeType::Cc)
        .map(|e| e.weight)
        .collect();
    let deg = graph.cc_degrees();
    let degrees: Vec<f64> = graph.entity_like_ids().map(|i| deg[i] as f64).collect();
    if degrees.len() < 2 {
        return None;
    }
    let w = nearest_rank_percentile(&weights, settings.percentile)?;
    let n = degrees.len() as f64;
    let mean = degrees.iter().sum::<f64>() / n;
    let var = degrees.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    let sigma = var.sqrt();
    let spread = match settings.spread {
        DegreeSpread::StandardError => sigma / n.sqrt(),
        DegreeSpread::StandardDeviation => sigma,
    };
    Some(Thresholds {
        weight: w,
        degree: mean + settings.sigmas * spread,
    })
}

/// Ordered pairs `(n, p)` joined by a CC edge with `weight >= w*` and
/// `degree(n) > d*`. Sorted by descending weight, then `n`, then `p`.
pub fn select_semantic_candidates(graph: &PropertyGraph, settings: &CandidateSettings) -> Vec<PairCandidate> {
    let Some(t) = thresholds(graph, settings) else {
        return Vec::new();
    };
    let deg = graph.cc_degrees();
    let mut out = Vec::new();
    for e in graph.edges().iter().filter(|e| e.ty == EdgeType::Cc) {
        if e.weight < t.weight {
            continue;
        }
        for (n, p) in [(e.start, e.end), (e.end, e.start)] {
            if deg[n] as f64 > t.degree {
                out.push(PairCandidate {
                    n,
                    p,
                    cc_weight: e.weight,
                });
            }
        }
    }
    out.sort_by(|a, b| b.cc_weight.cmp(&a.cc_weight).then(a.n.cmp(&b.n)).then(a.p.cmp(&b.p)));
    out
}

/// Sentences containing both entities, ranked by similarity to the
/// embedding of `"subject object"`, ties by node id; at most `k`.
pub fn top_sentences_for_pair(
    graph: &PropertyGraph,
    subject: NodeId,
    object: NodeId,
    k: usize,
    embedder: &dyn Embedder,
) -> Result<Vec<(NodeId, f64)>> {
    let name = |id: NodeId| {
        graph
            .node(id)
            .map(|n| n.name().to_string())
            .ok_or_else(|| Error::Graph(format!("no node {id}")))
    };
    let query = embedder.embed(&format!("{} {}", name(subject)?, name(object)?))?;
    let other: HashSet<NodeId> = graph.entity_sentences(object).into_iter().collect();
    let mut scored = Vec::new();
    for s in graph.entity_sentences(subject) {
        if !other.contains(&s) {
            continue;
        }
        let emb = graph.node(s).and_then(|n| n.embedding()).expect("sentence has embedding");
        scored.push((s, similarity(query.as_slice(), emb.as_slice())?));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub subject: String,
    pub predicate: String,
    pub object: String,
    pub weight: u64,
    /// Sentence node ids sent to the provider.
    pub support: Vec<NodeId>,
}

/// Asks the provider for the predicate linking `subject` to `object`.
/// Unparseable replies yield `None`.
pub fn request_relation(
    graph: &PropertyGraph,
    subject: NodeId,
    object: NodeId,
    sentences: &[NodeId],
    gateway: &Gateway,
) -> Result<Option<Triplet>> {
    if sentences.is_empty() {
        return Err(Error::Precondition("relation extraction needs sentences".into()));
    }
    let node = |id| graph.node(id).ok_or_else(|| Error::Graph(format!("no node {id}")));
    let (s, o) = (node(subject)?.name().to_string(), node(object)?.name().to_string());
    let texts = sentences
        .iter()
        .map(|&id| node(id).map(|n| n.name().to_string()))
        .collect::<Result<Vec<_>>>()?;
    let ctx = PromptContext::RelationExtraction {
        subject: s.clone(),
        object: o.clone(),
        sentences: texts,
    };
    match gateway.ask(&ctx) {
        Ok(StructuredReply::Relation { predicate, .. }) => Ok(Some(Triplet {
            subject: s,
            predicate,
            object: o,
            weight: graph.cc_edge(subject, object).map_or(0, |e| e.weight),
            support: sentences.to_vec(),
        })),
        Ok(other) => {
            log::warn!("pair ({s}, {o}) skipped: unexpected {} reply", other.kind());
            Ok(None)
        }
        Err(e @ Error::Reply { .. }) => {
            log::warn!("pair ({s}, {o}) skipped: {e}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Extracts the relation and stores the predicate on the pair's CC edge.
pub fn extract_relation(
    graph: &mut PropertyGraph,
    subject: NodeId,
    object: NodeId,
    sentences: &[NodeId],
    gateway: &Gateway,
) -> Result<Option<Triplet>> {
    let t = request_relation(graph, subject, object, sentences, gateway)?;
    if let Some(t) = &t {
        graph.set_cc_text(subject, object, Some(t.predicate.clone()))?;
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnrichReport {
    pub thresholds: Option<Thresholds>,
    pub candidates: usize,
    pub pairs: usize,
    pub triplets: Vec<Triplet>,
    pub skipped: usize,
}

impl EnrichReport {
    pub fn write_triplets(&self, path: &Path) -> Result<()> {
        write_jsonl(path, &self.triplets)
    }
}

/// Selects candidates, extracts relations concurrently through the gateway
/// and writes predicates into the graph in candidate order. Each unordered
/// pair is enriched once, oriented as its first candidate.
pub fn enrich(
    graph: &mut PropertyGraph,
    gateway: &Gateway,
    embedder: &dyn Embedder,
    settings: &CandidateSettings,
    k: usize,
) -> Result<EnrichReport> {
    let candidates = select_semantic_candidates(graph, settings);
    let mut seen = HashSet::new();
    let mut pairs = Vec::new();
    for c in &candidates {
        if seen.insert((c.n.min(c.p), c.n.max(c.p))) {
            let top = top_sentences_for_pair(graph, c.n, c.p, k, embedder)?;
            pairs.push((c.n, c.p, top.into_iter().map(|(s, _)| s).collect::<Vec<_>>()));
        }
    }
    let snapshot: &PropertyGraph = graph;
    let replies = gateway.map_ordered(&pairs, |(n, p, support)| {
        request_relation(snapshot, *n, *p, support, gateway)
    });
    let mut triplets = Vec::new();
    let mut skipped = 0;
    for ((n, p, _), reply) in pairs.iter().zip(replies) {
        match reply? {
            Some(t) => {
                graph.set_cc_text(*n, *p, Some(t.predicate.clone()))?;
                triplets.push(t);
            }
            None => skipped += 1,
        }
    }
    Ok(EnrichReport {
        thresholds: thresholds(graph, settings),
        candidates: candidates.len(),
        pairs: pairs.len(),
        triplets,
        skipped,
    })
}

/// Every CC edge carrying a predicate, as `(subject, predicate, object)` names.
pub fn graph_triplets(graph: &PropertyGraph) -> Vec<(String, String, String)> {
    graph
        .edges()
        .iter()
        .filter(|e| e.ty == EdgeType::Cc)
        .filter_map(|e| {
            let text = e.text.as_ref()?;
            Some((
                graph.node(e.start)?.name().to_string(),
                text.clone(),
                graph.node(e.end)?.name().to_string(),
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::HashingEmbedder;
    use crate::llm::{GatewaySettings, StubProvider, StubTables};
    use crate::taxonomy::CategoryType;

    fn with_sentences(groups: &[&[&str]]) -> PropertyGraph {
        let mut g = PropertyGraph::new();
        let emb = HashingEmbedder::new(16, 0);
        for (i, names) in groups.iter().enumerate() {
            let text = format!("sentence {i} {}", names.join(" "));
            let s = g.add_sentence(&text, emb.embed(&text).unwrap()).unwrap();
            for n in *names {
                let e = g.upsert_entity(n, CategoryType::Concept).unwrap();
                g.add_edge(EdgeType::Contains, s, e).unwrap();
            }
        }
        g
    }

    #[test]
    fn weights_count_shared_sentences() {
        let mut g = with_sentences(&[&["a", "b"], &["a", "b", "c"], &["a", "b"], &["d"]]);
        assert_eq!(build_cc_edges(&mut g).unwrap(), 3);
        let (a, b, d) = (
            g.find_entity("a").unwrap(),
            g.find_entity("b").unwrap(),
            g.find_entity("d").unwrap(),
        );
        assert_eq!(g.cc_edge(a, b).unwrap().weight, 3);
        assert!(g.cc_edge(a, d).is_none());
        assert!(g.validate_schema().is_empty());
    }

    #[test]
    fn rebuild_keeps_predicate_text() {
        let mut g = with_sentences(&[&["a", "b"]]);
        build_cc_edges(&mut g).unwrap();
        let (a, b) = (g.find_entity("a").unwrap(), g.find_entity("b").unwrap());
        g.set_cc_text(a, b, Some("heats".into())).unwrap();
        build_cc_edges(&mut g).unwrap();
        assert_eq!(g.cc_edge(a, b).unwrap().text.as_deref(), Some("heats"));
    }

    #[test]
    fn nearest_rank_examples() {
        assert_eq!(nearest_rank_percentile(&[5, 5, 5], 99.7), Some(5));
        let v: Vec<u64> = (1..=1000).collect();
        assert_eq!(nearest_rank_percentile(&v, 99.7), Some(997));
        assert_eq!(nearest_rank_percentile(&v, 50.0), Some(500));
        assert_eq!(nearest_rank_percentile(&[3, 1, 2], 0.0), Some(1));
        assert_eq!(nearest_rank_percentile(&[], 50.0), None);
    }

    #[test]
    fn hub_pairs_are_selected() {
        // A hub co-occurring with 50 leaves, the first one very often.
        let mut groups: Vec<Vec<String>> = Vec::new();
        for i in 0..50 {
            groups.push(vec!["hub".into(), format!("leaf{i}")]);
        }
        for _ in 0..5 {
            groups.push(vec!["hub".into(), "leaf0".into()]);
        }
        for i in 0..20 {
            groups.push(vec![format!("x{i}"), format!("y{i}")]);
        }
        let refs: Vec<Vec<&str>> = groups.iter().map(|g| g.iter().map(String::as_str).collect()).collect();
        let slices: Vec<&[&str]> = refs.iter().map(Vec::as_slice).collect();
        let mut g = with_sentences(&slices);
        build_cc_edges(&mut g).unwrap();
        let c = select_semantic_candidates(&g, &CandidateSettings::default());
        let hub = g.find_entity("hub").unwrap();
        let leaf0 = g.find_entity("leaf0").unwrap();
        assert_eq!(c, vec![PairCandidate { n: hub, p: leaf0, cc_weight: 6 }]);
        assert!(select_semantic_candidates(&PropertyGraph::new(), &CandidateSettings::default()).is_empty());
    }

    #[test]
    fn stub_relation_and_failure_path() {
        let mut g = with_sentences(&[&["deuterium", "tritium"], &["plasma", "wall"]]);
        build_cc_edges(&mut g).unwrap();
        let gw = Gateway::new(
            Box::new(StubProvider::new(StubTables::bundled())),
            GatewaySettings::default(),
        );
        let (d, t) = (g.find_entity("deuterium").unwrap(), g.find_entity("tritium").unwrap());
        let emb = HashingEmbedder::new(16, 0);
        let top = top_sentences_for_pair(&g, d, t, 6, &emb).unwrap();
        let ids: Vec<_> = top.iter().map(|x| x.0).collect();
        let tr = extract_relation(&mut g, d, t, &ids, &gw).unwrap().unwrap();
        assert_eq!(tr.predicate, "fuses with");
        assert_eq!(g.cc_edge(d, t).unwrap().text.as_deref(), Some("fuses with"));

        let (p, w) = (g.find_entity("plasma").unwrap(), g.find_entity("wall").unwrap());
        let top: Vec<_> = top_sentences_for_pair(&g, p, w, 6, &emb).unwrap().into_iter().map(|x| x.0).collect();
        let tr = extract_relation(&mut g, p, w, &top, &gw).unwrap().unwrap();
        assert_eq!(tr.predicate, "co-occurs with");
        assert_eq!(graph_triplets(&g).len(), 2);
    }
}
