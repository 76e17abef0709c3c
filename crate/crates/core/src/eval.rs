//! Retrieval experiments: generated question sets and top-1 / top-k rates.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};

use crate::embedding::Embedder;
use crate::error::{Error, Result};
use crate::graph::{Label, NodeId, PropertyGraph};
use crate::llm::Gateway;
use crate::ner::{read_jsonl, write_jsonl};
use crate::rag::{retrieve, select_top_abstracts, RetrievalRequest};
use crate::text::{content_tokens, tokenize};

pub const DEFAULT_CASES: usize = 10;
/// Share of the expert question's content tokens a persona question keeps.
pub const MIN_PRESERVED: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalCase {
    pub question: String,
    pub gold_abstract_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persona_tag: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseMode {
    Expert,
    Persona,
}

impl std::str::FromStr for CaseMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expert" => Ok(CaseMode::Expert),
            "persona" => Ok(CaseMode::Persona),
            other => Err(Error::Config(format!("unknown case mode `{other}`"))),
        }
    }
}

pub fn write_cases(path: &Path, cases: &[EvalCase]) -> Result<()> {
    write_jsonl(path, cases)
}

pub fn read_cases(path: &Path) -> Result<Vec<EvalCase>> {
    read_jsonl(path)
}

const TEMPLATES: [&str; 3] = [
    "Which study reports that {}?",
    "Is there evidence that {}?",
    "What is known about the finding that {}?",
];

/// The sentence of an abstract with the most content tokens that occur in no
/// other abstract; ties go to the longer, then the earlier sentence.
fn distinctive_sentence(graph: &PropertyGraph, abstract_node: NodeId, owners: &HashMap<String, HashSet<NodeId>>) -> Option<NodeId> {
    graph
        .abstract_sentences(abstract_node)
        .into_iter()
        .map(|s| {
            let tokens = content_tokens(graph.node(s).map_or("", |n| n.name()));
            let unique = tokens.iter().filter(|t| owners[t.as_str()].len() == 1).count();
            (s, unique, tokens.len())
        })
        .max_by(|a, b| a.1.cmp(&b.1).then(a.2.cmp(&b.2)).then(b.0.cmp(&a.0)))
        .map(|(s, ..)| s)
}

fn as_clause(sentence: &str) -> String {
    let s = sentence.trim().trim_end_matches(['.', '!', '?']).trim();
    let first = s.split_whitespace().next().unwrap_or("");
    let keep_case = first.chars().skip(1).any(|c| c.is_uppercase());
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if !keep_case => c.to_lowercase().chain(chars).collect(),
        _ => s.to_string(),
    }
}

fn typo(word: &str, rng: &mut ChaCha8Rng) -> String {
    let mut chars: Vec<char> = word.chars().collect();
    let i = rng.random_range(1..chars.len() - 1);
    match rng.random_range(0..3) {
        0 => chars.swap(i, i + 1),
        1 => {
            chars.remove(i);
        }
        _ => chars.insert(i, chars[i]),
    }
    chars.into_iter().collect()
}

/// Fraction of `original`'s content tokens (as a multiset) found in `degraded`.
pub fn preserved_fraction(original: &str, degraded: &str) -> f64 {
    let orig = content_tokens(original);
    if orig.is_empty() {
        return 1.0;
    }
    let mut pool: HashMap<String, usize> = HashMap::new();
    for t in content_tokens(degraded) {
        *pool.entry(t).or_insert(0) += 1;
    }
    let kept = orig
        .iter()
        .filter(|t| match pool.get_mut(t.as_str()) {
            Some(n) if *n > 0 => {
                *n -= 1;
                true
            }
            _ => false,
        })
        .count();
    kept as f64 / orig.len() as f64
}

const PADDING: [&str; 4] = ["um so", "hey, so like", "ok so i wanna know", "so yeah"];

/// Casual rewrite of a question: typos, a truncated tail and filler words.
/// Intensity is lowered until at least [`MIN_PRESERVED`] of the content
/// tokens survive.
pub fn degrade(question: &str, rng: &mut ChaCha8Rng) -> (String, String) {
    let words: Vec<&str> = question.trim_end_matches('?').split_whitespace().collect();
    for intensity in [1.0, 0.6, 0.3, 0.0] {
        let mut ops = Vec::new();
        let mut out: Vec<String> = Vec::new();
        let mut typos = 0;
        for w in &words {
            let is_content = tokenize(w).iter().any(|t| !crate::text::is_stopword(t));
            if is_content && w.chars().count() >= 5 && w.chars().all(char::is_alphabetic) && rng.random_bool(0.25 * intensity) {
                out.push(typo(w, rng));
                typos += 1;
            } else {
                out.push(w.to_lowercase());
            }
        }
        if typos > 0 {
            ops.push("typos");
        }
        let cut = ((out.len() as f64) * 0.2 * intensity * rng.random::<f64>()).floor() as usize;
        if cut > 0 && out.len() > cut + 3 {
            out.truncate(out.len() - cut);
            ops.push("truncated");
        }
        let pad = *PADDING.choose(rng).unwrap();
        ops.push("padded");
        let text = format!("{pad} {}", out.join(" "));
        if preserved_fraction(question, &text) >= MIN_PRESERVED {
            return (text, ops.join("+"));
        }
    }
    unreachable!("intensity 0 keeps every content token")
}

/// Builds `n` cases from abstracts sampled with `seed`. Expert questions wrap
/// each abstract's most distinctive sentence in a template; persona questions
/// are degraded expert questions.
pub fn make_cases_from_graph(graph: &PropertyGraph, mode: CaseMode, seed: u64, n: usize) -> Vec<EvalCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let abstracts: Vec<NodeId> = graph.ids_with_label(Label::Abstract).collect();
    let mut owners: HashMap<String, HashSet<NodeId>> = HashMap::new();
    for &a in &abstracts {
        for s in graph.abstract_sentences(a) {
            for t in content_tokens(graph.node(s).map_or("", |n| n.name())) {
                owners.entry(t).or_default().insert(a);
            }
        }
    }
    let mut chosen = abstracts.clone();
    chosen.shuffle(&mut rng);
    chosen.truncate(n);
    let mut cases = Vec::new();
    for a in chosen {
        let Some(s) = distinctive_sentence(graph, a, &owners) else {
            continue;
        };
        let template = TEMPLATES.choose(&mut rng).unwrap();
        let question = template.replace("{}", &as_clause(graph.node(s).unwrap().name()));
        let gold = graph
            .node(a)
            .and_then(|n| n.property("sourceId"))
            .map(|v| v.to_string())
            .unwrap_or_default();
        cases.push(match mode {
            CaseMode::Expert => EvalCase {
                question,
                gold_abstract_id: gold,
                persona_tag: None,
            },
            CaseMode::Persona => {
                let (q, tag) = degrade(&question, &mut rng);
                EvalCase {
                    question: q,
                    gold_abstract_id: gold,
                    persona_tag: Some(tag),
                }
            }
        });
    }
    cases
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoldRank {
    Found(usize),
    Miss,
}

impl Serialize for GoldRank {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            GoldRank::Found(r) => s.serialize_u64(*r as u64),
            GoldRank::Miss => s.serialize_str("MISS"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub question: String,
    pub gold: String,
    pub retrieved: Vec<String>,
    pub rank: Option<GoldRank>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub n_cases: usize,
    pub k: usize,
    /// Cases excluded from the rates because of a case-level error.
    pub errors: usize,
    pub top1_rate: Option<f64>,
    pub topk_rate: Option<f64>,
    pub rows: Vec<EvalRow>,
}

/// Retrieves the top-k abstracts for every case and records the gold rank.
/// Rates are over the cases without errors, `None` when there are none.
pub fn run_eval(
    cases: &[EvalCase],
    graph: &PropertyGraph,
    k: usize,
    gateway: &Gateway,
    embedder: &dyn Embedder,
) -> Result<EvalReport> {
    if k == 0 {
        return Err(Error::Precondition("k must be at least 1".into()));
    }
    let ids: HashMap<String, NodeId> = graph
        .ids_with_label(Label::Abstract)
        .filter_map(|a| Some((graph.node(a)?.property("sourceId")?.to_string(), a)))
        .collect();
    let source_id = |a: NodeId| graph.node(a).and_then(|n| n.property("sourceId")).map(|v| v.to_string()).unwrap_or_default();
    let rows = gateway.map_ordered(cases, |case| {
        let row = |retrieved, rank, error| EvalRow {
            question: case.question.clone(),
            gold: case.gold_abstract_id.clone(),
            retrieved,
            rank,
            error,
        };
        if !ids.contains_key(&case.gold_abstract_id) {
            return row(vec![], None, Some(format!("gold abstract {} is not in the graph", case.gold_abstract_id)));
        }
        let outcome = RetrievalRequest::new(case.question.clone(), k)
            .and_then(|req| retrieve(&req, graph, gateway, embedder));
        match outcome {
            Ok(r) => {
                let retrieved: Vec<String> = select_top_abstracts(&r.hits, k).into_iter().map(source_id).collect();
                let rank = retrieved
                    .iter()
                    .position(|id| *id == case.gold_abstract_id)
                    .map_or(GoldRank::Miss, |p| GoldRank::Found(p + 1));
                row(retrieved, Some(rank), None)
            }
            Err(e) => row(vec![], None, Some(e.to_string())),
        }
    });
    let scored: Vec<GoldRank> = rows.iter().filter_map(|r| r.rank).collect();
    let rate = |hit: &dyn Fn(GoldRank) -> bool| {
        (!scored.is_empty()).then(|| scored.iter().filter(|&&r| hit(r)).count() as f64 / scored.len() as f64)
    };
    Ok(EvalReport {
        n_cases: rows.len(),
        k,
        errors: rows.len() - scored.len(),
        top1_rate: rate(&|r| r == GoldRank::Found(1)),
        topk_rate: rate(&|r| matches!(r, GoldRank::Found(_))),
        rows,
    })
}
