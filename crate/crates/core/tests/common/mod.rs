//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kgrag_core::corpus::{AbstractRecord, SentenceUnit};
use kgrag_core::cypher::{CmpOp, Direction, Expr, Literal, NodePattern, Operand, Query};
use kgrag_core::embedding::{Embedder, HashingEmbedder};
use kgrag_core::graph::{build_graph, EdgeType, Label, NodeId, PropertyGraph, Value};
use kgrag_core::llm::Gateway;
use kgrag_core::pipeline::{build, Built, PipelineConfig};
use kgrag_core::rag::TripletRef;
use kgrag_core::relations::{build_cc_edges, select_semantic_candidates, CandidateSettings};
use kgrag_core::resolution::{CanonicalMention, ResolvedEntity, RuleOrigin, SubstitutionRule};
use kgrag_core::taxonomy::CategoryType;

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn mini_config(out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::load(&fixtures_dir().join("mini.toml")).expect("mini config");
    cfg.output.dir = out.to_path_buf();
    cfg
}

pub fn build_mini(out: &Path) -> (Built, Gateway, Box<dyn Embedder>) {
    let cfg = mini_config(out);
    let gateway = cfg.gateway().unwrap();
    let embedder = cfg.embedder().unwrap();
    let built = build(&cfg, &gateway, embedder.as_ref()).unwrap();
    (built, gateway, embedder)
}

pub fn record(id: &str, title: &str, text: &str, author: &str, year: i32, cites: u64) -> AbstractRecord {
    AbstractRecord {
        id: id.into(),
        title: title.into(),
        text: text.into(),
        first_author: author.into(),
        year,
        keywords: vec![],
        url: format!("https://example.org/{id}"),
        citation_count: cites,
    }
}

// ---------------------------------------------------------------------------
// Random graphs for the query differential test

const NAMES: [&str; 14] = ["n0", "n1", "n2", "n3", "n4", "n5", "n6", "n7", "n8", "n9", "0", "1", "2", "5"];
const WORDS: [&str; 4] = ["alpha", "beta", "gamma", "delta"];

/// Schema-valid graph with at most `max_nodes` nodes, small name pools and
/// dense random edges.
pub fn random_graph(seed: u64, max_nodes: usize) -> PropertyGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let embedder = HashingEmbedder::new(8, 0);
    let mut g = PropertyGraph::new();
    let total = rng.random_range(6..=max_nodes);
    while g.node_count() < total {
        match rng.random_range(0..6) {
            0 => {
                let n = g.node_count();
                let name = *NAMES.choose(&mut rng).unwrap();
                let r = record(&format!("S{n}"), name, "text", "A", 2000, rng.random_range(0..6));
                g.add_abstract(&r);
            }
            1 => {
                let k = rng.random_range(1..=3);
                let mut words: Vec<&str> = (0..k).map(|_| *WORDS.choose(&mut rng).unwrap()).collect();
                words.push(NAMES.choose(&mut rng).unwrap());
                let text = words.join(" ");
                g.add_sentence(&text, embedder.embed(&text).unwrap()).unwrap();
            }
            _ => {
                let label = *[Label::Entity, Label::Person, Label::TimeReference, Label::KeyWord]
                    .choose(&mut rng)
                    .unwrap();
                let types = rng
                    .random_bool(0.5)
                    .then(|| *[CategoryType::Concept, CategoryType::PhysicsEntity].choose(&mut rng).unwrap());
                g.upsert_term(label, NAMES.choose(&mut rng).unwrap(), types).unwrap();
            }
        }
    }
    let n = g.node_count();
    let edges = rng.random_range(0..=3 * n);
    for _ in 0..edges {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let (la, lb) = (g.nodes()[a].label, g.nodes()[b].label);
        let allowed: Vec<EdgeType> = EdgeType::ALL.into_iter().filter(|t| t.allows(la, lb)).collect();
        let Some(&ty) = allowed.choose(&mut rng) else {
            continue;
        };
        if ty == EdgeType::Cc {
            if a != b {
                g.set_cc(a, b, rng.random_range(1..5)).unwrap();
                if rng.random_bool(0.3) {
                    g.set_cc_text(a, b, Some(NAMES.choose(&mut rng).unwrap().to_string())).unwrap();
                }
            }
        } else {
            g.add_edge(ty, a, b).unwrap();
        }
    }
    g.recompute_degrees();
    g
}

// ---------------------------------------------------------------------------
// Brute-force query oracle

/// Result cell as the oracle sees it: a node id or a scalar.
#[derive(Debug, Clone, PartialEq)]
pub enum OCell {
    Node(NodeId),
    Value(Value),
}

fn oracle_number(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Float(x) => Some(*x),
        Value::Str(s) => {
            let body = s.strip_prefix('-').unwrap_or(s);
            let ok = body.chars().next().is_some_and(|c| c.is_ascii_digit())
                && body.chars().all(|c| c.is_ascii_digit() || c == '.');
            if ok {
                s.parse().ok()
            } else {
                None
            }
        }
        _ => None,
    }
}

fn oracle_holds(op: CmpOp, a: &Value, b: &Value) -> bool {
    if op == CmpOp::Contains {
        return matches!((a, b), (Value::Str(x), Value::Str(y)) if x.contains(y.as_str()));
    }
    if matches!(a, Value::Null | Value::List(_)) || matches!(b, Value::Null | Value::List(_)) {
        return false;
    }
    let ord = match (oracle_number(a), oracle_number(b)) {
        (Some(x), Some(y)) => x.partial_cmp(&y),
        _ => Some(a.to_string().cmp(&b.to_string())),
    };
    let Some(o) = ord else { return false };
    match op {
        CmpOp::Eq => o.is_eq(),
        CmpOp::Lt => o.is_lt(),
        CmpOp::Le => o.is_le(),
        CmpOp::Gt => o.is_gt(),
        CmpOp::Ge => o.is_ge(),
        CmpOp::Contains => unreachable!(),
    }
}

fn oracle_sort_key(a: &Value, b: &Value) -> Ordering {
    let class = |v: &Value| match v {
        Value::Int(_) | Value::Float(_) => 0,
        Value::Str(_) => 1,
        _ => 2,
    };
    match (class(a), class(b)) {
        (0, 0) => oracle_number(a).unwrap().partial_cmp(&oracle_number(b).unwrap()).unwrap(),
        (1, 1) => a.to_string().cmp(&b.to_string()),
        (x, y) => x.cmp(&y),
    }
}

/// Enumerates every assignment of graph nodes to pattern positions and every
/// assignment of distinct edges to hops, keeps those satisfying the pattern
/// and WHERE clause, then applies ORDER BY (stable) and LIMIT.
pub fn brute_force(q: &Query, g: &PropertyGraph) -> Vec<Vec<OCell>> {
    // positions in first-appearance order
    let mut slots: Vec<Option<String>> = Vec::new();
    let mut labels: Vec<Option<Label>> = Vec::new();
    let slot_of = |np: &NodePattern, slots: &mut Vec<Option<String>>, labels: &mut Vec<Option<Label>>| -> usize {
        if let Some(v) = &np.var {
            if let Some(i) = slots.iter().position(|s| s.as_deref() == Some(v)) {
                if labels[i].is_none() {
                    labels[i] = np.label;
                }
                return i;
            }
        }
        slots.push(np.var.clone());
        labels.push(np.label);
        slots.len() - 1
    };
    if let Some(ft) = &q.fulltext {
        slots.push(Some(ft.node_var.clone()));
        labels.push(Some(Label::Sentence));
    }
    let mut hops = Vec::new();
    for p in &q.patterns {
        let mut left = slot_of(&p.start, &mut slots, &mut labels);
        for h in &p.hops {
            let right = slot_of(&h.node, &mut slots, &mut labels);
            hops.push((left, right, h.rel_type, h.direction));
            left = right;
        }
    }
    let hits: BTreeMap<NodeId, f64> = q
        .fulltext
        .as_ref()
        .map(|ft| g.fulltext_search(&ft.query, None).into_iter().collect())
        .unwrap_or_default();

    let domains: Vec<Vec<NodeId>> = (0..slots.len())
        .map(|i| {
            if q.fulltext.is_some() && i == 0 {
                hits.keys().copied().collect()
            } else {
                (0..g.node_count())
                    .filter(|&n| labels[i].is_none_or(|l| g.nodes()[n].label == l))
                    .collect()
            }
        })
        .collect();

    let value_of = |e: &Expr, t: &[NodeId]| -> OCell {
        if let Some(ft) = &q.fulltext {
            if e.var() == ft.score_var {
                return OCell::Value(Value::Float(hits[&t[0]]));
            }
        }
        let slot = slots.iter().position(|s| s.as_deref() == Some(e.var())).unwrap();
        match e {
            Expr::Var(_) => OCell::Node(t[slot]),
            Expr::Property(_, p) => OCell::Value(g.nodes()[t[slot]].property(p).unwrap_or(Value::Null)),
        }
    };
    let scalar = |c: OCell| match c {
        OCell::Node(id) => Value::Int(id as i64),
        OCell::Value(v) => v,
    };

    let edges_for = |(l, r, ty, dir): (usize, usize, Option<EdgeType>, Direction), t: &[NodeId]| -> Vec<usize> {
        g.edges()
            .iter()
            .enumerate()
            .filter(|(_, e)| ty.is_none_or(|ty| e.ty == ty))
            .filter(|(_, e)| {
                let fwd = e.start == t[l] && e.end == t[r];
                let back = e.start == t[r] && e.end == t[l];
                match dir {
                    Direction::Out => fwd,
                    Direction::In => back,
                    Direction::Either => fwd || back,
                }
            })
            .map(|(i, _)| i)
            .collect()
    };

    let mut rows: Vec<Vec<NodeId>> = Vec::new();
    let mut tuple = vec![0usize; slots.len()];
    let mut idx = vec![0usize; slots.len()];
    if domains.iter().all(|d| !d.is_empty()) {
        'outer: loop {
            for i in 0..slots.len() {
                tuple[i] = domains[i][idx[i]];
            }
            let where_ok = q.conditions.iter().all(|c| {
                let left = scalar(value_of(&c.left, &tuple));
                let right = match &c.right {
                    Operand::Expr(e) => scalar(value_of(e, &tuple)),
                    Operand::Literal(Literal::Str(s)) => Value::Str(s.clone()),
                    Operand::Literal(Literal::Int(i)) => Value::Int(*i),
                    Operand::Literal(Literal::Float(x)) => Value::Float(*x),
                };
                oracle_holds(c.op, &left, &right)
            });
            if where_ok {
                let per_hop: Vec<Vec<usize>> = hops.iter().map(|&h| edges_for(h, &tuple)).collect();
                for _ in 0..distinct_assignments(&per_hop, &mut Vec::new()) {
                    rows.push(tuple.clone());
                }
            }
            for i in (0..slots.len()).rev() {
                idx[i] += 1;
                if idx[i] < domains[i].len() {
                    continue 'outer;
                }
                idx[i] = 0;
            }
            break;
        }
    }

    if let Some(o) = &q.order_by {
        rows.sort_by(|a, b| {
            let ord = oracle_sort_key(&scalar(value_of(&o.expr, a)), &scalar(value_of(&o.expr, b)));
            if o.descending {
                ord.reverse()
            } else {
                ord
            }
        });
    }
    if let Some(l) = q.limit {
        rows.truncate(l as usize);
    }
    rows.iter()
        .map(|t| q.returns.iter().map(|r| value_of(&r.expr, t)).collect())
        .collect()
}

/// Number of ways to pick one edge per hop with no edge used twice.
fn distinct_assignments(per_hop: &[Vec<usize>], used: &mut Vec<usize>) -> usize {
    let Some((first, rest)) = per_hop.split_first() else {
        return 1;
    };
    let mut n = 0;
    for &e in first {
        if !used.contains(&e) {
            used.push(e);
            n += distinct_assignments(rest, used);
            used.pop();
        }
    }
    n
}

/// Engine cells in the oracle's representation.
pub fn engine_rows(table: &kgrag_core::cypher::ResultTable) -> Vec<Vec<OCell>> {
    table
        .rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|c| match c {
                    kgrag_core::cypher::Cell::Node { id, .. } => OCell::Node(*id),
                    kgrag_core::cypher::Cell::Value(v) => OCell::Value(v.clone()),
                })
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Random corpora with resolved entities

pub struct RandomCorpus {
    pub records: Vec<AbstractRecord>,
    pub sentences: Vec<SentenceUnit>,
    pub entities: Vec<ResolvedEntity>,
}

const CATEGORIES: [CategoryType; 4] = [
    CategoryType::Concept,
    CategoryType::PhysicsEntity,
    CategoryType::Person,
    CategoryType::TimeReference,
];

pub fn random_corpus(seed: u64) -> RandomCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_abstracts = rng.random_range(2..=6);
    let n_entities = rng.random_range(3..=25);
    let mut records = Vec::new();
    let mut sentences = Vec::new();
    for a in 0..n_abstracts {
        let id = format!("R{a:03}");
        let n_sent = rng.random_range(1..=5);
        let texts: Vec<String> = (0..n_sent)
            .map(|i| format!("sentence {i} of {id} {}", WORDS.choose(&mut rng).unwrap()))
            .collect();
        for (i, t) in texts.iter().enumerate() {
            sentences.push(SentenceUnit {
                abstract_id: id.clone(),
                index: i,
                text: t.clone(),
            });
        }
        records.push(record(&id, &format!("title {a}"), &texts.join(". "), &format!("Author {}", a % 3), 2000 + a as i32 % 4, a as u64));
    }
    let mut entities = Vec::new();
    for e in 0..n_entities {
        let mut sources = BTreeSet::new();
        for _ in 0..rng.random_range(1..=6) {
            let s = sentences.choose(&mut rng).unwrap();
            sources.insert((s.abstract_id.clone(), s.index));
        }
        let category = *CATEGORIES.choose(&mut rng).unwrap();
        entities.push(ResolvedEntity {
            canonical: format!("entity {e}"),
            category,
            mention_count: sources.len() + rng.random_range(0..3),
            sources: sources.into_iter().collect(),
        });
    }
    RandomCorpus {
        records,
        sentences,
        entities,
    }
}

pub fn graph_of(c: &RandomCorpus) -> PropertyGraph {
    let mut g = build_graph(&c.records, &c.sentences, &c.entities, &HashingEmbedder::new(16, 0)).unwrap();
    build_cc_edges(&mut g).unwrap();
    g
}

/// Per-sentence entity sets scanned from the resolved entities directly.
pub fn pair_counts_by_scan(c: &RandomCorpus) -> BTreeMap<(String, String), u64> {
    let mut by_sentence: BTreeMap<(String, usize), BTreeSet<&str>> = BTreeMap::new();
    for e in &c.entities {
        for s in &e.sources {
            by_sentence.entry(s.clone()).or_default().insert(&e.canonical);
        }
    }
    let mut out = BTreeMap::new();
    for names in by_sentence.values() {
        let v: Vec<&str> = names.iter().copied().collect();
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                *out.entry((v[i].to_string(), v[j].to_string())).or_insert(0) += 1;
            }
        }
    }
    out
}

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut s = 0.0f64;
    for i in 0..a.len() {
        s += a[i] as f64 * b[i] as f64;
    }
    s
}

// ---------------------------------------------------------------------------
// Synthetic retrieval corpus

const DOMAIN_TERMS: [&str; 12] = [
    "tokamak", "divertor", "tungsten", "erosion", "ignition", "implosion", "laser", "blanket", "retention",
    "compression", "capsule", "stellarator",
];
const FILLER: [&str; 12] = [
    "measured", "strong", "reduced", "edge", "flux", "signal", "shot", "profile", "heating", "power", "wall", "target",
];

fn synthetic_sentence(rng: &mut ChaCha8Rng) -> String {
    let mut words: Vec<&str> = (0..rng.random_range(1..=3)).map(|_| *DOMAIN_TERMS.choose(rng).unwrap()).collect();
    words.extend((0..rng.random_range(2..=5)).map(|_| *FILLER.choose(rng).unwrap()));
    words.shuffle(rng);
    words.join(" ")
}

/// 200 abstracts of 5 sentences each. Every tenth sentence repeats an earlier
/// one so that equal scores occur.
pub fn ranking_graph(embedder: &dyn Embedder) -> PropertyGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut records = Vec::new();
    let mut sentences: Vec<SentenceUnit> = Vec::new();
    for a in 0..200 {
        let id = format!("Q{a:04}");
        let texts: Vec<String> = (0..5)
            .map(|i| {
                if (a * 5 + i) % 10 == 9 {
                    sentences.choose(&mut rng).unwrap().text.clone()
                } else {
                    synthetic_sentence(&mut rng)
                }
            })
            .collect();
        for (i, t) in texts.iter().enumerate() {
            sentences.push(SentenceUnit {
                abstract_id: id.clone(),
                index: i,
                text: t.clone(),
            });
        }
        records.push(record(&id, &format!("study {a}"), &texts.join(". "), "Author", 2010, 0));
    }
    build_graph(&records, &sentences, &[], embedder).unwrap()
}

/// Question mixing zero to three domain terms with filler words.
pub fn ranking_question(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words: Vec<&str> = (0..rng.random_range(0..=3)).map(|_| *DOMAIN_TERMS.choose(&mut rng).unwrap()).collect();
    words.extend((0..rng.random_range(1..=3)).map(|_| *FILLER.choose(&mut rng).unwrap()));
    words.shuffle(&mut rng);
    format!("Which results show {}?", words.join(" "))
}

/// Sentences a stub retrieval query yields: the fulltext hits, restricted to
/// sentences with a parent abstract when the query joins one.
pub fn oracle_candidates(query: &str, g: &PropertyGraph) -> BTreeSet<NodeId> {
    let q = kgrag_core::cypher::parse_validated(query).unwrap();
    let ft = q.fulltext.as_ref().expect("stub queries start with a fulltext call");
    g.fulltext_search(&ft.query, None)
        .into_iter()
        .map(|(id, _)| id)
        .filter(|&id| q.patterns.is_empty() || parent_by_scan(g, id).is_some())
        .collect()
}

/// Abstract owning a sentence, found by scanning the edge list.
pub fn parent_by_scan(g: &PropertyGraph, sentence: NodeId) -> Option<NodeId> {
    g.edges()
        .iter()
        .find(|e| e.ty == EdgeType::HasSentence && e.end == sentence)
        .map(|e| e.start)
}

// ---------------------------------------------------------------------------
// Zipf grid oracle

/// Two-level grid minimization of the log-space objective over (0, 2 f1].
pub fn grid_fit(freqs: &[u64]) -> (f64, f64) {
    let objective = |c: f64| -> f64 {
        freqs
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                let d = (f as f64).ln() - c.ln() + ((i + 1) as f64).ln();
                d * d
            })
            .sum()
    };
    let hi = 2.0 * freqs[0] as f64;
    let coarse = 1e-3 * hi;
    let mut best = coarse;
    for k in 1..=1000 {
        let c = k as f64 * coarse;
        if objective(c) < objective(best) {
            best = c;
        }
    }
    let fine = coarse * 1e-3;
    let centre = best;
    for k in -2000i64..=2000 {
        let c = centre + k as f64 * fine;
        if c > 0.0 && objective(c) < objective(best) {
            best = c;
        }
    }
    let n = freqs.len() as f64;
    let chi2 = freqs
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let e = best / (i + 1) as f64;
            (f as f64 - e).powi(2) / e
        })
        .sum::<f64>()
        / (n - 1.0);
    (best, chi2)
}


// ---------------------------------------------------------------------------
// Literal candidate oracle

/// Candidate pairs by the literal formulas: nearest-rank percentile with the
/// rank computed in integer arithmetic, and mean + k * sigma / sqrt(N) over
/// entity-like degrees.
pub fn literal_candidates(g: &PropertyGraph, permille: u64, sigmas: f64) -> BTreeSet<(String, String, u64)> {
    let mut weights: Vec<u64> = g.edges().iter().filter(|e| e.ty == EdgeType::Cc).map(|e| e.weight).collect();
    weights.sort_unstable();
    let mut degree = vec![0f64; g.node_count()];
    for e in g.edges().iter().filter(|e| e.ty == EdgeType::Cc) {
        degree[e.start] += 1.0;
        degree[e.end] += 1.0;
    }
    let degrees: Vec<f64> = g
        .nodes()
        .iter()
        .filter(|n| n.label.is_entity_like())
        .map(|n| degree[n.id])
        .collect();
    if weights.is_empty() || degrees.len() < 2 {
        return BTreeSet::new();
    }
    let n = weights.len() as u64;
    let rank = ((permille * n).div_ceil(1000)).max(1) as usize;
    let w_star = weights[rank - 1];
    let count = degrees.len() as f64;
    let mean = degrees.iter().sum::<f64>() / count;
    let sigma = (degrees.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / count).sqrt();
    let d_star = mean + sigmas * sigma / count.sqrt();
    let mut out = BTreeSet::new();
    for e in g.edges().iter().filter(|e| e.ty == EdgeType::Cc && e.weight >= w_star) {
        for (a, b) in [(e.start, e.end), (e.end, e.start)] {
            if degree[a] > d_star {
                out.insert((g.nodes()[a].name().to_string(), g.nodes()[b].name().to_string(), e.weight));
            }
        }
    }
    out
}

pub fn implementation_candidates(g: &PropertyGraph, settings: &CandidateSettings) -> BTreeSet<(String, String, u64)> {
    select_semantic_candidates(g, settings)
        .into_iter()
        .map(|c| (g.nodes()[c.n].name().to_string(), g.nodes()[c.p].name().to_string(), c.cc_weight))
        .collect()
}


// ---------------------------------------------------------------------------
// Ten-triplet fixture with hand-assigned occurrence counts

fn t(s: &str, p: &str, o: &str) -> TripletRef {
    TripletRef {
        subject: s.into(),
        predicate: p.into(),
        object: o.into(),
    }
}

pub fn fixture() -> Vec<TripletRef> {
    vec![
        t("tungsten", "erodes under", "plasma"),
        t("lithium", "coats", "divertor"),
        t("Tungsten", "is retained in", "deuterium"),
        t("beryllium", "reduces", "hydrogen recycling"),
        t("divertor", "is reducing", "heat flux"),
        t("laser", "drives", "implosion"),
        t("capsule", "compresses", "fuel"),
        t("plasma", "heats", "ions"),
        t("ITER", "operates with", "tungsten"),
        t("magnets", "confine", "plasma"),
    ]
}

pub fn occurrences() -> HashMap<&'static str, u64> {
    HashMap::from([
        ("tungsten", 5),
        ("plasma", 4),
        ("lithium", 1),
        ("divertor", 3),
        ("deuterium", 2),
        ("hydrogen recycling", 2),
        ("heat flux", 1),
        ("capsule", 1),
        ("fuel", 1),
        ("iter", 6),
    ])
}

pub fn pick(idx: &[usize]) -> Vec<TripletRef> {
    let all = fixture();
    idx.iter().map(|&i| all[i].clone()).collect()
}


// ---------------------------------------------------------------------------
// Seeded mention/rule sets

/// Mentions over twelve forms and rules pointing only to forms earlier in a
/// random order, so the rule graph is acyclic.
pub fn random_mentions_and_rules(seed: u64) -> (Vec<CanonicalMention>, Vec<SubstitutionRule>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let forms: Vec<String> = (0..12).map(|i| format!("e{i}")).collect();
    let cats = [CategoryType::Concept, CategoryType::PhysicsEntity, CategoryType::Person];
    let mentions = (0..rng.random_range(0..60))
        .map(|_| CanonicalMention {
            canonical: forms.choose(&mut rng).unwrap().clone(),
            category: *cats.choose(&mut rng).unwrap(),
            abstract_id: format!("A{}", rng.random_range(0..4)),
            sentence_index: rng.random_range(0..3),
        })
        .collect();
    let mut order: Vec<usize> = (0..forms.len()).collect();
    order.shuffle(&mut rng);
    let mut rules = Vec::new();
    for pos in 1..order.len() {
        if rng.random_bool(0.5) {
            rules.push(SubstitutionRule {
                from: forms[order[pos]].clone(),
                to: forms[order[rng.random_range(0..pos)]].clone(),
                origin: RuleOrigin::Manual,
            });
        }
    }
    (mentions, rules)
}
