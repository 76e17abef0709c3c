mod common;

use std::collections::BTreeSet;

use kgrag_core::embedding::{Embedder, HashingEmbedder};
use kgrag_core::eval::{make_cases_from_graph, run_eval, CaseMode};
use kgrag_core::graph::Label;
use kgrag_core::rag::{answer, filter_triplets, retrieve, RetrievalRequest};

use common::{build_mini, dot, fixture, occurrences, pick, oracle_candidates, parent_by_scan, ranking_graph, ranking_question};

#[test]
fn hits_are_ranked_by_exact_dot_product() {
    let dir = tempfile::tempdir().unwrap();
    let gateway = common::mini_config(dir.path()).gateway().unwrap();
    let embedder = HashingEmbedder::new(64, 0);
    let g = ranking_graph(&embedder);
    assert_eq!(g.ids_with_label(Label::Sentence).count(), 1000);
    let (mut joined, mut plain, mut ties) = (0, 0, 0);
    for seed in 0..100 {
        let question = ranking_question(seed);
        let r = retrieve(&RetrievalRequest::new(question.as_str(), 3).unwrap(), &g, &gateway, &embedder).unwrap();
        assert!(!r.ordered_by_query);
        if r.query.contains("HAS_SENTENCE") {
            joined += 1;
        } else {
            plain += 1;
        }
        let got: BTreeSet<usize> = r.hits.iter().map(|h| h.sentence).collect();
        assert_eq!(got.len(), r.hits.len(), "duplicate hits for {question}");
        assert_eq!(got, oracle_candidates(&r.query, &g), "{question}");
        let q = embedder.embed(&question).unwrap();
        let mut expected: Vec<(f64, usize)> = r
            .hits
            .iter()
            .map(|h| (dot(q.as_slice(), g.nodes()[h.sentence].embedding().unwrap().as_slice()), h.sentence))
            .collect();
        expected.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let actual: Vec<(f64, usize)> = r.hits.iter().map(|h| (h.score, h.sentence)).collect();
        assert_eq!(actual, expected, "{question}");
        for h in &r.hits {
            assert_eq!(Some(h.abstract_node), parent_by_scan(&g, h.sentence));
        }
        ties += r.hits.windows(2).filter(|w| w[0].score == w[1].score).count();
    }
    assert!(joined > 10 && plain > 10, "joined {joined} plain {plain}");
    assert!(ties > 0);
}

#[test]
fn sources_come_from_retrieved_abstracts() {
    let dir = tempfile::tempdir().unwrap();
    let (built, gateway, embedder) = build_mini(dir.path());
    let g = &built.graph;
    let sentences: Vec<String> = g
        .ids_with_label(Label::Sentence)
        .map(|s| g.nodes()[s].name().to_string())
        .collect();
    for i in 0..100 {
        let k = 1 + i % 4;
        let question = if i % 2 == 0 {
            format!("What is known about {}", sentences[(i * 7) % sentences.len()])
        } else {
            ranking_question(i as u64)
        };
        let req = RetrievalRequest::new(question.as_str(), k).unwrap();
        let a = answer(&req, g, &gateway, embedder.as_ref()).unwrap();
        let r = a.retrieval.as_ref().unwrap();
        let mut owners = Vec::new();
        for h in &r.hits {
            if !owners.contains(&h.abstract_node) {
                owners.push(h.abstract_node);
            }
        }
        owners.truncate(k);
        let expected: Vec<(String, String)> = owners
            .iter()
            .map(|&o| {
                let n = &g.nodes()[o];
                (n.property("name").unwrap().to_string(), n.property("url").unwrap().to_string())
            })
            .collect();
        let got: Vec<(String, String)> = a.sources.iter().map(|s| (s.title.clone(), s.url.clone())).collect();
        assert_eq!(got, expected, "{question}");
        let again = answer(&req, g, &gateway, embedder.as_ref()).unwrap();
        assert_eq!(again.to_json(), a.to_json());
    }
}

#[test]
fn triplets_matching_an_entity_are_kept_in_order() {
    let occ = occurrences();
    let got = filter_triplets(&fixture(), &["tungsten".into()], "Where is tungsten used?", |n| {
        occ.get(n.to_lowercase().as_str()).copied().unwrap_or(0)
    });
    assert_eq!(got, pick(&[0, 2, 8]));
}

#[test]
fn triplets_matching_a_predicate_lemma_are_kept() {
    let got = filter_triplets(&fixture(), &[], "Which coatings reduce recycling?", |_| 0);
    assert_eq!(got, pick(&[3, 4]));
}

#[test]
fn unmatched_triplets_fall_back_to_occurrence_order() {
    let occ = occurrences();
    let count = |n: &str| occ.get(n.to_lowercase().as_str()).copied().unwrap_or(0);
    let got = filter_triplets(&fixture(), &["tritium".into()], "Anything about tritium breeding?", count);
    assert_eq!(got, pick(&[8, 0, 2, 1, 4, 7, 9, 3, 6, 5]));
    // brute force: repeatedly take the first triplet with the largest sum
    let mut rest = fixture();
    let mut want = Vec::new();
    while !rest.is_empty() {
        let best = rest.iter().map(|x| count(&x.subject) + count(&x.object)).max().unwrap();
        let i = rest.iter().position(|x| count(&x.subject) + count(&x.object) == best).unwrap();
        want.push(rest.remove(i));
    }
    assert_eq!(got, want);
}

#[test]
fn expert_questions_retrieve_their_abstract_first() {
    let dir = tempfile::tempdir().unwrap();
    let (built, gateway, embedder) = build_mini(dir.path());
    let g = &built.graph;
    let n = g.ids_with_label(Label::Abstract).count();
    let cases = make_cases_from_graph(g, CaseMode::Expert, 0, n);
    assert_eq!(cases.len(), n);
    let report = run_eval(&cases, g, 3, &gateway, embedder.as_ref()).unwrap();
    assert_eq!(report.errors, 0);
    assert_eq!(report.top1_rate, Some(1.0));

    let persona = make_cases_from_graph(g, CaseMode::Persona, 5, n);
    assert!(persona.iter().all(|c| c.persona_tag.is_some()));
    let report = run_eval(&persona, g, 3, &gateway, embedder.as_ref()).unwrap();
    assert!(report.top1_rate.unwrap() <= report.topk_rate.unwrap());
}
