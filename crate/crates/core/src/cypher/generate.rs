use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ast::*;
use crate::graph::{EdgeType, Label};

const MAX_NODES: usize = 4;
const WORDS: [&str; 4] = ["alpha", "beta", "gamma", "delta"];

struct Var {
    name: Option<String>,
    label: Label,
}

/// Grammar-valid, schema-valid random query for differential testing. Names
/// and literals are drawn from small pools (`n0`..`n9`, small integers) so
/// that filters hit on generated graphs.
pub fn random_query(seed: u64) -> String {
    random_ast(seed).to_string()
}

fn node_pattern(rng: &mut ChaCha8Rng, v: &Var) -> NodePattern {
    NodePattern {
        var: v.name.clone(),
        label: if v.name.is_none() || rng.random_bool(0.7) {
            Some(v.label)
        } else {
            None
        },
    }
}

fn random_ast(seed: u64) -> Query {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vars: Vec<Var> = Vec::new();
    let mut fresh = 0usize;
    let mut new_name = |rng: &mut ChaCha8Rng| -> Option<String> {
        if rng.random_bool(0.2) {
            None
        } else {
            fresh += 1;
            Some(format!("v{fresh}"))
        }
    };

    let fulltext = rng.random_bool(0.3).then(|| {
        vars.push(Var {
            name: Some("node".into()),
            label: Label::Sentence,
        });
        let n = rng.random_range(1..=2);
        let words: Vec<&str> = (0..n).map(|_| *WORDS.choose(&mut rng).unwrap()).collect();
        FulltextCall {
            index: "sentences".into(),
            query: words.join(" "),
            node_var: "node".into(),
            score_var: "score".into(),
        }
    });

    let mut patterns = Vec::new();
    let n_patterns = if fulltext.is_some() {
        rng.random_range(0..=1)
    } else {
        rng.random_range(1..=2)
    };
    for _ in 0..n_patterns {
        if vars.len() >= MAX_NODES {
            break;
        }
        let named: Vec<usize> = (0..vars.len()).filter(|&i| vars[i].name.is_some()).collect();
        let mut current = if !named.is_empty() && rng.random_bool(0.5) {
            *named.choose(&mut rng).unwrap()
        } else {
            let name = new_name(&mut rng);
            vars.push(Var {
                name,
                label: *Label::ALL.choose(&mut rng).unwrap(),
            });
            vars.len() - 1
        };
        let start = node_pattern(&mut rng, &vars[current]);
        let mut hops = Vec::new();
        let max_hops = rng.random_range(0..=3);
        while hops.len() < max_hops && vars.len() < MAX_NODES {
            let from = vars[current].label;
            let options: Vec<(EdgeType, Direction, Label)> = EdgeType::ALL
                .iter()
                .flat_map(|&t| Label::ALL.iter().map(move |&l| (t, l)))
                .flat_map(|(t, l)| {
                    let mut v = Vec::new();
                    if t.allows(from, l) {
                        v.push((t, Direction::Out, l));
                    }
                    if t.allows(l, from) {
                        v.push((t, Direction::In, l));
                    }
                    v
                })
                .collect();
            let Some(&(ty, mut dir, to)) = options.choose(&mut rng) else {
                break;
            };
            if rng.random_bool(0.2) {
                dir = Direction::Either;
            }
            let reuse: Vec<usize> = (0..vars.len())
                .filter(|&i| i != current && vars[i].name.is_some() && vars[i].label == to)
                .collect();
            let next = if !reuse.is_empty() && rng.random_bool(0.2) {
                *reuse.choose(&mut rng).unwrap()
            } else {
                let name = new_name(&mut rng);
                vars.push(Var { name, label: to });
                vars.len() - 1
            };
            hops.push(Hop {
                rel_type: (!rng.random_bool(0.2)).then_some(ty),
                direction: dir,
                node: node_pattern(&mut rng, &vars[next]),
            });
            current = next;
        }
        patterns.push(Pattern { start, hops });
    }

    if vars.iter().all(|v| v.name.is_none()) {
        // without CALL the first pattern starts at vars[0]
        vars[0].name = Some("v0".into());
        patterns[0].start.var = Some("v0".into());
    }
    let named: Vec<&Var> = vars.iter().filter(|v| v.name.is_some()).collect();
    let has_score = fulltext.is_some();
    let property = |rng: &mut ChaCha8Rng, v: &Var| -> Expr {
        let props: Vec<&str> = v
            .label
            .properties()
            .iter()
            .copied()
            .filter(|p| *p != "embeddings" || rng.random_bool(0.1))
            .collect();
        Expr::Property(v.name.clone().unwrap(), props.choose(rng).unwrap().to_string())
    };
    let scalar = |rng: &mut ChaCha8Rng| -> Expr {
        if has_score && rng.random_bool(0.25) {
            Expr::Var("score".into())
        } else {
            let v = *named.choose(rng).unwrap();
            property(rng, v)
        }
    };

    let mut conditions = Vec::new();
    if !named.is_empty() {
        for _ in 0..rng.random_range(0..=2) {
            let left = scalar(&mut rng);
            let op = *CmpOp::ALL.choose(&mut rng).unwrap();
            let right = match rng.random_range(0..5) {
                0 => Operand::Expr(scalar(&mut rng)),
                1 | 2 => Operand::Literal(Literal::Str(format!("n{}", rng.random_range(0..10)))),
                3 => Operand::Literal(Literal::Int(rng.random_range(-1..6))),
                _ => Operand::Literal(Literal::Float(rng.random_range(0..8) as f64 * 0.5)),
            };
            conditions.push(Condition { left, op, right });
        }
    }

    let mut returns = Vec::new();
    for i in 0..rng.random_range(1..=3) {
        let expr = if named.is_empty() || (has_score && rng.random_bool(0.2)) {
            Expr::Var("score".into())
        } else if rng.random_bool(0.4) {
            Expr::Var(named.choose(&mut rng).unwrap().name.clone().unwrap())
        } else {
            let v = *named.choose(&mut rng).unwrap();
            property(&mut rng, v)
        };
        returns.push(ReturnItem {
            expr,
            alias: rng.random_bool(0.2).then(|| format!("c{i}")),
        });
    }
    let order_by = (!named.is_empty() && rng.random_bool(0.5)).then(|| OrderBy {
        expr: if rng.random_bool(0.2) {
            Expr::Var(named.choose(&mut rng).unwrap().name.clone().unwrap())
        } else {
            scalar(&mut rng)
        },
        descending: rng.random_bool(0.5),
    });
    let limit = rng.random_bool(0.4).then(|| rng.random_range(1..=8));

    Query {
        fulltext,
        patterns,
        conditions,
        returns,
        order_by,
        limit,
    }
}
