use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn kgrag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgrag"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn build_into(dir: &Path) -> PathBuf {
    let config = fixtures().join("mini.toml");
    let o = kgrag(&[
        "build",
        "--config",
        config.to_str().unwrap(),
        "--provider",
        "stub",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    dir.join("graph.jsonl")
}

#[test]
fn build_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ga = std::fs::read(build_into(a.path())).unwrap();
    let gb = std::fs::read(build_into(b.path())).unwrap();
    assert!(!ga.is_empty());
    assert_eq!(ga, gb);
    for f in ["records.jsonl", "sentences.jsonl", "mentions.jsonl", "rules.jsonl", "resolved.jsonl"] {
        assert!(a.path().join(f).exists(), "{f}");
    }
}

#[test]
fn ask_before_build_fails_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("graph.jsonl");
    let o = kgrag(&["ask", "--graph", missing.to_str().unwrap(), "--question", "what is a tokamak?"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not exist"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(kgrag(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(kgrag(&[]).status.code(), Some(2));
    assert_eq!(kgrag(&["query", "--graph", "g.jsonl"]).status.code(), Some(2));
    assert_eq!(kgrag(&["build", "--config", "x", "--provider", "magic"]).status.code(), Some(2));
}

#[test]
fn bad_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[thresholds]\npercentile = 150.0\n").unwrap();
    let o = kgrag(&["build", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn ingest_writes_records_and_sentences() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixtures().join("mini_corpus.jsonl");
    let keywords = fixtures().join("keywords.txt");
    let o = kgrag(&[
        "ingest",
        "--corpus",
        corpus.to_str().unwrap(),
        "--patterns",
        "tungsten,lithium",
        "--keywords",
        keywords.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let records = std::fs::read_to_string(dir.path().join("records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 4);
    assert!(stdout(&o).starts_with("loaded 20 scoped 4 kept 4"));
}

#[test]
fn query_zipf_ask_and_eval_on_a_built_graph() {
    let dir = tempfile::tempdir().unwrap();
    let graph = build_into(dir.path());
    let g = graph.to_str().unwrap();

    let o = kgrag(&[
        "query",
        "--graph",
        g,
        "--cypher",
        "MATCH (a:Abstract)-[:HAS_KEYWORD]->(k:KeyWord) WHERE k.name = 'tungsten' RETURN a.sourceId AS id ORDER BY a.sourceId",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), "id\nA0002\nA0018\n");

    let o = kgrag(&["query", "--graph", g, "--cypher", "MATCH (a:Planet) RETURN a"]);
    assert_eq!(o.status.code(), Some(1));

    let csv = dir.path().join("zipf.csv");
    let o = kgrag(&[
        "zipf",
        "--before",
        dir.path().join("mentions.jsonl").to_str().unwrap(),
        "--after",
        dir.path().join("resolved.jsonl").to_str().unwrap(),
        "--top",
        "500",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(report["c_before"].as_f64().unwrap() > 0.0);
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("table,rank,surface,frequency,fitted"));

    let question = "Which measurements show tungsten erosion at the divertor?";
    let ask = |json: bool| {
        let mut args = vec!["ask", "--graph", g, "--k", "2", "--question", question];
        if json {
            args.push("--json");
        }
        let o = kgrag(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    let first = ask(true);
    assert_eq!(first, ask(true));
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    for key in ["answer", "sources", "triplets", "hits"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    let sources = v["sources"].as_array().unwrap();
    assert!(!sources.is_empty() && sources.len() <= 2);
    assert!(sources.iter().all(|s| s["url"].as_str().unwrap().starts_with("https://example.org/")));
    assert!(ask(false).contains("Sources:"));

    let report = dir.path().join("report.json");
    let o = kgrag(&[
        "eval",
        "--graph",
        g,
        "--cases",
        "auto:expert",
        "--k",
        "3",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["n_cases"], 10);
    assert_eq!(r["top1_rate"], 1.0);
}

#[test]
fn enrich_writes_predicates_and_triplets() {
    let dir = tempfile::tempdir().unwrap();
    let graph = build_into(dir.path());
    let out = dir.path().join("enriched.jsonl");
    let triplets = dir.path().join("triplets.jsonl");
    let o = kgrag(&[
        "--jobs",
        "2",
        "enrich",
        "--graph",
        graph.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--triplets",
        triplets.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.exists());
    let lines = std::fs::read_to_string(&triplets).unwrap().lines().count();
    assert!(lines >= 1);
    assert_ne!(std::fs::read(&out).unwrap(), std::fs::read(&graph).unwrap());
}
