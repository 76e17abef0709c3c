use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use kgrag_core::embedding::{Embedder, HashingEmbedder};
use kgrag_core::eval::{make_cases_from_graph, read_cases, run_eval, CaseMode, DEFAULT_CASES};
use kgrag_core::graph::PropertyGraph;
use kgrag_core::llm::Gateway;
use kgrag_core::pipeline::{self, PipelineConfig};
use kgrag_core::rag::{self, RetrievalRequest};
use kgrag_core::{cypher, ner, resolution, zipf};

#[derive(Parser, Debug)]
#[command(name = "kgrag", version, about = "Knowledge-graph construction and KG-RAG over scientific abstracts")]
struct Cli {
    /// Maximum in-flight provider calls.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// LLM provider, overriding the config.
    #[arg(long, global = true, value_parser = ["stub", "http"])]
    provider: Option<String>,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load, scope and filter a corpus, then split it into sentences.
    Ingest(IngestArgs),
    /// Run ingest, NER, resolution and graph construction.
    Build(BuildArgs),
    /// Extract relations for the selected entity pairs.
    Enrich(EnrichArgs),
    /// Compare rank-frequency fits before and after resolution.
    Zipf(ZipfArgs),
    /// Run a query against a graph snapshot and print CSV.
    Query(QueryArgs),
    /// Answer a question from a graph snapshot.
    Ask(AskArgs),
    /// Measure retrieval accuracy on a set of cases.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct ConfigArg {
    /// Pipeline config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Comma-separated title patterns.
    #[arg(long, value_delimiter = ',')]
    patterns: Option<Vec<String>>,
    /// Treat patterns as regular expressions.
    #[arg(long)]
    regex: bool,
    /// Domain keyword file, one per line.
    #[arg(long)]
    keywords: Option<PathBuf>,
    /// Output directory for records.jsonl and sentences.jsonl.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EnrichArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Graph snapshot; defaults to the config's output graph.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Where to write the enriched graph; defaults to overwriting the input.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Triplet listing (JSON Lines).
    #[arg(long)]
    triplets: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ZipfArgs {
    /// Mentions file written by `build`.
    #[arg(long)]
    before: PathBuf,
    /// Resolved entities file written by `build`.
    #[arg(long)]
    after: PathBuf,
    #[arg(long, default_value_t = zipf::DEFAULT_TOP_N)]
    top: usize,
    /// Keep multi-word surfaces too.
    #[arg(long)]
    all_words: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct QueryArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    cypher: String,
}

#[derive(Args, Debug)]
struct AskArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long)]
    question: String,
    /// Print the answer record as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    graph: PathBuf,
    /// Cases file (JSON Lines) or `auto:expert` / `auto:persona`.
    #[arg(long)]
    cases: String,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Number of generated cases for `auto:` modes.
    #[arg(long, default_value_t = DEFAULT_CASES)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

struct Globals {
    jobs: Option<usize>,
    provider: Option<String>,
}

impl Globals {
    fn config(&self, path: Option<&Path>) -> Result<PipelineConfig> {
        let mut cfg = match path {
            Some(p) => PipelineConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
            None => PipelineConfig::default(),
        };
        if let Some(j) = self.jobs {
            cfg.provider.jobs = j;
        }
        if let Some(p) = &self.provider {
            cfg.provider.kind = p.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    let g = Globals {
        jobs: cli.jobs,
        provider: cli.provider,
    };
    match cli.command {
        Command::Ingest(a) => ingest(&g, a),
        Command::Build(a) => build(&g, a),
        Command::Enrich(a) => enrich(&g, a),
        Command::Zipf(a) => zipf_cmd(a),
        Command::Query(a) => query(a),
        Command::Ask(a) => ask(&g, a),
        Command::Eval(a) => eval(&g, a),
    }
}

fn load_graph(path: &Path) -> Result<PropertyGraph> {
    if !path.exists() {
        bail!("graph snapshot {} does not exist; run `kgrag build` first", path.display());
    }
    PropertyGraph::load(path).with_context(|| format!("loading graph {}", path.display()))
}

/// Without a config the embedder matches the graph's stored dimension.
fn embedder_for(cfg: &PipelineConfig, explicit: bool, graph: &PropertyGraph) -> Result<Box<dyn Embedder>> {
    if explicit {
        return Ok(cfg.embedder()?);
    }
    let dim = graph.embedding_dimension().unwrap_or(cfg.embedding.dimension);
    Ok(Box::new(HashingEmbedder::new(dim, cfg.embedding.seed)))
}

fn ingest(g: &Globals, a: IngestArgs) -> Result<()> {
    let mut cfg = g.config(a.config.config.as_deref())?;
    if let Some(c) = a.corpus {
        cfg.corpus.path = c;
    }
    if let Some(p) = a.patterns {
        cfg.corpus.patterns = p;
    }
    if a.regex {
        cfg.corpus.regex = true;
    }
    if let Some(k) = a.keywords {
        cfg.corpus.keywords = Some(k);
    }
    if let Some(o) = a.out {
        cfg.output.dir = o;
    }
    let gateway = cfg.gateway()?;
    let ingested = pipeline::ingest(&cfg.corpus, &gateway)?;
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    kgrag_core::corpus::write_corpus(&ingested.records, cfg.output.records())?;
    ner::write_sentences(&cfg.output.sentences(), &ingested.sentences)?;
    println!(
        "loaded {} scoped {} kept {} sentences {}",
        ingested.loaded,
        ingested.scoped,
        ingested.records.len(),
        ingested.sentences.len()
    );
    Ok(())
}

fn build(g: &Globals, a: BuildArgs) -> Result<()> {
    let mut cfg = g.config(Some(&a.config))?;
    if let Some(o) = a.out {
        cfg.output.dir = o;
    }
    let gateway = cfg.gateway()?;
    let embedder = cfg.embedder()?;
    let built = pipeline::build(&cfg, &gateway, embedder.as_ref())?;
    built.write(&cfg.output)?;
    let c = built.graph.counts();
    println!(
        "records {} sentences {} mentions {} rules {} entities {} nodes {} edges {} -> {}",
        built.ingested.records.len(),
        built.ingested.sentences.len(),
        built.mentions.len(),
        built.rules.len(),
        built.resolved.len(),
        c.nodes,
        c.edges,
        cfg.output.graph().display()
    );
    report_diagnostics(&gateway);
    Ok(())
}

fn enrich(g: &Globals, a: EnrichArgs) -> Result<()> {
    let cfg = g.config(a.config.config.as_deref())?;
    let input = match (a.graph, a.config.config.is_some()) {
        (Some(p), _) => p,
        (None, true) => cfg.output.graph(),
        (None, false) => bail!("either --graph or --config is required"),
    };
    let mut graph = load_graph(&input)?;
    let embedder = embedder_for(&cfg, a.config.config.is_some(), &graph)?;
    let gateway = cfg.gateway()?;
    let report = pipeline::run_enrich(&mut graph, &cfg.thresholds, &gateway, embedder.as_ref())?;
    let out = a.out.unwrap_or(input);
    graph.save(&out)?;
    let triplets = a
        .triplets
        .or_else(|| a.config.config.is_some().then(|| cfg.output.triplets()));
    if let Some(t) = &triplets {
        report.write_triplets(t)?;
    }
    println!(
        "candidates {} pairs {} triplets {} skipped {} -> {}",
        report.candidates,
        report.pairs,
        report.triplets.len(),
        report.skipped,
        out.display()
    );
    report_diagnostics(&gateway);
    Ok(())
}

fn zipf_cmd(a: ZipfArgs) -> Result<()> {
    let mentions = ner::read_mentions(&a.before)?;
    let resolved = resolution::read_resolved(&a.after)?;
    let single = !a.all_words;
    let before = zipf::rank_frequencies(mentions.iter().map(|m| (m.surface.as_str(), 1)), a.top, single);
    let after = zipf::rank_frequencies(
        resolved.iter().map(|e| (e.canonical.as_str(), e.mention_count as u64)),
        a.top,
        single,
    );
    let report = zipf::zipf_report(&before, &after)?;
    report.write_csv(&a.out)?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn query(a: QueryArgs) -> Result<()> {
    let graph = load_graph(&a.graph)?;
    let q = cypher::parse_validated(&a.cypher)?;
    let table = cypher::execute(&q, &graph)?;
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    table.write_csv(&mut lock)?;
    lock.flush()?;
    Ok(())
}

fn ask(g: &Globals, a: AskArgs) -> Result<()> {
    let cfg = g.config(a.config.config.as_deref())?;
    let graph = load_graph(&a.graph)?;
    let embedder = embedder_for(&cfg, a.config.config.is_some(), &graph)?;
    let gateway = cfg.gateway()?;
    let request = RetrievalRequest::new(a.question, a.k)?;
    let answer = match rag::answer(&request, &graph, &gateway, embedder.as_ref()) {
        Ok(answer) => answer,
        Err(kgrag_core::Error::Generation { source, partial }) => {
            log::warn!("answer generation failed: {source}; printing the extractive answer");
            *partial
        }
        Err(e) => return Err(e.into()),
    };
    if a.json {
        println!("{}", answer.to_json());
    } else {
        println!("{}", answer.text);
        if !answer.sources.is_empty() {
            println!();
            println!("Sources:");
            for s in &answer.sources {
                println!("- {} <{}>", s.title, s.url);
            }
        }
    }
    Ok(())
}

fn eval(g: &Globals, a: EvalArgs) -> Result<()> {
    let cfg = g.config(a.config.config.as_deref())?;
    let graph = load_graph(&a.graph)?;
    let cases = match a.cases.strip_prefix("auto:") {
        Some(mode) => {
            let mode: CaseMode = mode.parse()?;
            make_cases_from_graph(&graph, mode, a.seed, a.n)
        }
        None => read_cases(Path::new(&a.cases))?,
    };
    let embedder = embedder_for(&cfg, a.config.config.is_some(), &graph)?;
    let gateway = cfg.gateway()?;
    let report = run_eval(&cases, &graph, a.k, &gateway, embedder.as_ref())?;
    let text = serde_json::to_string_pretty(&report)?;
    std::fs::write(&a.out, text + "\n").with_context(|| format!("writing {}", a.out.display()))?;
    let rate = |r: Option<f64>| r.map_or("n/a".to_string(), |v| format!("{v:.3}"));
    println!(
        "cases {} errors {} top1 {} top{} {}",
        report.n_cases,
        report.errors,
        rate(report.top1_rate),
        report.k,
        rate(report.topk_rate)
    );
    Ok(())
}

fn report_diagnostics(gateway: &Gateway) {
    log::info!("provider {}: {:?}", gateway.provider_id(), gateway.diagnostics());
}
