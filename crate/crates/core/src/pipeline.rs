//! Configuration and the staged build: ingest, NER, resolution, graph and
//! co-occurrence edges, then relation enrichment.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    filter_relevant, load_corpus, scope_by_title, split_sentences, AbbreviationGuard, AbstractRecord, PatternMode,
    SentenceUnit,
};
use crate::embedding::{Embedder, EmbeddingConfig};
use crate::error::{Error, Result};
use crate::graph::{build_graph, PropertyGraph};
use crate::llm::{Gateway, GatewaySettings, HttpProvider, LlmProvider, ProviderConfig, StubProvider, StubTables};
use crate::ner::{extract_all, write_mentions, EntityMention};
use crate::relations::{build_cc_edges, enrich, CandidateSettings, DegreeSpread, EnrichReport};
use crate::resolution::{
    apply_substitutions, build_substitutions, entity_dictionary, finalize_rules, normalize_mentions, write_resolved,
    write_rules, NormalizationStats, ResolvedEntity, SubstitutionRule,
};
use crate::text::tokenize;

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub path: PathBuf,
    /// Title patterns; empty keeps every record.
    pub patterns: Vec<String>,
    pub regex: bool,
    /// One domain keyword per line; absent skips the relevance filter.
    pub keywords: Option<PathBuf>,
    /// Extra abbreviations that do not end a sentence.
    pub abbreviations: Vec<String>,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection {
            path: PathBuf::from("corpus.jsonl"),
            patterns: Vec::new(),
            regex: false,
            keywords: None,
            abbreviations: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default)]
pub struct ProviderSection {
    /// `stub` or `http`.
    pub kind: String,
    /// Directory with stub tables; absent uses the bundled tables.
    pub stub_tables: Option<PathBuf>,
    pub jobs: usize,
    pub token_budget: usize,
    #[serde(flatten)]
    pub http: ProviderConfig,
}

impl Default for ProviderSection {
    fn default() -> Self {
        let g = GatewaySettings::default();
        ProviderSection {
            kind: "stub".into(),
            stub_tables: None,
            jobs: g.jobs,
            token_budget: g.token_budget,
            http: ProviderConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSection {
    /// Zipf window.
    pub top_n: usize,
    /// Size of the entity dictionary sent for acronym and chemical resolution.
    pub dictionary_size: usize,
    pub percentile: f64,
    pub degree_spread: DegreeSpread,
    pub sigmas: f64,
    /// Sentences per pair for relation extraction.
    pub k_sentences: usize,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        let c = CandidateSettings::default();
        ThresholdSection {
            top_n: crate::zipf::DEFAULT_TOP_N,
            dictionary_size: 500,
            percentile: c.percentile,
            degree_spread: c.spread,
            sigmas: c.sigmas,
            k_sentences: crate::relations::DEFAULT_SENTENCES_PER_PAIR,
        }
    }
}

impl ThresholdSection {
    pub fn candidate_settings(&self) -> CandidateSettings {
        CandidateSettings {
            percentile: self.percentile,
            spread: self.degree_spread,
            sigmas: self.sigmas,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

impl OutputSection {
    pub fn graph(&self) -> PathBuf {
        self.dir.join("graph.jsonl")
    }
    pub fn records(&self) -> PathBuf {
        self.dir.join("records.jsonl")
    }
    pub fn sentences(&self) -> PathBuf {
        self.dir.join("sentences.jsonl")
    }
    pub fn mentions(&self) -> PathBuf {
        self.dir.join("mentions.jsonl")
    }
    pub fn rules(&self) -> PathBuf {
        self.dir.join("rules.jsonl")
    }
    pub fn resolved(&self) -> PathBuf {
        self.dir.join("resolved.jsonl")
    }
    pub fn triplets(&self) -> PathBuf {
        self.dir.join("triplets.jsonl")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: CorpusSection,
    pub provider: ProviderSection,
    pub embedding: EmbeddingConfig,
    pub thresholds: ThresholdSection,
    pub output: OutputSection,
}

impl PipelineConfig {
    /// Reads a TOML config; relative paths are taken from the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus.path);
        if let Some(k) = self.corpus.keywords.as_mut() {
            fix(k);
        }
        if let Some(t) = self.provider.stub_tables.as_mut() {
            fix(t);
        }
        fix(&mut self.output.dir);
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.thresholds;
        if !(0.0..=100.0).contains(&t.percentile) {
            return Err(Error::Config(format!("thresholds.percentile must lie in [0, 100], got {}", t.percentile)));
        }
        if t.sigmas < 0.0 || !t.sigmas.is_finite() {
            return Err(Error::Config(format!("thresholds.sigmas must be non-negative, got {}", t.sigmas)));
        }
        for (name, v) in [("top_n", t.top_n), ("dictionary_size", t.dictionary_size), ("k_sentences", t.k_sentences)] {
            if v == 0 {
                return Err(Error::Config(format!("thresholds.{name} must be positive")));
            }
        }
        if self.provider.jobs == 0 {
            return Err(Error::Config("provider.jobs must be positive".into()));
        }
        if !matches!(self.provider.kind.as_str(), "stub" | "http") {
            return Err(Error::Config(format!("unknown provider kind `{}`", self.provider.kind)));
        }
        if self.embedding.dimension == 0 {
            return Err(Error::Config("embedding.dimension must be positive".into()));
        }
        Ok(())
    }

    pub fn gateway(&self) -> Result<Gateway> {
        let provider: Box<dyn LlmProvider> = match self.provider.kind.as_str() {
            "stub" => {
                let tables = match &self.provider.stub_tables {
                    Some(dir) => StubTables::load(dir)?,
                    None => StubTables::bundled(),
                };
                Box::new(StubProvider::new(tables))
            }
            "http" => {
                self.provider.http.validate()?;
                Box::new(HttpProvider::new(self.provider.http.clone())?)
            }
            other => return Err(Error::Config(format!("unknown provider kind `{other}`"))),
        };
        Ok(Gateway::new(
            provider,
            GatewaySettings {
                token_budget: self.provider.token_budget,
                jobs: self.provider.jobs,
            },
        ))
    }

    pub fn embedder(&self) -> Result<Box<dyn Embedder>> {
        self.embedding.build()
    }
}

fn timed<T>(stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    log::info!("{stage}: {:.3}s", start.elapsed().as_secs_f64());
    out
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub loaded: usize,
    pub scoped: usize,
    pub records: Vec<AbstractRecord>,
    pub sentences: Vec<SentenceUnit>,
}

pub fn read_keywords(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

/// Loads, scopes by title, filters by relevance and splits into sentences.
pub fn ingest(cfg: &CorpusSection, gateway: &Gateway) -> Result<Ingested> {
    let corpus = timed("load", || load_corpus(&cfg.path))?;
    let loaded = corpus.records.len();
    let records = if cfg.patterns.is_empty() {
        corpus.records
    } else {
        let mode = if cfg.regex { PatternMode::Regex } else { PatternMode::Substring };
        scope_by_title(&corpus.records, &cfg.patterns, mode)?.records
    };
    let scoped = records.len();
    let records = match &cfg.keywords {
        Some(path) => {
            let keywords = read_keywords(path)?;
            timed("relevance", || filter_relevant(&records, &keywords, gateway))?
        }
        None => records,
    };
    let guard = AbbreviationGuard::new(
        crate::corpus::DEFAULT_ABBREVIATIONS
            .iter()
            .copied()
            .chain(cfg.abbreviations.iter().map(String::as_str)),
    );
    let sentences = records
        .iter()
        .flat_map(|r| split_sentences(&r.id, &r.text, &guard))
        .collect();
    Ok(Ingested {
        loaded,
        scoped,
        records,
        sentences,
    })
}

#[derive(Debug, Clone)]
pub struct Built {
    pub ingested: Ingested,
    pub mentions: Vec<EntityMention>,
    pub normalization: NormalizationStats,
    pub rules: Vec<SubstitutionRule>,
    pub resolved: Vec<ResolvedEntity>,
    pub graph: PropertyGraph,
}

/// Ingest, NER, normalization, substitutions, graph materialization and
/// co-occurrence edges.
pub fn build(cfg: &PipelineConfig, gateway: &Gateway, embedder: &dyn Embedder) -> Result<Built> {
    let ingested = timed("ingest", || ingest(&cfg.corpus, gateway))?;
    let mentions = timed("ner", || extract_all(&ingested.sentences, gateway))?;
    let texts: HashMap<(String, usize), String> = ingested
        .sentences
        .iter()
        .map(|s| ((s.abstract_id.clone(), s.index), s.text.clone()))
        .collect();
    let (canonical, normalization) = normalize_mentions(&mentions, &texts)?;
    let dictionary = entity_dictionary(&canonical, cfg.thresholds.dictionary_size);
    let vocabulary: BTreeSet<String> = ingested.sentences.iter().flat_map(|s| tokenize(&s.text)).collect();
    let rules = timed("resolution", || {
        let proposals = build_substitutions(&dictionary, &vocabulary, gateway);
        let counts: HashMap<&str, u64> = dictionary.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        Ok(finalize_rules(proposals, &counts))
    })?;
    let resolved = apply_substitutions(&canonical, &rules)?;
    let mut graph = timed("graph", || build_graph(&ingested.records, &ingested.sentences, &resolved, embedder))?;
    timed("cc", || build_cc_edges(&mut graph))?;
    Ok(Built {
        ingested,
        mentions,
        normalization,
        rules,
        resolved,
        graph,
    })
}

impl Built {
    pub fn write(&self, out: &OutputSection) -> Result<()> {
        std::fs::create_dir_all(&out.dir).map_err(|e| Error::io(&out.dir, e))?;
        crate::corpus::write_corpus(&self.ingested.records, out.records())?;
        crate::ner::write_sentences(&out.sentences(), &self.ingested.sentences)?;
        write_mentions(&out.mentions(), &self.mentions)?;
        write_rules(&out.rules(), &self.rules)?;
        write_resolved(&out.resolved(), &self.resolved)?;
        self.graph.save(&out.graph())
    }
}

/// Selects candidate pairs and stores their predicates on the CC edges.
pub fn run_enrich(
    graph: &mut PropertyGraph,
    thresholds: &ThresholdSection,
    gateway: &Gateway,
    embedder: &dyn Embedder,
) -> Result<EnrichReport> {
    timed("enrich", || {
        enrich(
            graph,
            gateway,
            embedder,
            &thresholds.candidate_settings(),
            thresholds.k_sentences,
        )
    })
}
