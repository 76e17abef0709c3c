//! Provider contract for every LLM call in the pipeline.
//!
//! A [`Gateway`] renders a kind-specific [`PromptContext`] through a versioned
//! template, sends it to an [`LlmProvider`], and parses the reply into a
//! [`StructuredReply`]. Fan-out goes through [`Gateway::map_ordered`], which
//! bounds concurrency and returns results in request order.

mod http;
mod prompt;
mod reply;
mod stub;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use http::HttpProvider;
pub use prompt::{render_prompt, section, Document, Prompt, PromptContext, TEMPLATE_VERSION};
pub use reply::{parse_reply, ParsedReply};
pub use stub::{StubProvider, StubTables};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptKind {
    RelevanceCheck,
    Ner,
    AcronymResolution,
    ChemicalStandardization,
    RelationExtraction,
    CypherGeneration,
    AnswerGeneration,
}

/// Kind-specific payload parsed from a provider reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StructuredReply {
    Relevance(bool),
    Entities(Vec<(String, crate::taxonomy::CategoryType)>),
    Substitutions(Vec<(String, String)>),
    Relation {
        subject: String,
        predicate: String,
        object: String,
    },
    Query(String),
    Answer(String),
}

impl StructuredReply {
    pub fn kind(&self) -> &'static str {
        match self {
            StructuredReply::Relevance(_) => "relevance",
            StructuredReply::Entities(_) => "entities",
            StructuredReply::Substitutions(_) => "substitutions",
            StructuredReply::Relation { .. } => "relation",
            StructuredReply::Query(_) => "query",
            StructuredReply::Answer(_) => "answer",
        }
    }
}

pub trait LlmProvider: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, prompt: &Prompt) -> Result<String>;
}

/// Connection settings for an HTTP chat-completion provider. The credential
/// itself is read from the environment variable named in `api_key_env`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub endpoint: String,
    pub model_id: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub api_key_env: String,
    pub retries: u32,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model_id: "meta.llama3-1-405b-instruct-v1:0".into(),
            max_tokens: 1024,
            temperature: 0.0,
            api_key_env: "KGRAG_API_KEY".into(),
            retries: 3,
            backoff_ms: 500,
            timeout_secs: 120,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(Error::Config(format!(
                "provider.temperature must lie in [0, 1], got {}",
                self.temperature
            )));
        }
        if self.endpoint.trim().is_empty() {
            return Err(Error::Config("provider.endpoint is empty".into()));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GatewaySettings {
    /// Whitespace-token ceiling for every prompt kind except answer generation.
    pub token_budget: usize,
    /// Maximum in-flight provider calls.
    pub jobs: usize,
}

impl Default for GatewaySettings {
    fn default() -> Self {
        GatewaySettings {
            token_budget: 4096,
            jobs: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Diagnostics {
    pub calls: usize,
    pub unknown_categories: usize,
    pub truncated_prompts: usize,
    pub parse_failures: usize,
}

pub struct Gateway {
    provider: Box<dyn LlmProvider>,
    settings: GatewaySettings,
    pool: rayon::ThreadPool,
    calls: AtomicUsize,
    unknown_categories: AtomicUsize,
    truncated_prompts: AtomicUsize,
    parse_failures: AtomicUsize,
}

impl Gateway {
    pub fn new(provider: Box<dyn LlmProvider>, settings: GatewaySettings) -> Self {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(settings.jobs.max(1))
            .thread_name(|i| format!("kgrag-gateway-{i}"))
            .build()
            .expect("thread pool");
        Gateway {
            provider,
            settings,
            pool,
            calls: AtomicUsize::new(0),
            unknown_categories: AtomicUsize::new(0),
            truncated_prompts: AtomicUsize::new(0),
            parse_failures: AtomicUsize::new(0),
        }
    }

    pub fn provider_id(&self) -> &str {
        self.provider.id()
    }

    pub fn settings(&self) -> GatewaySettings {
        self.settings
    }

    pub fn render(&self, ctx: &PromptContext) -> Result<Prompt> {
        let prompt = render_prompt(ctx, Some(self.settings.token_budget))?;
        if prompt.truncated {
            self.truncated_prompts.fetch_add(1, Ordering::Relaxed);
            log::warn!("{:?} prompt truncated to fit the token budget", prompt.kind);
        }
        Ok(prompt)
    }

    /// Sends a rendered prompt to the provider.
    pub fn complete(&self, prompt: &Prompt) -> Result<String> {
        if prompt.text.trim().is_empty() {
            return Err(Error::Precondition("prompt is empty".into()));
        }
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.provider.complete(prompt)
    }

    /// Render, complete and parse in one step.
    pub fn ask(&self, ctx: &PromptContext) -> Result<StructuredReply> {
        let prompt = self.render(ctx)?;
        let raw = self.complete(&prompt)?;
        match parse_reply(prompt.kind, &raw) {
            Ok(parsed) => {
                self.unknown_categories
                    .fetch_add(parsed.unknown_categories, Ordering::Relaxed);
                Ok(parsed.reply)
            }
            Err(e) => {
                self.parse_failures.fetch_add(1, Ordering::Relaxed);
                Err(e)
            }
        }
    }

    /// Applies `f` to every item on the gateway's bounded pool; results come
    /// back in input order.
    pub fn map_ordered<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        use rayon::prelude::*;
        self.pool.install(|| items.par_iter().map(&f).collect())
    }

    pub fn diagnostics(&self) -> Diagnostics {
        Diagnostics {
            calls: self.calls.load(Ordering::Relaxed),
            unknown_categories: self.unknown_categories.load(Ordering::Relaxed),
            truncated_prompts: self.truncated_prompts.load(Ordering::Relaxed),
            parse_failures: self.parse_failures.load(Ordering::Relaxed),
        }
    }
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("provider", &self.provider.id())
            .field("settings", &self.settings)
            .finish()
    }
}
