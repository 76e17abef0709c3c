//! Sentence embeddings and similarity scoring.
//!
//! Every embedder returns unit-length vectors, so the scalar product used by
//! the sorter and the cosine similarity used for relation extraction are the
//! same number.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::text::tokenize;

pub const DEFAULT_DIMENSION: usize = 768;
const POSITIONS_PER_TOKEN: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    /// Normalizes `components` to unit L2 length.
    pub fn normalized(components: Vec<f64>) -> Result<Self> {
        let norm = components.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::EmptyEmbedding);
        }
        Ok(EmbeddingVector(
            components.into_iter().map(|x| (x / norm) as f32).collect(),
        ))
    }

    pub fn from_raw(components: Vec<f32>) -> Self {
        EmbeddingVector(components)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
    }
}

/// Scalar product, accumulated in f64 in component order.
pub fn similarity(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(&x, &y)| x as f64 * y as f64)
        .sum())
}

pub trait Embedder: Send + Sync {
    fn id(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;
}

/// Offline embedder: every token is hashed to three signed positions, counts
/// are accumulated and the result is L2-normalized.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dimension: usize,
    seed: u64,
    id: String,
}

impl HashingEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        HashingEmbedder {
            dimension,
            seed,
            id: format!("hashing-{dimension}-{seed}"),
        }
    }

    fn positions(&self, token: &str) -> [(usize, f64); POSITIONS_PER_TOKEN] {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(token.as_bytes());
        let digest = hasher.finalize();
        std::array::from_fn(|i| {
            let chunk: [u8; 8] = digest[i * 8..(i + 1) * 8].try_into().unwrap();
            let h = u64::from_le_bytes(chunk);
            let pos = (h >> 1) as usize % self.dimension;
            let sign = if h & 1 == 0 { 1.0 } else { -1.0 };
            (pos, sign)
        })
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder::new(DEFAULT_DIMENSION, 0)
    }
}

impl Embedder for HashingEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        if text.trim().is_empty() {
            return Err(Error::Precondition("cannot embed empty text".into()));
        }
        let mut acc = vec![0.0f64; self.dimension];
        for token in tokenize(text) {
            for (pos, sign) in self.positions(&token) {
                acc[pos] += sign;
            }
        }
        EmbeddingVector::normalized(acc)
    }
}

/// Remote embedding service. Posts `{"model", "input"}` and reads the first
/// `data[0].embedding` array (OpenAI-compatible), normalizing the result.
pub struct HttpEmbedder {
    endpoint: String,
    model: String,
    dimension: usize,
    agent: ureq::Agent,
    id: String,
}

impl HttpEmbedder {
    pub fn new(endpoint: &str, model: &str, dimension: usize, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpEmbedder {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            dimension,
            agent,
            id: format!("http-{model}"),
        }
    }
}

impl Embedder for HttpEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        if text.trim().is_empty() {
            return Err(Error::Precondition("cannot embed empty text".into()));
        }
        let body = serde_json::json!({ "model": self.model, "input": text });
        let reply: serde_json::Value = self
            .agent
            .post(&self.endpoint)
            .send_json(&body)
            .map_err(|e| Error::Provider(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| Error::Provider(e.to_string()))?;
        let values = reply["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| Error::Provider("embedding reply lacks data[0].embedding".into()))?;
        let components: Vec<f64> = values.iter().filter_map(|v| v.as_f64()).collect();
        if components.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                left: components.len(),
                right: self.dimension,
            });
        }
        EmbeddingVector::normalized(components)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub provider: String,
    pub dimension: usize,
    pub seed: u64,
    pub endpoint: Option<String>,
    pub model: Option<String>,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            provider: "hashing".into(),
            dimension: DEFAULT_DIMENSION,
            seed: 0,
            endpoint: None,
            model: None,
        }
    }
}

impl EmbeddingConfig {
    pub fn build(&self) -> Result<Box<dyn Embedder>> {
        match self.provider.as_str() {
            "hashing" => Ok(Box::new(HashingEmbedder::new(self.dimension, self.seed))),
            "http" => {
                let endpoint = self
                    .endpoint
                    .as_deref()
                    .ok_or_else(|| Error::Config("embedding.endpoint is required for http".into()))?;
                let model = self.model.as_deref().unwrap_or("all-mpnet-base-v2");
                Ok(Box::new(HttpEmbedder::new(
                    endpoint,
                    model,
                    self.dimension,
                    Duration::from_secs(30),
                )))
            }
            other => Err(Error::Config(format!("unknown embedding provider `{other}`"))),
        }
    }
}
