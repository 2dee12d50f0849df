use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{AnalyzerError, Embedder, EmbedderDescriptor, Result};
use crate::digest::fnv1a64;
use crate::http::JsonEndpoint;
use crate::sync::ConcurrencyLimit;

pub const FALLBACK_DIMENSION: usize = 256;
/// Fixed hash seed so fallback vectors are identical across processes and platforms.
pub const FALLBACK_SEED: u64 = 0x6364_7362_656e_6368;

const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// A unit-norm embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// L2-normalizes `values`.
    pub fn from_raw(values: Vec<f64>) -> Result<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(AnalyzerError::DegenerateVector);
        }
        Ok(Self {
            values: values.into_iter().map(|v| v / norm).collect(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_NORM_TOLERANCE
    }
}

/// Cosine similarity of two unit vectors, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    dot.clamp(-1.0, 1.0)
}

/// Fallback embedder: term counts hashed into `dimension` buckets, then
/// L2-normalized. Non-semantic; two texts with disjoint vocabularies are
/// orthogonal unless their tokens collide in a bucket.
#[derive(Debug, Clone)]
pub struct HashedBagOfWords {
    id: String,
    dimension: usize,
}

impl Default for HashedBagOfWords {
    fn default() -> Self {
        Self::new(FALLBACK_DIMENSION)
    }
}

impl HashedBagOfWords {
    pub fn new(dimension: usize) -> Self {
        Self {
            id: format!("hashed-bow-{dimension}"),
            dimension: dimension.max(1),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a64(FALLBACK_SEED, token.as_bytes()) % self.dimension as u64) as usize
    }

    pub fn embed_one(&self, text: &str) -> Result<EmbeddingVector> {
        let mut counts = vec![0.0; self.dimension];
        let mut any = false;
        for token in text.split_whitespace() {
            counts[self.bucket(&token.to_lowercase())] += 1.0;
            any = true;
        }
        if !any {
            return Err(AnalyzerError::EmptyText);
        }
        EmbeddingVector::from_raw(counts)
    }
}

impl Embedder for HashedBagOfWords {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        texts.iter().map(|t| self.embed_one(t)).collect()
    }
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
    #[serde(default)]
    index: Option<usize>,
}

/// Adapter for an embeddings service speaking the common
/// `{model, input: [..]} -> {data: [{embedding, index}]}` contract.
///
/// Returned vectors are re-normalized. Results are cached per text for the
/// life of the adapter so repeated strings always get the same vector.
pub struct HttpEmbedder {
    id: String,
    model: String,
    batch_size: usize,
    endpoint: JsonEndpoint,
    limit: ConcurrencyLimit,
    cache: Mutex<HashMap<String, EmbeddingVector>>,
    dimension: Mutex<Option<usize>>,
}

impl HttpEmbedder {
    pub fn new(desc: &EmbedderDescriptor, url: String, api_key: Option<String>) -> Result<Self> {
        Ok(Self {
            endpoint: JsonEndpoint::new(url, desc.timeout_secs, api_key, desc.retry.clone())
                .map_err(AnalyzerError::Config)?,
            id: desc.name.clone(),
            model: desc.model.clone().unwrap_or_default(),
            batch_size: desc.batch_size.max(1),
            limit: ConcurrencyLimit::new(desc.max_concurrency),
            cache: Mutex::new(HashMap::new()),
            dimension: Mutex::new(None),
        })
    }

    fn check_dimension(&self, got: usize) -> Result<()> {
        let mut dim = self.dimension.lock().expect("dimension mutex poisoned");
        match *dim {
            Some(expected) if expected != got => Err(AnalyzerError::DimensionMismatch { expected, got }),
            Some(_) => Ok(()),
            None => {
                *dim = Some(got);
                Ok(())
            }
        }
    }

    fn fetch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let _permit = self.limit.acquire();
        let request = EmbeddingRequest {
            model: &self.model,
            input: texts,
        };
        let (response, _): (EmbeddingResponse, u32) =
            self.endpoint.post(&request).map_err(|f| AnalyzerError::ProviderUnavailable {
                provider: self.id.clone(),
                attempts: f.attempts,
                message: f.message,
            })?;
        if response.data.len() != texts.len() {
            return Err(AnalyzerError::ProviderUnavailable {
                provider: self.id.clone(),
                attempts: 1,
                message: format!("expected {} embeddings, got {}", texts.len(), response.data.len()),
            });
        }
        let mut data = response.data;
        if data.iter().all(|d| d.index.is_some()) {
            data.sort_by_key(|d| d.index);
        }
        data.into_iter()
            .map(|d| {
                self.check_dimension(d.embedding.len())?;
                EmbeddingVector::from_raw(d.embedding)
            })
            .collect()
    }
}

impl Embedder for HttpEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn max_concurrency(&self) -> usize {
        self.limit.max()
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(AnalyzerError::EmptyText);
        }
        let missing: Vec<String> = {
            let cache = self.cache.lock().expect("cache mutex poisoned");
            let mut seen = std::collections::HashSet::new();
            texts
                .iter()
                .filter(|t| !cache.contains_key(*t) && seen.insert(t.as_str()))
                .cloned()
                .collect()
        };
        for chunk in missing.chunks(self.batch_size) {
            let vectors = self.fetch(chunk)?;
            let mut cache = self.cache.lock().expect("cache mutex poisoned");
            for (text, v) in chunk.iter().zip(vectors) {
                cache.entry(text.clone()).or_insert(v);
            }
        }
        let cache = self.cache.lock().expect("cache mutex poisoned");
        Ok(texts.iter().map(|t| cache[t].clone()).collect())
    }
}
