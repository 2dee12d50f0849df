//! Provider contracts for sentence embeddings and dependency parses.
//!
//! The metric layer only sees [`Embedder`] and [`DependencyParser`]. Each has a
//! deterministic fallback that needs no model download ([`HashedBagOfWords`],
//! [`ChainParser`]), a fixture-backed implementation ([`GoldenParser`]) and an
//! HTTP adapter for external services.

mod descriptor;
mod embedding;
mod parse;

use thiserror::Error;

pub use descriptor::{EmbedderDescriptor, EmbedderKind, ParserDescriptor, ParserKind};
pub use embedding::{cosine_similarity, EmbeddingVector, HashedBagOfWords, HttpEmbedder, FALLBACK_DIMENSION, FALLBACK_SEED};
pub use parse::{
    mean_token_depth, tree_depth, ChainParser, DependencyParse, GoldenParse, GoldenParser, HttpParser,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyzerError {
    #[error("provider {provider} unavailable after {attempts} attempt(s): {message}")]
    ProviderUnavailable {
        provider: String,
        attempts: u32,
        message: String,
    },
    #[error("embedding dimension {got} differs from {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid dependency tree: {0}")]
    InvalidTree(String),
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding has zero or non-finite norm")]
    DegenerateVector,
    #[error("no golden parse for {0:?}")]
    MissingGolden(String),
    #[error("cannot load provider fixture {path}: {message}")]
    Fixture { path: String, message: String },
    #[error("provider misconfigured: {0}")]
    Config(String),
}

pub type Result<T, E = AnalyzerError> = std::result::Result<T, E>;

pub trait Embedder: Send + Sync {
    fn id(&self) -> &str;

    /// Most concurrent batch calls the provider accepts.
    fn max_concurrency(&self) -> usize {
        usize::MAX
    }

    /// One unit-norm vector per text, in order. Identical strings map to
    /// identical vectors within a run.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>>;
}

pub trait DependencyParser: Send + Sync {
    fn id(&self) -> &str;

    fn max_concurrency(&self) -> usize {
        usize::MAX
    }

    /// A valid single-rooted tree over `tokens`. Invalid provider output is
    /// rejected, never repaired.
    fn parse_heads(&self, tokens: &[String]) -> Result<DependencyParse>;
}
