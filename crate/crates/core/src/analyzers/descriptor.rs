//! Provider descriptors as they appear in a run configuration.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    AnalyzerError, ChainParser, DependencyParser, Embedder, GoldenParser, HashedBagOfWords,
    HttpEmbedder, HttpParser, Result, FALLBACK_DIMENSION,
};
use crate::retry::RetryPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbedderKind {
    HashedBow,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedderDescriptor {
    #[serde(default = "default_embedder_name")]
    pub name: String,
    pub kind: EmbedderKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    /// Vector size for the hashed fallback.
    #[serde(default)]
    pub dimension: Option<usize>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_max_concurrency")]
    pub max_concurrency: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    /// Environment variable holding the bearer token, if any.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub retry: RetryPolicy,
}

fn default_embedder_name() -> String {
    "embedder".into()
}
fn default_parser_name() -> String {
    "parser".into()
}
fn default_batch_size() -> usize {
    32
}
fn default_max_concurrency() -> usize {
    4
}
fn default_timeout_secs() -> u64 {
    60
}

fn api_key(env: &Option<String>) -> Result<Option<String>> {
    match env {
        None => Ok(None),
        Some(var) => std::env::var(var)
            .map(Some)
            .map_err(|_| AnalyzerError::Config(format!("environment variable {var} is not set"))),
    }
}

impl EmbedderDescriptor {
    pub fn fallback() -> Self {
        Self {
            name: "hashed-bow".into(),
            kind: EmbedderKind::HashedBow,
            endpoint: None,
            model: None,
            dimension: Some(FALLBACK_DIMENSION),
            batch_size: default_batch_size(),
            max_concurrency: default_max_concurrency(),
            timeout_secs: default_timeout_secs(),
            api_key_env: None,
            retry: RetryPolicy::default(),
        }
    }

    pub fn build(&self) -> Result<Arc<dyn Embedder>> {
        match self.kind {
            EmbedderKind::HashedBow => Ok(Arc::new(HashedBagOfWords::new(
                self.dimension.unwrap_or(FALLBACK_DIMENSION),
            ))),
            EmbedderKind::Http => {
                let endpoint = self.endpoint.clone().ok_or_else(|| {
                    AnalyzerError::Config(format!("embedder {}: endpoint required", self.name))
                })?;
                Ok(Arc::new(HttpEmbedder::new(self, endpoint, api_key(&self.api_key_env)?)?))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParserKind {
    /// Right-branching chain; non-semantic, for offline runs.
    Chain,
    /// Frozen parses loaded from a JSON fixture.
    Golden,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParserDescriptor {
    #[serde(default = "default_parser_name")]
    pub name: String,
    pub kind: ParserKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Golden parse fixture.
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default = "default_max_concurrency")]
    pub max_concurrency: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub retry: RetryPolicy,
}

impl ParserDescriptor {
    pub fn fallback() -> Self {
        Self {
            name: "chain".into(),
            kind: ParserKind::Chain,
            endpoint: None,
            path: None,
            max_concurrency: default_max_concurrency(),
            timeout_secs: default_timeout_secs(),
            api_key_env: None,
            retry: RetryPolicy::default(),
        }
    }

    pub fn build(&self) -> Result<Arc<dyn DependencyParser>> {
        match self.kind {
            ParserKind::Chain => Ok(Arc::new(ChainParser)),
            ParserKind::Golden => {
                let path = self.path.as_ref().ok_or_else(|| {
                    AnalyzerError::Config(format!("parser {}: golden parser needs a path", self.name))
                })?;
                Ok(Arc::new(GoldenParser::from_path(path)?))
            }
            ParserKind::Http => {
                let endpoint = self.endpoint.clone().ok_or_else(|| {
                    AnalyzerError::Config(format!("parser {}: endpoint required", self.name))
                })?;
                Ok(Arc::new(HttpParser::new(self, endpoint, api_key(&self.api_key_env)?)?))
            }
        }
    }
}
