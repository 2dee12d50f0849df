use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{
    Backend, BackendError, FixedScript, HttpChat, Parrot, PlaybackFixture, PlaybackSource, Result,
    ShuffledReference,
};
use crate::corpus::{load_corpus_paths, CorpusFormat};
use crate::retry::RetryPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    HttpChat,
    Playback,
    Parrot,
    FixedScript,
    /// Replies drawn from reference utterances of the same role.
    Shuffled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    /// Playback fixture, or the corpus the shuffled backend draws from.
    #[serde(default)]
    pub fixture: Option<PathBuf>,
    #[serde(default)]
    pub script: Vec<String>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_concurrency")]
    pub max_concurrency: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Shuffled backend seed; unset means the run seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_temperature() -> f64 {
    1.0
}
fn default_max_concurrency() -> usize {
    4
}
fn default_timeout_secs() -> u64 {
    120
}

impl BackendDescriptor {
    pub fn of_kind(kind: BackendKind) -> Self {
        Self {
            kind,
            endpoint: None,
            model: None,
            fixture: None,
            script: Vec::new(),
            temperature: default_temperature(),
            max_concurrency: default_max_concurrency(),
            timeout_secs: default_timeout_secs(),
            api_key_env: None,
            retry: RetryPolicy::default(),
            seed: None,
        }
    }

    /// Checks everything that can be checked without network access.
    pub fn validate(&self, name: &str) -> Result<()> {
        let bad = |msg: &str| Err(BackendError::Config(format!("backend {name}: {msg}")));
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return bad("temperature must be a finite number >= 0");
        }
        match self.kind {
            BackendKind::HttpChat => {
                if self.endpoint.is_none() {
                    return bad("http-chat needs an endpoint");
                }
                if self.model.is_none() {
                    return bad("http-chat needs a model");
                }
            }
            BackendKind::Playback | BackendKind::Shuffled => match &self.fixture {
                None => return bad("a fixture path is required"),
                Some(p) if !p.exists() => return bad(&format!("fixture {} does not exist", p.display())),
                Some(_) => {}
            },
            BackendKind::FixedScript => {
                if self.script.is_empty() {
                    return bad("fixed-script needs a non-empty script");
                }
            }
            BackendKind::Parrot => {}
        }
        Ok(())
    }

    pub fn build(&self, name: &str) -> Result<Backend> {
        self.validate(name)?;
        let source: Box<dyn super::CompletionSource> = match self.kind {
            BackendKind::Parrot => Box::new(Parrot),
            BackendKind::FixedScript => Box::new(FixedScript::new(self.script.clone())?),
            BackendKind::Playback => {
                let path = self.fixture.as_ref().expect("validated");
                Box::new(PlaybackSource::new(PlaybackFixture::load(path)?))
            }
            BackendKind::Shuffled => {
                let path = self.fixture.clone().expect("validated");
                let convs = load_corpus_paths(&[path], CorpusFormat::Auto).map_err(|e| BackendError::Fixture {
                    path: self.fixture.as_ref().unwrap().display().to_string(),
                    message: e.to_string(),
                })?;
                Box::new(ShuffledReference::from_conversations(&convs, self.seed.unwrap_or(0))?)
            }
            BackendKind::HttpChat => {
                let api_key = match &self.api_key_env {
                    None => None,
                    Some(var) => Some(std::env::var(var).map_err(|_| {
                        BackendError::Config(format!("backend {name}: environment variable {var} is not set"))
                    })?),
                };
                Box::new(HttpChat::new(
                    name,
                    self.endpoint.clone().expect("validated"),
                    self.model.clone().expect("validated"),
                    self.temperature,
                    self.timeout_secs,
                    api_key,
                    self.retry.clone(),
                )?)
            }
        };
        Ok(Backend::new(name, source, self.max_concurrency))
    }
}
