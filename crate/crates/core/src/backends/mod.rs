//! Prompt rendering and chat backends.
//!
//! A [`Backend`] wraps a [`CompletionSource`] with a concurrency cap and
//! reply sanitization. Sources: an HTTP chat-completion adapter, playback of
//! recorded fixtures, and synthetic backends (parrot, fixed script, shuffled
//! reference utterances) for offline runs.

mod descriptor;
mod playback;
mod sources;
mod template;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::SILENCE;
use crate::sync::ConcurrencyLimit;

pub use descriptor::{BackendDescriptor, BackendKind};
pub use playback::{record_session, PlaybackEntry, PlaybackFixture, PlaybackSource, RecordingSource};
pub use sources::{FixedScript, HttpChat, Parrot, ShuffledReference};
pub use template::{
    all_template_hashes, parse_role, render_prompt, template_for, template_hash, PromptSpec, Shots,
    CAREGIVER_FEW_SHOT, CAREGIVER_ZERO_SHOT, CHILD_FEW_SHOT, CHILD_ZERO_SHOT,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("unknown role {0:?}")]
    UnknownRole(String),
    #[error("few-shot prompt requested without exemplars")]
    MissingExemplars,
    #[error("prompt history is empty")]
    EmptyHistory,
    #[error("backend {backend} exhausted after {attempts} attempt(s): {message}")]
    Exhausted {
        backend: String,
        attempts: u32,
        message: String,
    },
    #[error("no recorded completion for prompt digest {digest}")]
    PlaybackMiss { digest: String },
    #[error("digest {digest} maps to prompts of different lengths")]
    DigestCollision { digest: String },
    #[error("playback fixture {path}: {message}")]
    Fixture { path: String, message: String },
    #[error("backend misconfigured: {0}")]
    Config(String),
}

pub type Result<T, E = BackendError> = std::result::Result<T, E>;

/// Unsanitized reply from a source.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCompletion {
    pub text: String,
    pub attempts: u32,
}

pub trait CompletionSource: Send + Sync {
    fn complete_raw(&self, prompt: &PromptSpec) -> Result<RawCompletion>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub latency_ms: u64,
    pub backend_id: String,
    pub attempts: u32,
    pub refusal_flag: bool,
}

fn strip_label(s: &str) -> Option<&str> {
    ["CHI:", "ADULT:"].into_iter().find_map(|label| {
        let head = s.get(..label.len())?;
        head.eq_ignore_ascii_case(label).then(|| &s[label.len()..])
    })
}

/// Trims outer whitespace and strips leading speaker labels. Empty replies
/// become the silence token. The flag reports whether anything beyond
/// whitespace was changed.
pub fn sanitize(text: &str) -> (String, bool) {
    let mut s = text.trim();
    let mut flagged = false;
    while let Some(rest) = strip_label(s) {
        s = rest.trim();
        flagged = true;
    }
    if s.is_empty() {
        return (SILENCE.to_string(), true);
    }
    (s.to_string(), flagged)
}

pub struct Backend {
    id: String,
    source: Box<dyn CompletionSource>,
    limit: ConcurrencyLimit,
}

impl Backend {
    pub fn new(id: impl Into<String>, source: Box<dyn CompletionSource>, max_concurrency: usize) -> Self {
        Self {
            id: id.into(),
            source,
            limit: ConcurrencyLimit::new(max_concurrency),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn max_concurrency(&self) -> usize {
        self.limit.max()
    }

    pub fn complete(&self, prompt: &PromptSpec) -> Result<CompletionResult> {
        let _permit = self.limit.acquire();
        let start = Instant::now();
        let raw = self.source.complete_raw(prompt)?;
        let (text, refusal_flag) = sanitize(&raw.text);
        Ok(CompletionResult {
            text,
            latency_ms: start.elapsed().as_millis() as u64,
            backend_id: self.id.clone(),
            attempts: raw.attempts,
            refusal_flag,
        })
    }
}
