use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BackendError, CompletionSource, PromptSpec, RawCompletion, Result};
use crate::corpus::{Conversation, Role, SILENCE};
use crate::digest::fnv1a64;
use crate::http::JsonEndpoint;
use crate::retry::RetryPolicy;

/// Echoes the most recent utterance of the other role.
pub struct Parrot;

impl CompletionSource for Parrot {
    fn complete_raw(&self, prompt: &PromptSpec) -> Result<RawCompletion> {
        let text = prompt
            .last_interlocutor()
            .map(|u| u.text())
            .unwrap_or_else(|| SILENCE.to_string());
        Ok(RawCompletion { text, attempts: 1 })
    }
}

/// Cycles through a script, indexed by history length so the reply depends
/// only on the prompt.
pub struct FixedScript {
    script: Vec<String>,
}

impl FixedScript {
    pub fn new(script: Vec<String>) -> Result<Self> {
        if script.is_empty() {
            return Err(BackendError::Config("fixed-script backend needs a non-empty script".into()));
        }
        Ok(Self { script })
    }
}

impl CompletionSource for FixedScript {
    fn complete_raw(&self, prompt: &PromptSpec) -> Result<RawCompletion> {
        let i = prompt.history.len().saturating_sub(1) % self.script.len();
        Ok(RawCompletion {
            text: self.script[i].clone(),
            attempts: 1,
        })
    }
}

/// Replies with a reference utterance of the requested role, chosen by a
/// seeded hash of the prompt. Unrelated to the prompt's content, so it
/// behaves like a random speaker drawn from the reference population.
pub struct ShuffledReference {
    pool: BTreeMap<Role, Vec<String>>,
    seed: u64,
}

impl ShuffledReference {
    pub fn from_conversations(conversations: &[Conversation], seed: u64) -> Result<Self> {
        let mut pool: BTreeMap<Role, Vec<String>> = BTreeMap::new();
        for u in conversations.iter().flat_map(|c| &c.utterances) {
            if u.is_scorable() {
                pool.entry(u.role).or_default().push(u.text());
            }
        }
        for role in Role::ALL {
            if pool.get(&role).is_none_or(Vec::is_empty) {
                return Err(BackendError::Config(format!(
                    "shuffled backend has no {} utterances to draw from",
                    role.as_str()
                )));
            }
        }
        Ok(Self { pool, seed })
    }
}

impl CompletionSource for ShuffledReference {
    fn complete_raw(&self, prompt: &PromptSpec) -> Result<RawCompletion> {
        let pool = &self.pool[&prompt.role_to_play];
        let i = fnv1a64(self.seed, prompt.digest().as_bytes()) % pool.len() as u64;
        Ok(RawCompletion {
            text: pool[i as usize].clone(),
            attempts: 1,
        })
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    #[serde(default)]
    content: Option<String>,
}

/// Chat-completion endpoint: the rendered prompt is sent as one user message;
/// the first choice's content is the reply.
pub struct HttpChat {
    id: String,
    model: String,
    temperature: f64,
    endpoint: JsonEndpoint,
}

impl HttpChat {
    pub fn new(
        id: impl Into<String>,
        url: impl Into<String>,
        model: impl Into<String>,
        temperature: f64,
        timeout_secs: u64,
        api_key: Option<String>,
        retry: RetryPolicy,
    ) -> Result<Self> {
        let endpoint = JsonEndpoint::new(url, timeout_secs, api_key, retry).map_err(BackendError::Config)?;
        Ok(Self {
            id: id.into(),
            model: model.into(),
            temperature,
            endpoint,
        })
    }
}

impl CompletionSource for HttpChat {
    fn complete_raw(&self, prompt: &PromptSpec) -> Result<RawCompletion> {
        let request = ChatRequest {
            model: &self.model,
            messages: [ChatMessage {
                role: "user",
                content: &prompt.rendered_text,
            }],
            temperature: self.temperature,
        };
        let (response, attempts): (ChatResponse, u32) =
            self.endpoint.post(&request).map_err(|f| BackendError::Exhausted {
                backend: self.id.clone(),
                attempts: f.attempts,
                message: f.message,
            })?;
        let text = response
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .unwrap_or_default();
        Ok(RawCompletion { text, attempts })
    }
}
