//! Single-turn and multi-turn benchmarking runs.
//!
//! Single-turn: every reference pair whose prompt has the chosen role is
//! re-answered by the backend, with the prompt as the only history. The
//! generated conversation interleaves reference prompts and generated
//! responses, so dialogue measures apply unchanged; only the responder role
//! is evaluated.
//!
//! Multi-turn: two role backends converse, seeded with the reference's first
//! utterance, for as many turns as the reference (capped by `max_turns`).

mod manifest;
mod multi;
mod single;
mod store;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{Backend, BackendError};
use crate::corpus::{exchange_pairs, Conversation, CorpusError, ExchangePair, Role};

pub use manifest::{Direction, NamedBackend, Protocol, RunManifest, DEFAULT_EXEMPLARS, DEFAULT_MAX_TURNS};
pub use multi::run_multi_turn;
pub use single::run_single_turn;
pub use store::{read_generated, write_generated, RunStore, GENERATED_FILE, MANIFEST_FILE};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("conversation {0} has no age; prompts need one")]
    MissingAge(String),
    #[error("{dir} holds a run with a different manifest")]
    ManifestMismatch { dir: String },
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T, E = ProtocolError> = std::result::Result<T, E>;

/// A turn that could not be generated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnFailure {
    /// Utterance index in the generated conversation.
    pub turn: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedConversation {
    pub reference_id: String,
    /// Single-turn: the role whose responses were generated. Multi-turn: none.
    pub responder: Option<Role>,
    /// Generated dialogue (`source = generated`, id = reference id).
    pub conversation: Conversation,
    /// Single-turn: reference pair index answered by each generated response.
    pub pair_indices: Vec<usize>,
    /// Reference pairs used as exemplars and kept out of evaluation.
    pub excluded_pairs: Vec<usize>,
    /// Multi-turn stopped early after a backend failure.
    pub truncated: bool,
    pub failures: Vec<TurnFailure>,
    /// Replies that were empty or carried a speaker label.
    pub refusals: usize,
}

impl GeneratedConversation {
    /// Roles whose metric records describe generated speech.
    pub fn evaluated_roles(&self) -> Vec<Role> {
        match self.responder {
            Some(r) => vec![r],
            None => Role::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedCorpus {
    pub manifest: RunManifest,
    pub conversations: Vec<GeneratedConversation>,
}

/// Backends by role. Same-model runs pass the same backend twice.
#[derive(Clone, Copy)]
pub struct RoleBackends<'a> {
    pub child: &'a Backend,
    pub caregiver: &'a Backend,
}

impl<'a> RoleBackends<'a> {
    pub fn for_role(&self, role: Role) -> &'a Backend {
        match role {
            Role::Child => self.child,
            Role::Caregiver => self.caregiver,
        }
    }
}

/// The first `k` exchange pairs of an alternated conversation, in order.
pub fn extract_exemplars(conv: &Conversation, k: usize) -> Result<Vec<ExchangePair>> {
    let pairs = exchange_pairs(conv);
    if pairs.len() < k {
        return Err(CorpusError::TooShort {
            conversation_id: conv.id.clone(),
            len: conv.len(),
        }
        .into());
    }
    if pairs.len() == k && k > 0 {
        log::warn!("{}: all {k} pairs are exemplars; nothing left to evaluate", conv.id);
    }
    Ok(pairs.into_iter().take(k).collect())
}

fn require_ages(conversations: &[Conversation]) -> Result<()> {
    match conversations.iter().find(|c| c.age_months.is_none()) {
        Some(c) => Err(ProtocolError::MissingAge(c.id.clone())),
        None => Ok(()),
    }
}

/// Runs the protocol described by `manifest` over `set`. With a store, each
/// finished conversation is checkpointed and completed ones are reused.
pub fn execute(
    manifest: &RunManifest,
    conversations: &[Conversation],
    backends: RoleBackends<'_>,
    store: Option<&RunStore>,
) -> Result<GeneratedCorpus> {
    manifest.validate()?;
    require_ages(conversations)?;
    let conversations = match manifest.protocol {
        Protocol::Single => {
            let mut out = Vec::new();
            for responder in manifest.direction.responders() {
                out.extend(run_single_turn(
                    conversations,
                    backends.for_role(responder),
                    responder,
                    manifest.shots,
                    manifest.exemplar_k,
                    store,
                )?);
            }
            out
        }
        Protocol::Multi => run_multi_turn(
            conversations,
            backends,
            manifest.shots,
            manifest.exemplar_k,
            manifest.max_turns,
            store,
        )?,
    };
    Ok(GeneratedCorpus {
        manifest: manifest.clone(),
        conversations,
    })
}
