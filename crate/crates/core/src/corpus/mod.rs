//! Transcript ingestion: CHAT parsing, utterance normalization, strict speaker
//! alternation and benchmark-set selection.

mod alternation;
mod chat;
mod io;
mod normalize;
mod selection;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use alternation::{alternate, alternate_and_pair, exchange_pairs};
pub use chat::{parse_chat, parse_chat_age};
pub use io::{
    load_corpus_paths, read_benchmark_set, read_conversations_jsonl, read_records,
    write_benchmark_set, write_conversations_jsonl, CorpusFormat, UtteranceRecord, CONVERSATIONS_FILE,
    PAIRS_FILE, STATS_FILE,
};
pub use normalize::{normalize, NormalizedText};
pub use selection::{age_years, select_benchmark_set, BenchmarkSet, CorpusStats};

/// Literal placeholder for a turn in which the speaker said nothing.
pub const SILENCE: &str = "<SILENCE>";
/// Literal placeholder for unintelligible speech.
pub const UNINTELLIGIBLE: &str = "<UNINTELLIGIBLE>";

/// Youngest and oldest ages (months) a benchmark conversation may carry.
pub const MIN_AGE_MONTHS: u32 = 24;
pub const MAX_AGE_MONTHS: u32 = 60;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: speaker tier lacks ':' ({text:?})")]
    MalformedTier { line: usize, text: String },
    #[error("transcript contains no speaker tiers")]
    EmptyTranscript,
    #[error("conversation {conversation_id} has {len} utterance(s); at least 2 are required")]
    TooShort { conversation_id: String, len: usize },
    #[error("age bucket {age_years}y has {available} candidate(s), {requested} requested (short by {})", requested - available)]
    InsufficientData {
        age_years: u32,
        available: usize,
        requested: usize,
    },
    #[error("conversation {conversation_id}: age {age_months} months outside {MIN_AGE_MONTHS}-{MAX_AGE_MONTHS}")]
    AgeOutOfRange { conversation_id: String, age_months: u32 },
    #[error("corpus path not found: {0}")]
    NotFound(String),
    #[error("line {line}: invalid record: {reason}")]
    InvalidRecord { line: usize, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Child,
    Caregiver,
}

impl Role {
    pub const ALL: [Role; 2] = [Role::Child, Role::Caregiver];

    pub fn opposite(self) -> Role {
        match self {
            Role::Child => Role::Caregiver,
            Role::Caregiver => Role::Child,
        }
    }

    /// Speaker label used in prompts.
    pub fn label(self) -> &'static str {
        match self {
            Role::Child => "CHI",
            Role::Caregiver => "ADULT",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Child => "child",
            Role::Caregiver => "caregiver",
        }
    }

    /// CHAT speaker code mapping: `CHI` is the child, every other code is a caregiver.
    pub fn from_speaker_code(code: &str) -> Role {
        if code == "CHI" {
            Role::Child
        } else {
            Role::Caregiver
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        match s.trim().to_ascii_lowercase().as_str() {
            "child" | "chi" | "c" => Some(Role::Child),
            "caregiver" | "adult" | "parent" | "a" => Some(Role::Caregiver),
            _ => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Reference,
    Generated,
}

/// One speaker turn after normalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub role: Role,
    pub raw_text: String,
    pub tokens: Vec<String>,
    pub is_silence: bool,
    pub is_unintelligible: bool,
    pub index: usize,
}

impl Utterance {
    /// Normalizes `raw` and tags it with `role`. The index is assigned by the
    /// owning conversation.
    pub fn new(role: Role, raw: &str) -> Self {
        let n = normalize(raw);
        Self {
            role,
            raw_text: n.raw_text,
            tokens: n.tokens,
            is_silence: n.is_silence,
            is_unintelligible: n.is_unintelligible,
            index: 0,
        }
    }

    pub fn silence(role: Role) -> Self {
        Self {
            role,
            raw_text: SILENCE.to_string(),
            tokens: Vec::new(),
            is_silence: true,
            is_unintelligible: false,
            index: 0,
        }
    }

    /// True when the utterance carries words that metrics may score.
    pub fn is_scorable(&self) -> bool {
        !self.is_silence && !self.is_unintelligible && !self.tokens.is_empty()
    }

    /// Normalized surface form: placeholder literal or space-joined tokens.
    pub fn text(&self) -> String {
        if self.is_silence {
            SILENCE.to_string()
        } else if self.is_unintelligible {
            UNINTELLIGIBLE.to_string()
        } else {
            self.tokens.join(" ")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conversation {
    pub id: String,
    /// Target child's age. `None` when the transcript did not declare it.
    pub age_months: Option<u32>,
    pub utterances: Vec<Utterance>,
    pub source: Source,
}

impl Conversation {
    pub fn new(id: impl Into<String>, age_months: Option<u32>, utterances: Vec<Utterance>) -> Self {
        let mut conv = Self {
            id: id.into(),
            age_months,
            utterances,
            source: Source::Reference,
        };
        conv.reindex();
        conv
    }

    pub fn reindex(&mut self) {
        for (i, u) in self.utterances.iter_mut().enumerate() {
            u.index = i;
        }
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// True when no two consecutive utterances share a role.
    pub fn is_alternating(&self) -> bool {
        self.utterances.windows(2).all(|w| w[0].role != w[1].role)
    }

    /// Sum of tokens over utterances of `role` (all roles when `None`).
    pub fn token_count(&self, role: Option<Role>) -> usize {
        self.utterances
            .iter()
            .filter(|u| role.is_none_or(|r| u.role == r))
            .map(|u| u.tokens.len())
            .sum()
    }

    pub fn check_age(&self) -> Result<()> {
        match self.age_months {
            Some(a) if !(MIN_AGE_MONTHS..=MAX_AGE_MONTHS).contains(&a) => {
                Err(CorpusError::AgeOutOfRange {
                    conversation_id: self.id.clone(),
                    age_months: a,
                })
            }
            _ => Ok(()),
        }
    }
}

/// A prompt/response pair of adjacent utterances after alternation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangePair {
    pub conversation_id: String,
    pub pair_index: usize,
    pub prompt: Utterance,
    pub response: Utterance,
}
