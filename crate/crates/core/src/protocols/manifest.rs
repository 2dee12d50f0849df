use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{ProtocolError, Result};
use crate::analyzers::{EmbedderDescriptor, ParserDescriptor};
use crate::backends::{all_template_hashes, BackendDescriptor, Shots};
use crate::corpus::{Conversation, Role};
use crate::digest::sha256_hex;

pub const DEFAULT_MAX_TURNS: usize = 300;
pub const DEFAULT_EXEMPLARS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Single,
    Multi,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Single => "single",
            Protocol::Multi => "multi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    ChildToCaregiver,
    CaregiverToChild,
    Both,
}

impl Direction {
    /// Roles whose replies are generated.
    pub fn responders(self) -> Vec<Role> {
        match self {
            Direction::ChildToCaregiver => vec![Role::Caregiver],
            Direction::CaregiverToChild => vec![Role::Child],
            Direction::Both => vec![Role::Caregiver, Role::Child],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedBackend {
    pub name: String,
    pub descriptor: BackendDescriptor,
}

/// Everything needed to reproduce a run given the same backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_name: String,
    pub protocol: Protocol,
    pub direction: Direction,
    pub shots: Shots,
    /// Exemplar pairs per conversation in few-shot runs.
    pub exemplar_k: usize,
    pub child_backend: NamedBackend,
    pub caregiver_backend: NamedBackend,
    /// Template id → sha256 of the template text.
    pub template_hashes: BTreeMap<String, String>,
    pub embedder: EmbedderDescriptor,
    pub parser: ParserDescriptor,
    pub seed: u64,
    pub max_turns: usize,
    /// Reference conversation id → pair indices used as exemplars.
    pub excluded_pairs: BTreeMap<String, Vec<usize>>,
    /// How generated and reference values are compared downstream.
    pub regression_design: String,
    /// Unix seconds; not part of the digest.
    pub timestamp: u64,
    pub toolkit_version: String,
}

impl RunManifest {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        run_name: impl Into<String>,
        protocol: Protocol,
        direction: Direction,
        shots: Shots,
        child_backend: NamedBackend,
        caregiver_backend: NamedBackend,
        embedder: EmbedderDescriptor,
        parser: ParserDescriptor,
        seed: u64,
    ) -> Self {
        Self {
            run_name: run_name.into(),
            protocol,
            direction,
            shots,
            exemplar_k: DEFAULT_EXEMPLARS,
            child_backend,
            caregiver_backend,
            template_hashes: all_template_hashes().into_iter().collect(),
            embedder,
            parser,
            seed,
            max_turns: DEFAULT_MAX_TURNS,
            excluded_pairs: BTreeMap::new(),
            regression_design: "ols value ~ 1 + generated; per-conversation per-role means; ages pooled".into(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            toolkit_version: crate::TOOLKIT_VERSION.to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_turns == 0 {
            return Err(ProtocolError::InvalidManifest("max_turns must be positive".into()));
        }
        if self.shots == Shots::Few && self.exemplar_k == 0 {
            return Err(ProtocolError::InvalidManifest("few-shot runs need exemplar_k >= 1".into()));
        }
        for nb in [&self.child_backend, &self.caregiver_backend] {
            nb.descriptor.validate(&nb.name)?;
        }
        Ok(())
    }

    /// Fills `excluded_pairs` for few-shot runs.
    pub fn record_exclusions(&mut self, conversations: &[Conversation]) {
        self.excluded_pairs.clear();
        if self.shots == Shots::Zero {
            return;
        }
        for c in conversations {
            let n = self.exemplar_k.min(c.len().saturating_sub(1));
            self.excluded_pairs.insert(c.id.clone(), (0..n).collect());
        }
    }

    /// Backend label: the shared name, or `child+caregiver` for crossed runs.
    pub fn backend_label(&self) -> String {
        if self.child_backend.name == self.caregiver_backend.name {
            self.child_backend.name.clone()
        } else {
            format!("{}+{}", self.child_backend.name, self.caregiver_backend.name)
        }
    }

    /// `backend/shots/protocol`, the source label used in reports.
    pub fn configuration(&self) -> String {
        format!("{}/{}/{}", self.backend_label(), self.shots.as_str(), self.protocol.as_str())
    }

    /// sha256 over the manifest with the timestamp zeroed.
    pub fn digest(&self) -> String {
        let mut m = self.clone();
        m.timestamp = 0;
        sha256_hex(serde_json::to_vec(&m).expect("manifest serializes"))
    }
}

#[cfg(test)]
pub(crate) fn test_manifest(protocol: Protocol, shots: Shots) -> RunManifest {
    use crate::backends::BackendKind;
    let parrot = NamedBackend {
        name: "parrot".into(),
        descriptor: BackendDescriptor::of_kind(BackendKind::Parrot),
    };
    RunManifest::new(
        "t",
        protocol,
        Direction::ChildToCaregiver,
        shots,
        parrot.clone(),
        parrot,
        EmbedderDescriptor::fallback(),
        ParserDescriptor::fallback(),
        1,
    )
}
