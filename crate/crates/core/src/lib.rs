//! Benchmarking toolkit for child and caregiver dialogue produced by chat models.
//!
//! The crate is organised as a pipeline:
//!
//! 1. [`corpus`] ingests CHAT transcripts (or line-delimited records), normalizes
//!    utterances, enforces strict speaker alternation and builds a [`corpus::BenchmarkSet`].
//! 2. [`lexicon`] loads concreteness norms and the function-word list.
//! 3. [`analyzers`] defines the embedding and dependency-parse provider contracts,
//!    with deterministic fallbacks that need no model downloads.
//! 4. [`metrics`] computes the six measures per conversation and role.
//! 5. [`backends`] renders role-play prompts and talks to chat backends
//!    (HTTP, playback, parrot, fixed script, shuffled reference).
//! 6. [`protocols`] drives single-turn and multi-turn generation.
//! 7. [`analysis`] aggregates records with bootstrap intervals and runs the
//!    model-vs-reference regressions, then writes report files.

pub mod analysis;
pub mod analyzers;
pub mod backends;
pub mod corpus;
pub mod digest;
pub mod http;
pub mod lexicon;
pub mod metrics;
pub mod protocols;
pub mod retry;
pub mod sync;

pub use corpus::{Conversation, ExchangePair, Role, Source, Utterance};

/// Crate version recorded in run manifests.
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
