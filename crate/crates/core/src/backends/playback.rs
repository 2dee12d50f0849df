//! Recorded completions keyed by prompt digest, stored as JSON lines.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, CompletionSource, PromptSpec, RawCompletion, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaybackEntry {
    pub digest: String,
    /// Byte length of the rendered prompt; guards against digest reuse.
    pub prompt_len: usize,
    /// Reply as returned by the live backend, before sanitization.
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlaybackFixture {
    entries: BTreeMap<String, PlaybackEntry>,
}

impl PlaybackFixture {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, digest: &str) -> Option<&PlaybackEntry> {
        self.entries.get(digest)
    }

    /// Adds an entry. Re-adding the same prompt keeps the first reply; a
    /// digest seen with a different prompt length is a collision.
    pub fn insert(&mut self, entry: PlaybackEntry) -> Result<()> {
        match self.entries.get(&entry.digest) {
            Some(existing) if existing.prompt_len != entry.prompt_len => Err(BackendError::DigestCollision {
                digest: entry.digest,
            }),
            Some(_) => Ok(()),
            None => {
                self.entries.insert(entry.digest.clone(), entry);
                Ok(())
            }
        }
    }

    pub fn lookup(&self, prompt: &PromptSpec) -> Result<&PlaybackEntry> {
        let digest = prompt.digest();
        match self.entries.get(&digest) {
            None => Err(BackendError::PlaybackMiss { digest }),
            Some(e) if e.prompt_len != prompt.rendered_text.len() => Err(BackendError::DigestCollision { digest }),
            Some(e) => Ok(e),
        }
    }

    pub fn from_jsonl(source: &str, text: &str) -> Result<Self> {
        let mut fixture = Self::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: PlaybackEntry = serde_json::from_str(line).map_err(|e| BackendError::Fixture {
                path: source.to_string(),
                message: format!("line {}: {e}", i + 1),
            })?;
            fixture.insert(entry)?;
        }
        Ok(fixture)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| BackendError::Fixture {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_jsonl(&path.display().to_string(), &text)
    }

    /// Entries sorted by digest, one JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for entry in self.entries.values() {
            out.push_str(&serde_json::to_string(entry).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let fail = |e: std::io::Error| BackendError::Fixture {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let mut f = fs::File::create(path).map_err(fail)?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(fail)
    }

    /// Merges `other` into `self`; collisions are errors.
    pub fn extend(&mut self, other: PlaybackFixture) -> Result<()> {
        for entry in other.entries.into_values() {
            self.insert(entry)?;
        }
        Ok(())
    }
}

/// Serves replies from a fixture; any prompt not in it is an error.
pub struct PlaybackSource {
    fixture: PlaybackFixture,
}

impl PlaybackSource {
    pub fn new(fixture: PlaybackFixture) -> Self {
        Self { fixture }
    }
}

impl CompletionSource for PlaybackSource {
    fn complete_raw(&self, prompt: &PromptSpec) -> Result<RawCompletion> {
        let entry = self.fixture.lookup(prompt)?;
        Ok(RawCompletion {
            text: entry.text.clone(),
            attempts: 1,
        })
    }
}

/// Passes prompts to a live backend and records the replies. A prompt seen
/// before is answered from the recording, so a live run and its replay agree.
pub struct RecordingSource {
    inner: Box<dyn CompletionSource>,
    fixture: Arc<Mutex<PlaybackFixture>>,
}

impl RecordingSource {
    pub fn new(inner: Box<dyn CompletionSource>) -> (Self, Arc<Mutex<PlaybackFixture>>) {
        let fixture = Arc::new(Mutex::new(PlaybackFixture::default()));
        (
            Self {
                inner,
                fixture: Arc::clone(&fixture),
            },
            fixture,
        )
    }
}

impl CompletionSource for RecordingSource {
    fn complete_raw(&self, prompt: &PromptSpec) -> Result<RawCompletion> {
        if let Ok(hit) = self.fixture.lock().expect("fixture lock").lookup(prompt) {
            return Ok(RawCompletion {
                text: hit.text.clone(),
                attempts: 1,
            });
        }
        let raw = self.inner.complete_raw(prompt)?;
        self.fixture.lock().expect("fixture lock").insert(PlaybackEntry {
            digest: prompt.digest(),
            prompt_len: prompt.rendered_text.len(),
            text: raw.text.clone(),
        })?;
        Ok(raw)
    }
}

impl Backend {
    /// Wraps this backend's source in a recorder; returns the new backend and
    /// a handle to the fixture being filled.
    pub fn recording(self) -> (Backend, Arc<Mutex<PlaybackFixture>>) {
        let max = self.max_concurrency();
        let (source, fixture) = RecordingSource::new(self.source);
        (Backend::new(self.id, Box::new(source), max), fixture)
    }
}

/// Completes each prompt once against `backend` and returns the recording.
pub fn record_session(backend: &dyn CompletionSource, prompts: &[PromptSpec]) -> Result<PlaybackFixture> {
    let mut fixture = PlaybackFixture::default();
    for prompt in prompts {
        let raw = backend.complete_raw(prompt)?;
        fixture.insert(PlaybackEntry {
            digest: prompt.digest(),
            prompt_len: prompt.rendered_text.len(),
            text: raw.text,
        })?;
    }
    Ok(fixture)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{render_prompt, Shots};
    use crate::corpus::{Role, Utterance};

    fn prompts() -> Vec<PromptSpec> {
        ["ball", "dog", "more juice"]
            .iter()
            .map(|t| render_prompt(Role::Caregiver, 30, &[Utterance::new(Role::Child, t)], Shots::Zero, &[]).unwrap())
            .collect()
    }

    struct Counter(std::sync::atomic::AtomicUsize);
    impl CompletionSource for Counter {
        fn complete_raw(&self, _: &PromptSpec) -> Result<RawCompletion> {
            let n = self.0.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            Ok(RawCompletion { text: format!("ADULT: reply {n}"), attempts: 1 })
        }
    }

    #[test]
    fn record_then_replay() {
        let live = Counter(Default::default());
        let fixture = record_session(&live, &prompts()).unwrap();
        assert_eq!(fixture.len(), 3);

        let text = fixture.to_jsonl();
        let reloaded = PlaybackFixture::from_jsonl("mem", &text).unwrap();
        assert_eq!(reloaded, fixture);
        assert_eq!(reloaded.to_jsonl(), text);

        let replay = Backend::new("replay", Box::new(PlaybackSource::new(reloaded)), 1);
        let first: Vec<_> = prompts().iter().map(|p| replay.complete(p).unwrap()).collect();
        let second: Vec<_> = prompts().iter().map(|p| replay.complete(p).unwrap()).collect();
        for (a, b) in first.iter().zip(&second) {
            assert_eq!((&a.text, a.refusal_flag), (&b.text, b.refusal_flag));
        }
        assert_eq!(first[0].text, "reply 0");
        assert!(first[0].refusal_flag);
    }

    #[test]
    fn miss_and_collision() {
        let fixture = PlaybackFixture::default();
        let p = &prompts()[0];
        assert!(matches!(fixture.lookup(p), Err(BackendError::PlaybackMiss { .. })));

        let mut f = PlaybackFixture::default();
        f.insert(PlaybackEntry { digest: "d".into(), prompt_len: 10, text: "a".into() }).unwrap();
        f.insert(PlaybackEntry { digest: "d".into(), prompt_len: 10, text: "b".into() }).unwrap();
        assert_eq!(f.get("d").unwrap().text, "a");
        let err = f.insert(PlaybackEntry { digest: "d".into(), prompt_len: 11, text: "c".into() });
        assert_eq!(err, Err(BackendError::DigestCollision { digest: "d".into() }));

        let mut wrong_len = PlaybackFixture::default();
        wrong_len.insert(PlaybackEntry { digest: p.digest(), prompt_len: 1, text: "x".into() }).unwrap();
        assert!(matches!(wrong_len.lookup(p), Err(BackendError::DigestCollision { .. })));
    }

    #[test]
    fn recording_backend_caches() {
        let live = Backend::new("live", Box::new(Counter(Default::default())), 2);
        let (rec, fixture) = live.recording();
        let p = &prompts()[0];
        let a = rec.complete(p).unwrap();
        let b = rec.complete(p).unwrap();
        assert_eq!(a.text, b.text);
        assert_eq!(fixture.lock().unwrap().len(), 1);
        assert_eq!(rec.max_concurrency(), 2);
    }

    #[test]
    fn malformed_fixture_line() {
        let err = PlaybackFixture::from_jsonl("f", "{\"digest\":\"x\"}\n").unwrap_err();
        assert!(matches!(err, BackendError::Fixture { .. }));
    }
}
