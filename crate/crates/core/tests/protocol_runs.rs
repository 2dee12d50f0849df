mod common;

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use cdsbench_core::analyzers::{ChainParser, EmbedderDescriptor, HashedBagOfWords, ParserDescriptor};
use cdsbench_core::backends::{
    Backend, BackendDescriptor, BackendError, BackendKind, CompletionSource, Parrot, PlaybackFixture,
    PlaybackSource, PromptSpec, RawCompletion, Shots,
};
use cdsbench_core::corpus::{select_benchmark_set, Conversation, Role, Utterance};
use cdsbench_core::metrics::{profile_all, write_records_csv, Analyzers};
use cdsbench_core::protocols::{
    execute, write_generated, Direction, NamedBackend, Protocol, RoleBackends, RunManifest, RunStore,
    GENERATED_FILE,
};
use proptest::prelude::*;

/// A stand-in for a live model: replies vary with call order.
struct Chatty(AtomicUsize);

impl CompletionSource for Chatty {
    fn complete_raw(&self, p: &PromptSpec) -> Result<RawCompletion, BackendError> {
        let n = self.0.fetch_add(1, Ordering::SeqCst);
        let last = p.history.last().map(|u| u.text()).unwrap_or_default();
        Ok(RawCompletion { text: format!("reply {n} to {last}"), attempts: 1 })
    }
}

struct Unreachable;

impl CompletionSource for Unreachable {
    fn complete_raw(&self, _: &PromptSpec) -> Result<RawCompletion, BackendError> {
        panic!("completed conversations must not be regenerated");
    }
}

fn set() -> Vec<Conversation> {
    select_benchmark_set(&common::chat_corpus(), &[2, 3, 4, 5], 2).unwrap().conversations
}

fn manifest(protocol: Protocol, shots: Shots) -> RunManifest {
    let nb = NamedBackend { name: "live".into(), descriptor: BackendDescriptor::of_kind(BackendKind::Parrot) };
    let mut m = RunManifest::new(
        "t",
        protocol,
        Direction::Both,
        shots,
        nb.clone(),
        nb,
        EmbedderDescriptor::fallback(),
        ParserDescriptor::fallback(),
        11,
    );
    m.max_turns = 24;
    m
}

fn metrics_csv(convs: &[Conversation]) -> Vec<u8> {
    let (lex, fws) = common::lexicons();
    let tools = Analyzers { lexicon: &lex, function_words: &fws, parser: &ChainParser, embedder: &HashedBagOfWords::default() };
    let mut buf = Vec::new();
    write_records_csv(&mut buf, &profile_all(convs, &tools, "x")).unwrap();
    buf
}

fn run_to(dir: &Path, m: &RunManifest, backend: &Backend, refs: &[Conversation]) -> Vec<u8> {
    let store = RunStore::open(dir, m).unwrap();
    let corpus = execute(m, refs, RoleBackends { child: backend, caregiver: backend }, Some(&store)).unwrap();
    write_generated(dir, &corpus).unwrap();
    let convs: Vec<Conversation> = corpus.conversations.iter().map(|g| g.conversation.clone()).collect();
    let mut out = fs::read(dir.join(GENERATED_FILE)).unwrap();
    out.extend(metrics_csv(&convs));
    out
}

#[test]
fn recorded_runs_replay_byte_identically() {
    let refs = set();
    for (protocol, shots) in [(Protocol::Single, Shots::Zero), (Protocol::Multi, Shots::Few)] {
        let m = manifest(protocol, shots);
        let live = Backend::new("live", Box::new(Chatty(AtomicUsize::new(0))), 4);
        let (recording, fixture) = live.recording();
        let d0 = tempfile::tempdir().unwrap();
        let recorded = run_to(d0.path(), &m, &recording, &refs);
        let fixture: PlaybackFixture = fixture.lock().unwrap().clone();
        assert!(!fixture.is_empty());

        let text = fixture.to_jsonl();
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let replay = Backend::new(
                "live",
                Box::new(PlaybackSource::new(PlaybackFixture::from_jsonl("mem", &text).unwrap())),
                4,
            );
            let d = tempfile::tempdir().unwrap();
            outputs.push(run_to(d.path(), &m, &replay, &refs));
        }
        assert_eq!(outputs[0], outputs[1], "{protocol:?}");
        assert_eq!(outputs[0], recorded, "{protocol:?}");
    }
}

#[test]
fn resume_reuses_finished_conversations() {
    let refs = set();
    let m = manifest(Protocol::Multi, Shots::Zero);
    let dir = tempfile::tempdir().unwrap();
    let parrot = Backend::new("live", Box::new(Parrot), 2);
    let first = run_to(dir.path(), &m, &parrot, &refs);

    let never = Backend::new("live", Box::new(Unreachable), 2);
    let again = run_to(dir.path(), &m, &never, &refs);
    assert_eq!(first, again);

    // Losing one marker regenerates only that conversation.
    let parts = dir.path().join("parts");
    let marker = fs::read_dir(&parts)
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .find(|p| p.extension().is_some_and(|x| x == "done"))
        .unwrap();
    fs::remove_file(&marker).unwrap();
    let count = Arc::new(AtomicUsize::new(0));
    struct Counting(Arc<AtomicUsize>);
    impl CompletionSource for Counting {
        fn complete_raw(&self, p: &PromptSpec) -> Result<RawCompletion, BackendError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Parrot.complete_raw(p)
        }
    }
    let counting = Backend::new("live", Box::new(Counting(count.clone())), 2);
    assert_eq!(run_to(dir.path(), &m, &counting, &refs), first);
    let calls = count.load(Ordering::SeqCst);
    assert!(calls > 0 && calls < 24, "{calls} calls");

    let mut other = m.clone();
    other.seed += 1;
    assert!(RunStore::open(dir.path(), &other).is_err());
}

#[test]
fn single_turn_size_law() {
    let refs = set();
    for shots in [Shots::Zero, Shots::Few] {
        let mut m = manifest(Protocol::Single, shots);
        m.direction = Direction::ChildToCaregiver;
        let parrot = Backend::new("p", Box::new(Parrot), 8);
        let corpus = execute(&m, &refs, RoleBackends { child: &parrot, caregiver: &parrot }, None).unwrap();
        for (g, r) in corpus.conversations.iter().zip(&refs) {
            let k = if shots == Shots::Few { 3 } else { 0 };
            let expected = r
                .utterances
                .windows(2)
                .enumerate()
                .filter(|(i, w)| w[0].role == Role::Child && *i >= k)
                .count();
            assert_eq!(g.pair_indices.len(), expected, "{}", r.id);
            assert!(g.conversation.is_alternating());
        }
    }
}

fn words() -> impl Strategy<Value = String> {
    proptest::collection::vec(proptest::sample::select(vec!["ball", "dog", "red", "go", "mommy", "the", "up"]), 1..5)
        .prop_map(|w| w.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn parrot_alignment_is_one(texts in proptest::collection::vec(words(), 2..14)) {
        let us = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Utterance::new(if i % 2 == 0 { Role::Child } else { Role::Caregiver }, t))
            .collect();
        let conv = Conversation::new("p", Some(30), us);
        let mut m = manifest(Protocol::Single, Shots::Zero);
        m.direction = Direction::Both;
        let parrot = Backend::new("p", Box::new(Parrot), 2);
        let corpus = execute(&m, &[conv], RoleBackends { child: &parrot, caregiver: &parrot }, None).unwrap();
        let (lex, fws) = common::lexicons();
        let tools = Analyzers { lexicon: &lex, function_words: &fws, parser: &ChainParser, embedder: &HashedBagOfWords::default() };
        for g in &corpus.conversations {
            let records = profile_all(std::slice::from_ref(&g.conversation), &tools, "parrot");
            for r in records.iter().filter(|r| Some(r.role) == g.responder) {
                if let Some(v) = r.dialogue_alignment.value() {
                    prop_assert!((v - 1.0).abs() < 1e-6, "{}", v);
                }
            }
        }
    }
}
