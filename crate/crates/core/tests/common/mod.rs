#![allow(dead_code)]

use std::path::PathBuf;

use cdsbench_core::corpus::{load_corpus_paths, Conversation, CorpusFormat};
use cdsbench_core::lexicon::{ConcretenessLexicon, FunctionWordSet};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn data() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn chat_corpus() -> Vec<Conversation> {
    load_corpus_paths(&[fixtures().join("chat")], CorpusFormat::Chat).unwrap()
}

pub fn lexicons() -> (ConcretenessLexicon, FunctionWordSet) {
    (
        ConcretenessLexicon::from_path(&data().join("concreteness_sample.csv")).unwrap(),
        FunctionWordSet::from_path(&data().join("function_words.txt")).unwrap(),
    )
}
