//! The six measures, per utterance and per conversation role.
//!
//! Word level: concreteness (mean rating of rated content words) and lexical
//! density (content tokens / tokens). Utterance level: length in tokens and
//! dependency-tree depth. Dialogue level: alignment (mean cosine similarity of
//! a response to the utterance it answers) and diversity (mean pairwise cosine
//! distance among one speaker's utterances).
//!
//! Silences and unintelligible turns never contribute. Undefined values carry
//! a reason and are left out of every average.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzers::{
    cosine_similarity, mean_token_depth, tree_depth, AnalyzerError, DependencyParser, Embedder,
    EmbeddingVector,
};
use crate::corpus::{Conversation, Role, Utterance};
use crate::lexicon::{is_content_word, ConcretenessLexicon, FunctionWordSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Concreteness,
    LexicalDensity,
    UtteranceLength,
    SyntacticDepth,
    DialogueAlignment,
    DialogueDiversity,
}

impl Measure {
    pub const ALL: [Measure; 6] = [
        Measure::Concreteness,
        Measure::LexicalDensity,
        Measure::UtteranceLength,
        Measure::SyntacticDepth,
        Measure::DialogueAlignment,
        Measure::DialogueDiversity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Concreteness => "concreteness",
            Measure::LexicalDensity => "lexical_density",
            Measure::UtteranceLength => "utterance_length",
            Measure::SyntacticDepth => "syntactic_depth",
            Measure::DialogueAlignment => "dialogue_alignment",
            Measure::DialogueDiversity => "dialogue_diversity",
        }
    }

    pub fn parse(s: &str) -> Option<Measure> {
        Measure::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UndefinedReason {
    /// The role has no scorable utterances.
    NoEligibleUtterances,
    /// Scorable utterances exist, but none has a content word with a rating.
    NoRatedContentWords,
    /// Every call to the analyzer provider failed.
    ProviderFailure,
    /// No prompt/response pair with both sides scorable.
    NoEligiblePairs,
    /// Fewer than two scorable utterances for a pairwise measure.
    TooFewUtterances,
}

impl UndefinedReason {
    pub fn code(self) -> &'static str {
        match self {
            UndefinedReason::NoEligibleUtterances => "no_eligible_utterances",
            UndefinedReason::NoRatedContentWords => "no_rated_content_words",
            UndefinedReason::ProviderFailure => "provider_failure",
            UndefinedReason::NoEligiblePairs => "no_eligible_pairs",
            UndefinedReason::TooFewUtterances => "too_few_utterances",
        }
    }

    pub fn parse(s: &str) -> Option<UndefinedReason> {
        use UndefinedReason::*;
        [
            NoEligibleUtterances,
            NoRatedContentWords,
            ProviderFailure,
            NoEligiblePairs,
            TooFewUtterances,
        ]
        .into_iter()
        .find(|r| r.code() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricValue {
    Defined(f64),
    Undefined(UndefinedReason),
}

impl MetricValue {
    pub fn value(self) -> Option<f64> {
        match self {
            MetricValue::Defined(v) => Some(v),
            MetricValue::Undefined(_) => None,
        }
    }

    pub fn reason(self) -> Option<UndefinedReason> {
        match self {
            MetricValue::Defined(_) => None,
            MetricValue::Undefined(r) => Some(r),
        }
    }

    fn mean_or(values: &[f64], reason: UndefinedReason) -> MetricValue {
        if values.is_empty() {
            MetricValue::Undefined(reason)
        } else {
            MetricValue::Defined(values.iter().sum::<f64>() / values.len() as f64)
        }
    }
}

// ---------------------------------------------------------------------------
// Per-utterance measures
// ---------------------------------------------------------------------------

/// Mean rating over content tokens found in the lexicon; `None` when there are none.
pub fn word_concreteness(
    u: &Utterance,
    lex: &ConcretenessLexicon,
    fws: &FunctionWordSet,
) -> Option<f64> {
    let ratings: Vec<f64> = u
        .tokens
        .iter()
        .filter(|t| is_content_word(t, fws))
        .filter_map(|t| lex.rating(t))
        .collect();
    if ratings.is_empty() {
        None
    } else {
        Some(ratings.iter().sum::<f64>() / ratings.len() as f64)
    }
}

/// Content tokens over all tokens; `None` for an utterance without tokens.
pub fn lexical_density(u: &Utterance, fws: &FunctionWordSet) -> Option<f64> {
    if u.tokens.is_empty() {
        return None;
    }
    let content = u.tokens.iter().filter(|t| is_content_word(t, fws)).count();
    Some(content as f64 / u.tokens.len() as f64)
}

pub fn utterance_length(u: &Utterance) -> usize {
    u.tokens.len()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthScore {
    /// Longest root-to-leaf path in nodes.
    pub max_depth: usize,
    /// Average node depth over tokens.
    pub mean_token_depth: f64,
}

pub fn syntactic_depth(
    u: &Utterance,
    parser: &dyn DependencyParser,
) -> Result<DepthScore, AnalyzerError> {
    let parse = parser.parse_heads(&u.tokens)?;
    Ok(DepthScore {
        max_depth: tree_depth(&parse),
        mean_token_depth: mean_token_depth(&parse),
    })
}

// ---------------------------------------------------------------------------
// Dialogue measures
// ---------------------------------------------------------------------------

/// Embeddings for every scorable utterance of a conversation, keyed by index.
fn embed_scorable(
    conv: &Conversation,
    embedder: &dyn Embedder,
) -> Result<HashMap<usize, EmbeddingVector>, AnalyzerError> {
    let scorable: Vec<&Utterance> = conv.utterances.iter().filter(|u| u.is_scorable()).collect();
    let texts: Vec<String> = scorable.iter().map(|u| u.text()).collect();
    let vectors = embedder.embed_batch(&texts)?;
    Ok(scorable.iter().map(|u| u.index).zip(vectors).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DialogueScore {
    pub value: MetricValue,
    /// Pairs (alignment) or utterances (diversity) entering the value.
    pub n: usize,
}

fn alignment_from(conv: &Conversation, role: Role, vectors: &HashMap<usize, EmbeddingVector>) -> DialogueScore {
    let sims: Vec<f64> = conv
        .utterances
        .windows(2)
        .filter(|w| w[1].role == role && w[0].role != role)
        .filter_map(|w| {
            let prompt = vectors.get(&w[0].index)?;
            let response = vectors.get(&w[1].index)?;
            Some(cosine_similarity(prompt, response))
        })
        .collect();
    DialogueScore {
        value: MetricValue::mean_or(&sims, UndefinedReason::NoEligiblePairs),
        n: sims.len(),
    }
}

fn diversity_from(conv: &Conversation, role: Role, vectors: &HashMap<usize, EmbeddingVector>) -> DialogueScore {
    let own: Vec<&EmbeddingVector> = conv
        .utterances
        .iter()
        .filter(|u| u.role == role)
        .filter_map(|u| vectors.get(&u.index))
        .collect();
    if own.len() < 2 {
        return DialogueScore {
            value: MetricValue::Undefined(UndefinedReason::TooFewUtterances),
            n: own.len(),
        };
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..own.len() {
        for j in i + 1..own.len() {
            total += 1.0 - cosine_similarity(own[i], own[j]);
            pairs += 1;
        }
    }
    DialogueScore {
        value: MetricValue::Defined(total / pairs as f64),
        n: own.len(),
    }
}

/// Mean cosine similarity between each response by `role` and the preceding
/// utterance of the other role, over pairs where both sides are scorable.
pub fn dialogue_alignment(conv: &Conversation, role: Role, embedder: &dyn Embedder) -> DialogueScore {
    match embed_scorable(conv, embedder) {
        Ok(vectors) => alignment_from(conv, role, &vectors),
        Err(e) => provider_failure(e),
    }
}

/// Mean over all unordered pairs of `role`'s scorable utterances of
/// `1 - cosine similarity`.
pub fn dialogue_diversity(conv: &Conversation, role: Role, embedder: &dyn Embedder) -> DialogueScore {
    match embed_scorable(conv, embedder) {
        Ok(vectors) => diversity_from(conv, role, &vectors),
        Err(e) => provider_failure(e),
    }
}

fn provider_failure(e: AnalyzerError) -> DialogueScore {
    log::warn!("embedding provider failed: {e}");
    DialogueScore {
        value: MetricValue::Undefined(UndefinedReason::ProviderFailure),
        n: 0,
    }
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

/// Per-conversation, per-role summary of the six measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub conversation_id: String,
    /// Provenance label: `reference` or a generation configuration.
    pub source: String,
    pub role: Role,
    pub age_months: Option<u32>,
    pub concreteness: MetricValue,
    pub lexical_density: MetricValue,
    pub mean_utterance_length: MetricValue,
    pub mean_syntactic_depth: MetricValue,
    /// Per-token reading of mean tree depth, reported alongside the default.
    pub mean_token_depth: MetricValue,
    pub dialogue_alignment: MetricValue,
    pub dialogue_diversity: MetricValue,
    /// Values entering each measure (utterances, or pairs for alignment).
    pub n_scored: MeasureCounts,
    pub n_silence: usize,
    pub n_unintelligible: usize,
    pub n_parse_failures: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureCounts {
    pub concreteness: usize,
    pub lexical_density: usize,
    pub utterance_length: usize,
    pub syntactic_depth: usize,
    pub dialogue_alignment: usize,
    pub dialogue_diversity: usize,
}

impl MeasureCounts {
    pub fn get(&self, m: Measure) -> usize {
        match m {
            Measure::Concreteness => self.concreteness,
            Measure::LexicalDensity => self.lexical_density,
            Measure::UtteranceLength => self.utterance_length,
            Measure::SyntacticDepth => self.syntactic_depth,
            Measure::DialogueAlignment => self.dialogue_alignment,
            Measure::DialogueDiversity => self.dialogue_diversity,
        }
    }

    fn set(&mut self, m: Measure, n: usize) {
        match m {
            Measure::Concreteness => self.concreteness = n,
            Measure::LexicalDensity => self.lexical_density = n,
            Measure::UtteranceLength => self.utterance_length = n,
            Measure::SyntacticDepth => self.syntactic_depth = n,
            Measure::DialogueAlignment => self.dialogue_alignment = n,
            Measure::DialogueDiversity => self.dialogue_diversity = n,
        }
    }
}

impl MetricRecord {
    pub fn get(&self, m: Measure) -> MetricValue {
        match m {
            Measure::Concreteness => self.concreteness,
            Measure::LexicalDensity => self.lexical_density,
            Measure::UtteranceLength => self.mean_utterance_length,
            Measure::SyntacticDepth => self.mean_syntactic_depth,
            Measure::DialogueAlignment => self.dialogue_alignment,
            Measure::DialogueDiversity => self.dialogue_diversity,
        }
    }

    fn set(&mut self, m: Measure, v: MetricValue) {
        match m {
            Measure::Concreteness => self.concreteness = v,
            Measure::LexicalDensity => self.lexical_density = v,
            Measure::UtteranceLength => self.mean_utterance_length = v,
            Measure::SyntacticDepth => self.mean_syntactic_depth = v,
            Measure::DialogueAlignment => self.dialogue_alignment = v,
            Measure::DialogueDiversity => self.dialogue_diversity = v,
        }
    }
}

/// Shared, read-only resources needed to profile conversations.
#[derive(Clone, Copy)]
pub struct Analyzers<'a> {
    pub lexicon: &'a ConcretenessLexicon,
    pub function_words: &'a FunctionWordSet,
    pub parser: &'a dyn DependencyParser,
    pub embedder: &'a dyn Embedder,
}

fn profile_role(
    conv: &Conversation,
    role: Role,
    tools: &Analyzers<'_>,
    vectors: &Result<HashMap<usize, EmbeddingVector>, AnalyzerError>,
) -> MetricRecord {
    let own: Vec<&Utterance> = conv.utterances.iter().filter(|u| u.role == role).collect();
    let scorable: Vec<&Utterance> = own.iter().copied().filter(|u| u.is_scorable()).collect();
    let none_eligible = UndefinedReason::NoEligibleUtterances;

    let concreteness: Vec<f64> = scorable
        .iter()
        .filter_map(|u| word_concreteness(u, tools.lexicon, tools.function_words))
        .collect();
    let density: Vec<f64> = scorable
        .iter()
        .filter_map(|u| lexical_density(u, tools.function_words))
        .collect();
    let lengths: Vec<f64> = scorable.iter().map(|u| utterance_length(u) as f64).collect();

    let mut depths = Vec::new();
    let mut token_depths = Vec::new();
    let mut parse_failures = 0;
    for u in &scorable {
        match syntactic_depth(u, tools.parser) {
            Ok(d) => {
                depths.push(d.max_depth as f64);
                token_depths.push(d.mean_token_depth);
            }
            Err(e) => {
                log::debug!("{}#{}: parse failed: {e}", conv.id, u.index);
                parse_failures += 1;
            }
        }
    }
    let depth_reason = if parse_failures > 0 {
        UndefinedReason::ProviderFailure
    } else {
        none_eligible
    };

    let (alignment, diversity) = match vectors {
        Ok(v) => (alignment_from(conv, role, v), diversity_from(conv, role, v)),
        Err(_) => {
            let fail = DialogueScore {
                value: MetricValue::Undefined(UndefinedReason::ProviderFailure),
                n: 0,
            };
            (fail, fail)
        }
    };

    let conc_reason = if scorable.is_empty() {
        none_eligible
    } else {
        UndefinedReason::NoRatedContentWords
    };

    let mut record = MetricRecord {
        conversation_id: conv.id.clone(),
        source: "reference".into(),
        role,
        age_months: conv.age_months,
        concreteness: MetricValue::mean_or(&concreteness, conc_reason),
        lexical_density: MetricValue::mean_or(&density, none_eligible),
        mean_utterance_length: MetricValue::mean_or(&lengths, none_eligible),
        mean_syntactic_depth: MetricValue::mean_or(&depths, depth_reason),
        mean_token_depth: MetricValue::mean_or(&token_depths, depth_reason),
        dialogue_alignment: alignment.value,
        dialogue_diversity: diversity.value,
        n_scored: MeasureCounts {
            concreteness: concreteness.len(),
            lexical_density: density.len(),
            utterance_length: lengths.len(),
            syntactic_depth: depths.len(),
            dialogue_alignment: alignment.n,
            dialogue_diversity: diversity.n,
        },
        n_silence: own.iter().filter(|u| u.is_silence).count(),
        n_unintelligible: own.iter().filter(|u| u.is_unintelligible).count(),
        n_parse_failures: parse_failures,
    };
    // Diversity over fewer than two utterances reports how many there were.
    if record.dialogue_diversity.value().is_none() {
        record.n_scored.dialogue_diversity = 0;
    }
    record
}

/// Child and caregiver records for one (alternated, normalized) conversation.
/// Provider failures become undefined fields; this never fails.
pub fn profile_conversation(conv: &Conversation, tools: &Analyzers<'_>) -> (MetricRecord, MetricRecord) {
    let vectors = embed_scorable(conv, tools.embedder);
    if let Err(e) = &vectors {
        log::warn!("{}: embedding provider failed: {e}", conv.id);
    }
    (
        profile_role(conv, Role::Child, tools, &vectors),
        profile_role(conv, Role::Caregiver, tools, &vectors),
    )
}

/// Profiles conversations in parallel; output order follows input order
/// (child record then caregiver record per conversation), tagged with `source`.
pub fn profile_all(conversations: &[Conversation], tools: &Analyzers<'_>, source: &str) -> Vec<MetricRecord> {
    conversations
        .par_iter()
        .map(|c| {
            let (mut child, mut caregiver) = profile_conversation(c, tools);
            child.source = source.to_string();
            caregiver.source = source.to_string();
            [child, caregiver]
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum RecordCsvError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {message}")]
    Invalid { row: usize, message: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Measures in CSV column order; the token-depth variant follows syntactic depth.
const CSV_VALUE_COLUMNS: [&str; 7] = [
    "concreteness",
    "lexical_density",
    "utterance_length",
    "syntactic_depth",
    "token_depth",
    "dialogue_alignment",
    "dialogue_diversity",
];

fn csv_header() -> Vec<String> {
    let mut h: Vec<String> = ["conversation_id", "source", "role", "age_months"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for c in CSV_VALUE_COLUMNS {
        h.push(c.to_string());
        h.push(format!("{c}_reason"));
        if c != "token_depth" {
            h.push(format!("{c}_n"));
        }
    }
    h.extend(["n_silence", "n_unintelligible", "n_parse_failures"].map(String::from));
    h
}

fn value_cells(v: MetricValue) -> [String; 2] {
    match v {
        MetricValue::Defined(x) => [format!("{x}"), String::new()],
        MetricValue::Undefined(r) => [String::new(), r.code().to_string()],
    }
}

/// One row per record. Undefined values leave the value cell empty and fill
/// the matching `_reason` column.
pub fn write_records_csv<W: Write>(writer: W, records: &[MetricRecord]) -> Result<(), RecordCsvError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(csv_header())?;
    for r in records {
        let mut row = vec![
            r.conversation_id.clone(),
            r.source.clone(),
            r.role.as_str().to_string(),
            r.age_months.map(|a| a.to_string()).unwrap_or_default(),
        ];
        for m in Measure::ALL {
            row.extend(value_cells(r.get(m)));
            row.push(r.n_scored.get(m).to_string());
            if m == Measure::SyntacticDepth {
                row.extend(value_cells(r.mean_token_depth));
            }
        }
        row.push(r.n_silence.to_string());
        row.push(r.n_unintelligible.to_string());
        row.push(r.n_parse_failures.to_string());
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(reader: R) -> Result<Vec<MetricRecord>, RecordCsvError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if header != csv_header() {
        return Err(RecordCsvError::Invalid {
            row: 0,
            message: "unexpected header".into(),
        });
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let bad = |message: String| RecordCsvError::Invalid { row: i + 1, message };
        let cell = |k: usize| row.get(k).unwrap_or("");
        let parse_value = |k: usize| -> Result<MetricValue, RecordCsvError> {
            if cell(k).is_empty() {
                UndefinedReason::parse(cell(k + 1))
                    .map(MetricValue::Undefined)
                    .ok_or_else(|| bad(format!("column {k}: missing value and reason")))
            } else {
                cell(k)
                    .parse::<f64>()
                    .map(MetricValue::Defined)
                    .map_err(|e| bad(format!("column {k}: {e}")))
            }
        };
        let parse_count = |k: usize| -> Result<usize, RecordCsvError> {
            cell(k).parse().map_err(|e| bad(format!("column {k}: {e}")))
        };
        let role = Role::parse(cell(2)).ok_or_else(|| bad(format!("bad role {:?}", cell(2))))?;
        let age_months = if cell(3).is_empty() {
            None
        } else {
            Some(cell(3).parse().map_err(|e| bad(format!("age: {e}")))?)
        };
        let mut rec = MetricRecord {
            conversation_id: cell(0).to_string(),
            source: cell(1).to_string(),
            role,
            age_months,
            concreteness: MetricValue::Undefined(UndefinedReason::NoEligibleUtterances),
            lexical_density: MetricValue::Undefined(UndefinedReason::NoEligibleUtterances),
            mean_utterance_length: MetricValue::Undefined(UndefinedReason::NoEligibleUtterances),
            mean_syntactic_depth: MetricValue::Undefined(UndefinedReason::NoEligibleUtterances),
            mean_token_depth: MetricValue::Undefined(UndefinedReason::NoEligibleUtterances),
            dialogue_alignment: MetricValue::Undefined(UndefinedReason::NoEligibleUtterances),
            dialogue_diversity: MetricValue::Undefined(UndefinedReason::NoEligibleUtterances),
            n_scored: MeasureCounts::default(),
            n_silence: 0,
            n_unintelligible: 0,
            n_parse_failures: 0,
        };
        let mut k = 4;
        for m in Measure::ALL {
            rec.set(m, parse_value(k)?);
            rec.n_scored.set(m, parse_count(k + 2)?);
            k += 3;
            if m == Measure::SyntacticDepth {
                rec.mean_token_depth = parse_value(k)?;
                k += 2;
            }
        }
        rec.n_silence = parse_count(k)?;
        rec.n_unintelligible = parse_count(k + 1)?;
        rec.n_parse_failures = parse_count(k + 2)?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzers::{ChainParser, HashedBagOfWords};
    use crate::corpus::parse_chat;
    use proptest::prelude::*;

    fn fws() -> FunctionWordSet {
        FunctionWordSet::from_str("t", "the\na\ni\nyou\nit\nin\nlike\nthis\nyour\nagain\n").unwrap()
    }

    fn lex() -> ConcretenessLexicon {
        ConcretenessLexicon::from_str(
            "t",
            "word,mean\nbanana,5.0\nbig,3.0\nred,4.0\ntruck,5.0\nwant,1.5\nplay,3.5\ncatch,4.0\n",
        )
        .unwrap()
    }

    fn u(role: Role, text: &str) -> Utterance {
        Utterance::new(role, text)
    }

    #[test]
    fn concreteness_examples() {
        let (l, f) = (lex(), fws());
        assert_eq!(word_concreteness(&u(Role::Child, "banana"), &l, &f), Some(5.0));
        assert_eq!(word_concreteness(&u(Role::Child, "the a"), &l, &f), None);
        assert_eq!(word_concreteness(&u(Role::Child, "big red truck"), &l, &f), Some(4.0));
        // Unrated content words are skipped, not imputed.
        assert_eq!(word_concreteness(&u(Role::Child, "the zorp banana"), &l, &f), Some(5.0));
    }

    #[test]
    fn density_examples() {
        let f = fws();
        assert_eq!(lexical_density(&u(Role::Child, "i want the big truck"), &f), Some(0.6));
        assert_eq!(lexical_density(&u(Role::Child, "the a it"), &f), Some(0.0));
        assert_eq!(lexical_density(&u(Role::Child, "big red truck"), &f), Some(1.0));
        assert_eq!(lexical_density(&Utterance::silence(Role::Child), &f), None);
    }

    #[test]
    fn length_examples() {
        assert_eq!(utterance_length(&u(Role::Child, "let's play catch")), 3);
        assert_eq!(utterance_length(&u(Role::Caregiver, "wanna play catch ?")), 3);
    }

    #[test]
    fn depth_with_chain() {
        let d = syntactic_depth(&u(Role::Child, "yeah"), &ChainParser).unwrap();
        assert_eq!(d.max_depth, 1);
        let d = syntactic_depth(&u(Role::Child, "one two three four five"), &ChainParser).unwrap();
        assert_eq!(d.max_depth, 5);
        assert_eq!(d.mean_token_depth, 3.0);
    }

    fn conv(lines: &[(Role, &str)]) -> Conversation {
        Conversation::new("c", Some(30), lines.iter().map(|(r, t)| u(*r, t)).collect())
    }

    #[test]
    fn alignment_identical_and_disjoint() {
        let e = HashedBagOfWords::default();
        let same = conv(&[
            (Role::Child, "ball"),
            (Role::Caregiver, "ball"),
            (Role::Child, "red truck"),
            (Role::Caregiver, "red truck"),
        ]);
        let a = dialogue_alignment(&same, Role::Caregiver, &e);
        assert!((a.value.value().unwrap() - 1.0).abs() < 1e-6);
        assert_eq!(a.n, 2);

        assert_ne!(e.bucket("a"), e.bucket("b"));
        let disjoint = conv(&[(Role::Child, "a"), (Role::Caregiver, "b")]);
        assert_eq!(dialogue_alignment(&disjoint, Role::Caregiver, &e).value, MetricValue::Defined(0.0));
        assert_eq!(
            dialogue_alignment(&disjoint, Role::Child, &e).value,
            MetricValue::Undefined(UndefinedReason::NoEligiblePairs)
        );
    }

    #[test]
    fn diversity_examples() {
        let e = HashedBagOfWords::default();
        let repeat = conv(&[
            (Role::Child, "more juice"),
            (Role::Caregiver, "okay"),
            (Role::Child, "more juice"),
            (Role::Caregiver, "here"),
            (Role::Child, "more juice"),
        ]);
        let d = dialogue_diversity(&repeat, Role::Child, &e);
        assert!(d.value.value().unwrap().abs() < 1e-12);
        assert_eq!(d.n, 3);

        let two = conv(&[(Role::Child, "a"), (Role::Caregiver, "x"), (Role::Child, "b")]);
        assert_eq!(dialogue_diversity(&two, Role::Child, &e).value, MetricValue::Defined(1.0));
        assert_eq!(
            dialogue_diversity(&two, Role::Caregiver, &e).value,
            MetricValue::Undefined(UndefinedReason::TooFewUtterances)
        );
    }

    fn tools<'a>(
        l: &'a ConcretenessLexicon,
        f: &'a FunctionWordSet,
        p: &'a dyn DependencyParser,
        e: &'a dyn Embedder,
    ) -> Analyzers<'a> {
        Analyzers { lexicon: l, function_words: f, parser: p, embedder: e }
    }

    #[test]
    fn only_silences() {
        let (l, f, e) = (lex(), fws(), HashedBagOfWords::default());
        let c = Conversation::new(
            "s",
            Some(30),
            vec![Utterance::silence(Role::Child), Utterance::silence(Role::Caregiver)],
        );
        let (child, caregiver) = profile_conversation(&c, &tools(&l, &f, &ChainParser, &e));
        for r in [&child, &caregiver] {
            for m in Measure::ALL {
                assert!(r.get(m).value().is_none(), "{m}");
                assert_eq!(r.n_scored.get(m), 0);
            }
            assert_eq!(r.n_silence, 1);
        }
        assert_eq!(child.concreteness, MetricValue::Undefined(UndefinedReason::NoEligibleUtterances));
    }

    #[test]
    fn printed_sample_lengths() {
        let text = "*CHI:\t0 .\n*MOT:\twanna play catch ?\n*CHI:\tlet's play catch .\n\
                    *MOT:\tokay almost .\n*CHI:\tyeah .\n*MOT:\ttry it again put your hands in like this .\n\
                    *CHI:\talmost .\n*MOT:\tyou wanna hit it ?\n";
        let c = parse_chat("sample", text).unwrap();
        let (l, f, e) = (lex(), fws(), HashedBagOfWords::default());
        let (child, caregiver) = profile_conversation(&c, &tools(&l, &f, &ChainParser, &e));
        assert_eq!(child.mean_utterance_length, MetricValue::Defined(5.0 / 3.0));
        // 3 + 2 + 9 + 4 tokens.
        assert_eq!(caregiver.mean_utterance_length, MetricValue::Defined(18.0 / 4.0));
        assert_eq!(child.n_silence, 1);
        assert_eq!(child.n_scored.utterance_length, 3);
        // Child responses at 2, 4, 6; the caregiver's first reply answers silence.
        assert_eq!(child.n_scored.dialogue_alignment, 3);
        assert_eq!(caregiver.n_scored.dialogue_alignment, 3);
    }

    struct Failing;
    impl Embedder for Failing {
        fn id(&self) -> &str {
            "failing"
        }
        fn embed_batch(&self, _: &[String]) -> Result<Vec<EmbeddingVector>, AnalyzerError> {
            Err(AnalyzerError::ProviderUnavailable { provider: "failing".into(), attempts: 3, message: "down".into() })
        }
    }
    impl DependencyParser for Failing {
        fn id(&self) -> &str {
            "failing"
        }
        fn parse_heads(&self, _: &[String]) -> Result<crate::analyzers::DependencyParse, AnalyzerError> {
            Err(AnalyzerError::ProviderUnavailable { provider: "failing".into(), attempts: 3, message: "down".into() })
        }
    }

    #[test]
    fn provider_failure_is_undefined_not_fatal() {
        let (l, f) = (lex(), fws());
        let c = conv(&[(Role::Child, "big truck"), (Role::Caregiver, "a big red truck")]);
        let (child, _) = profile_conversation(&c, &tools(&l, &f, &Failing, &Failing));
        assert_eq!(child.mean_syntactic_depth, MetricValue::Undefined(UndefinedReason::ProviderFailure));
        assert_eq!(child.dialogue_diversity, MetricValue::Undefined(UndefinedReason::ProviderFailure));
        assert_eq!(child.n_parse_failures, 1);
        assert_eq!(child.mean_utterance_length, MetricValue::Defined(2.0));
    }

    #[test]
    fn csv_round_trip() {
        let (l, f, e) = (lex(), fws(), HashedBagOfWords::default());
        let c = conv(&[
            (Role::Child, "big truck"),
            (Role::Caregiver, "xxx"),
            (Role::Child, "the"),
            (Role::Caregiver, "a big red truck"),
        ]);
        let records = profile_all(&[c], &tools(&l, &f, &ChainParser, &e), "parrot/zero/single");
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("conversation_id,source,role,age_months,concreteness,concreteness_reason,concreteness_n,"));
        let back = read_records_csv(buf.as_slice()).unwrap();
        assert_eq!(back, records);
        assert_eq!(back[1].n_unintelligible, 1);
    }

    fn roles_and_texts() -> impl Strategy<Value = Vec<(bool, Option<Vec<&'static str>>)>> {
        const WORDS: &[&str] = &["ball", "the", "big", "red", "truck", "you", "want", "it", "go", "dog"];
        proptest::collection::vec(
            (any::<bool>(), proptest::option::weighted(0.8, proptest::sample::subsequence(WORDS.to_vec(), 1..5))),
            2..12,
        )
    }

    fn build(spec: &[(bool, Option<Vec<&str>>)]) -> Conversation {
        let us = spec
            .iter()
            .map(|(child, words)| {
                let role = if *child { Role::Child } else { Role::Caregiver };
                match words {
                    Some(w) => u(role, &w.join(" ")),
                    None => Utterance::silence(role),
                }
            })
            .collect();
        crate::corpus::alternate(&Conversation::new("p", Some(40), us))
    }

    proptest! {
        #[test]
        fn scale_bounds(spec in roles_and_texts()) {
            let (l, f, e) = (lex(), fws(), HashedBagOfWords::default());
            let c = build(&spec);
            let (a, b) = profile_conversation(&c, &tools(&l, &f, &ChainParser, &e));
            for r in [a, b] {
                if let Some(v) = r.lexical_density.value() { prop_assert!((0.0..=1.0).contains(&v)); }
                if let Some(v) = r.dialogue_alignment.value() { prop_assert!((-1.0..=1.0).contains(&v)); }
                if let Some(v) = r.dialogue_diversity.value() { prop_assert!((0.0..=2.0).contains(&v)); }
                if let Some(v) = r.mean_syntactic_depth.value() { prop_assert!(v >= 1.0); }
                if let Some(v) = r.mean_utterance_length.value() { prop_assert!(v >= 1.0); }
                if let Some(v) = r.concreteness.value() { prop_assert!((1.0..=5.0).contains(&v)); }
            }
        }

        #[test]
        fn removing_silence_changes_nothing(spec in roles_and_texts()) {
            let (l, f, e) = (lex(), fws(), HashedBagOfWords::default());
            let t = tools(&l, &f, &ChainParser, &e);
            let c = build(&spec);
            let Some(pos) = c.utterances.iter().position(|u| u.is_silence) else { return Ok(()) };
            let mut removed = c.clone();
            removed.utterances.remove(pos);
            removed.reindex();
            let (a1, b1) = profile_conversation(&c, &t);
            let (a2, b2) = profile_conversation(&removed, &t);
            for (x, y) in [(a1, a2), (b1, b2)] {
                for m in Measure::ALL {
                    prop_assert_eq!(x.get(m), y.get(m), "{}", m);
                }
            }
        }

        #[test]
        fn deterministic_and_order_free(spec1 in roles_and_texts(), spec2 in roles_and_texts()) {
            let (l, f, e) = (lex(), fws(), HashedBagOfWords::default());
            let t = tools(&l, &f, &ChainParser, &e);
            let mut c1 = build(&spec1);
            c1.id = "one".into();
            let c2 = build(&spec2);
            let forward = profile_all(&[c1.clone(), c2.clone()], &t, "s");
            let backward = profile_all(&[c2, c1], &t, "s");
            prop_assert_eq!(&forward[..2], &backward[2..]);
            prop_assert_eq!(&forward[2..], &backward[..2]);
        }
    }
}
