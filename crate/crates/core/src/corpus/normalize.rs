//! Utterance normalization: strip CHAT annotations, lowercase, tokenize.

use super::{SILENCE, UNINTELLIGIBLE};

/// Result of normalizing one tier payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedText {
    pub raw_text: String,
    pub tokens: Vec<String>,
    pub is_silence: bool,
    pub is_unintelligible: bool,
}

impl NormalizedText {
    fn silence() -> Self {
        Self {
            raw_text: SILENCE.to_string(),
            tokens: Vec::new(),
            is_silence: true,
            is_unintelligible: false,
        }
    }

    fn unintelligible() -> Self {
        Self {
            raw_text: UNINTELLIGIBLE.to_string(),
            tokens: Vec::new(),
            is_silence: false,
            is_unintelligible: true,
        }
    }
}

/// Normalizes a single tier payload. Total: the worst case is a silence.
///
/// Removes `&`-prefixed event/filler codes, `[...]` and `(...)` spans, time
/// bullets, `<`/`>` scope brackets, `@` form suffixes and omitted-word
/// (`0word`) markers; lowercases; strips leading and trailing punctuation from
/// each whitespace token. `xxx`, `yyy` and `www` mark unintelligible speech.
pub fn normalize(raw: &str) -> NormalizedText {
    let trimmed = raw.trim();
    if trimmed.is_empty() || trimmed == SILENCE {
        return NormalizedText::silence();
    }
    if trimmed == UNINTELLIGIBLE {
        return NormalizedText::unintelligible();
    }

    let cleaned = strip_spans(trimmed);
    let mut tokens = Vec::new();
    let mut saw_unintelligible = false;
    for word in cleaned.split_whitespace() {
        if word.starts_with('&') {
            continue;
        }
        let lower = word.to_lowercase();
        let base = lower.split('@').next().unwrap_or("");
        let token = base.trim_matches(|c: char| !c.is_alphanumeric());
        if token.is_empty() || is_omission(token) {
            continue;
        }
        if matches!(token, "xxx" | "yyy" | "www") {
            saw_unintelligible = true;
            continue;
        }
        tokens.push(token.to_string());
    }

    if tokens.is_empty() {
        return if saw_unintelligible {
            NormalizedText::unintelligible()
        } else {
            NormalizedText::silence()
        };
    }
    NormalizedText {
        raw_text: trimmed.to_string(),
        tokens,
        is_silence: false,
        is_unintelligible: false,
    }
}

/// `0` alone, or `0` glued to a word (`0is`): material the speaker omitted.
fn is_omission(token: &str) -> bool {
    let mut chars = token.chars();
    match chars.next() {
        Some('0') => chars.next().is_none_or(|c| c.is_alphabetic()),
        _ => false,
    }
}

/// Drops bracketed and parenthesized spans, time bullets (`\u{15}..\u{15}`) and
/// stray bracket characters. Spans are replaced by a space so neighbouring
/// words do not fuse, except `(...)` which marks omitted sounds inside a word.
fn strip_spans(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '[' => {
                for d in chars.by_ref() {
                    if d == ']' {
                        break;
                    }
                }
                out.push(' ');
            }
            '(' => {
                for d in chars.by_ref() {
                    if d == ')' {
                        break;
                    }
                }
            }
            '\u{15}' => {
                for d in chars.by_ref() {
                    if d == '\u{15}' {
                        break;
                    }
                }
                out.push(' ');
            }
            '<' | '>' | ']' | ')' => out.push(' '),
            _ => out.push(c),
        }
    }
    out
}
