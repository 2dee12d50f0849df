//! Minimal CHAT reader: speaker tiers only.
//!
//! `*XXX:` lines become utterances (`*CHI` is the child, any other code a
//! caregiver). `%` dependent tiers and `@` headers are skipped, except that the
//! child's age is read from the `@ID` header when present. Lines starting with
//! a tab continue the previous tier.

use super::{Conversation, CorpusError, Result, Role, Utterance};

pub fn parse_chat(id: &str, text: &str) -> Result<Conversation> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut tiers: Vec<(String, String)> = Vec::new();
    // Whether continuation lines belong to a speaker tier we kept.
    let mut in_speaker_tier = false;

    for (line_no, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix('*') {
            let Some((code, payload)) = rest.split_once(':') else {
                return Err(CorpusError::MalformedTier {
                    line: line_no + 1,
                    text: line.to_string(),
                });
            };
            tiers.push((code.trim().to_string(), payload.trim().to_string()));
            in_speaker_tier = true;
        } else if line.starts_with('\t') {
            if in_speaker_tier {
                if let Some((_, payload)) = tiers.last_mut() {
                    payload.push(' ');
                    payload.push_str(line.trim());
                }
            }
        } else {
            in_speaker_tier = false;
        }
    }

    if tiers.is_empty() {
        return Err(CorpusError::EmptyTranscript);
    }

    let utterances = tiers
        .iter()
        .map(|(code, payload)| Utterance::new(Role::from_speaker_code(code), payload))
        .collect();
    Ok(Conversation::new(id, parse_chat_age(text), utterances))
}

/// Reads the target child's age in months from `@ID` (`eng|corpus|CHI|2;06.15|...`)
/// or the older `@Age of CHI:` header.
pub fn parse_chat_age(text: &str) -> Option<u32> {
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("@ID:") {
            let fields: Vec<&str> = rest.trim().split('|').collect();
            if fields.get(2).map(|f| f.trim()) == Some("CHI") {
                if let Some(age) = fields.get(3).and_then(|f| parse_age_field(f)) {
                    return Some(age);
                }
            }
        } else if let Some(rest) = line.strip_prefix("@Age of CHI:") {
            if let Some(age) = parse_age_field(rest) {
                return Some(age);
            }
        }
    }
    None
}

/// `Y;MM.DD` → months. Days are ignored.
fn parse_age_field(field: &str) -> Option<u32> {
    let field = field.trim();
    let (years, rest) = field.split_once(';').unwrap_or((field, ""));
    let years: u32 = years.trim().parse().ok()?;
    let months_part = rest.split('.').next().unwrap_or("").trim();
    let months: u32 = if months_part.is_empty() {
        0
    } else {
        months_part.parse().ok()?
    };
    Some(years * 12 + months)
}
