use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    alternate_and_pair, Conversation, CorpusError, ExchangePair, Result, Role, MAX_AGE_MONTHS,
    MIN_AGE_MONTHS,
};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub conversation_count: usize,
    pub pair_count: usize,
    pub token_count_total: usize,
    pub token_count_child: usize,
    pub token_count_caregiver: usize,
    /// Whitespace words (containing a letter or digit) in the raw payloads,
    /// before annotation stripping. Placeholder turns count zero.
    pub token_count_unstripped: usize,
}

impl CorpusStats {
    pub fn compute(conversations: &[Conversation], pairs: &[ExchangePair]) -> Self {
        let child = conversations.iter().map(|c| c.token_count(Some(Role::Child))).sum();
        let caregiver = conversations
            .iter()
            .map(|c| c.token_count(Some(Role::Caregiver)))
            .sum();
        let unstripped = conversations
            .iter()
            .flat_map(|c| &c.utterances)
            .filter(|u| !u.is_silence && !u.is_unintelligible)
            .map(|u| {
                u.raw_text
                    .split_whitespace()
                    .filter(|w| w.chars().any(char::is_alphanumeric))
                    .count()
            })
            .sum();
        Self {
            conversation_count: conversations.len(),
            pair_count: pairs.len(),
            token_count_total: child + caregiver,
            token_count_child: child,
            token_count_caregiver: caregiver,
            token_count_unstripped: unstripped,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSet {
    /// Alternated conversations.
    pub conversations: Vec<Conversation>,
    pub pairs: Vec<ExchangePair>,
    pub stats: CorpusStats,
}

impl BenchmarkSet {
    /// Builds a set from conversations as given (no age selection).
    pub fn from_conversations(conversations: &[Conversation]) -> Result<Self> {
        let mut alternated = Vec::with_capacity(conversations.len());
        let mut pairs = Vec::new();
        for conv in conversations {
            let (alt, mut p) = alternate_and_pair(conv)?;
            alternated.push(alt);
            pairs.append(&mut p);
        }
        let stats = CorpusStats::compute(&alternated, &pairs);
        Ok(Self {
            conversations: alternated,
            pairs,
            stats,
        })
    }

    pub fn pairs_for<'a>(&'a self, conversation_id: &'a str) -> impl Iterator<Item = &'a ExchangePair> {
        self.pairs.iter().filter(move |p| p.conversation_id == conversation_id)
    }
}

/// Whole years of age for a month count (24-35 → 2, ..., 60 → 5).
pub fn age_years(age_months: u32) -> u32 {
    age_months / 12
}

/// Deterministic selection: for each requested age (years), candidates are the
/// conversations in range with at least two utterances, sorted by id; the
/// first `per_age` are taken. Buckets are emitted in the order of `ages`.
pub fn select_benchmark_set(
    conversations: &[Conversation],
    ages: &[u32],
    per_age: usize,
) -> Result<BenchmarkSet> {
    let mut buckets: BTreeMap<u32, Vec<&Conversation>> = BTreeMap::new();
    for conv in conversations {
        let Some(age) = conv.age_months else { continue };
        if !(MIN_AGE_MONTHS..=MAX_AGE_MONTHS).contains(&age) || conv.len() < 2 {
            continue;
        }
        buckets.entry(age_years(age)).or_default().push(conv);
    }

    let mut chosen: Vec<Conversation> = Vec::new();
    for &years in ages {
        let mut candidates = buckets.get(&years).cloned().unwrap_or_default();
        if candidates.len() < per_age {
            return Err(CorpusError::InsufficientData {
                age_years: years,
                available: candidates.len(),
                requested: per_age,
            });
        }
        candidates.sort_by(|a, b| a.id.cmp(&b.id));
        chosen.extend(candidates.into_iter().take(per_age).cloned());
    }
    BenchmarkSet::from_conversations(&chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Utterance;

    fn synthetic(id: &str, age: u32, turns: usize) -> Conversation {
        let us = (0..turns)
            .map(|i| {
                let role = if i % 3 == 2 { Role::Caregiver } else if i % 2 == 0 { Role::Child } else { Role::Caregiver };
                Utterance::new(role, &format!("w{i} x{i} ."))
            })
            .collect();
        Conversation::new(id, Some(age), us)
    }

    #[test]
    fn selects_ten_per_age_from_hundred() {
        let corpus: Vec<Conversation> = (0..100)
            .map(|i| {
                let age = (24 + (i as u32 % 4) * 12 + (i as u32 % 7)).min(60);
                synthetic(&format!("conv{i:03}"), age, 6)
            })
            .collect();
        let set = select_benchmark_set(&corpus, &[2, 3, 4, 5], 10).unwrap();
        assert_eq!(set.conversations.len(), 40);
        assert_eq!(set.stats.conversation_count, 40);
        // Sorted by id within each bucket; buckets in requested order.
        let first_bucket: Vec<&str> = set.conversations[..10].iter().map(|c| c.id.as_str()).collect();
        assert_eq!(first_bucket[0], "conv000");
        assert!(first_bucket.windows(2).all(|w| w[0] < w[1]));
        assert!(set.conversations[..10].iter().all(|c| age_years(c.age_months.unwrap()) == 2));
        let expected_pairs: usize = set.conversations.iter().map(|c| c.len() - 1).sum();
        assert_eq!(set.stats.pair_count, expected_pairs);
    }

    #[test]
    fn per_age_zero_is_empty() {
        let corpus = vec![synthetic("a", 30, 4)];
        let set = select_benchmark_set(&corpus, &[2, 3, 4, 5], 0).unwrap();
        assert!(set.conversations.is_empty() && set.pairs.is_empty());
        assert_eq!(set.stats, CorpusStats::default());
    }

    #[test]
    fn underfilled_bucket_reports_shortfall() {
        let corpus = vec![synthetic("a", 30, 4), synthetic("b", 40, 4)];
        let err = select_benchmark_set(&corpus, &[2, 3], 2).unwrap_err();
        match err {
            CorpusError::InsufficientData { age_years, available, requested } => {
                assert_eq!((age_years, available, requested), (2, 1, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn excludes_out_of_range_and_unknown_ages() {
        let mut unknown = synthetic("u", 30, 4);
        unknown.age_months = None;
        let corpus = vec![synthetic("old", 72, 4), unknown, synthetic("ok", 59, 4)];
        let set = select_benchmark_set(&corpus, &[4, 5, 6], 0).unwrap();
        assert!(set.conversations.is_empty());
        let set = select_benchmark_set(&corpus, &[4], 1).unwrap();
        assert_eq!(set.conversations[0].id, "ok");
        assert!(select_benchmark_set(&corpus, &[6], 1).is_err());
    }

    #[test]
    fn stats_balance() {
        let corpus = vec![synthetic("a", 30, 7), synthetic("b", 30, 5)];
        let set = select_benchmark_set(&corpus, &[2], 2).unwrap();
        let s = &set.stats;
        assert_eq!(s.token_count_total, s.token_count_child + s.token_count_caregiver);
        assert_eq!(s.token_count_total, 24);
        assert_eq!(s.token_count_unstripped, 24);
    }
}
