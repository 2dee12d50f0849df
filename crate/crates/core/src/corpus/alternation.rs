use super::{Conversation, CorpusError, ExchangePair, Result, Utterance};

/// Inserts a silence of the opposite role between consecutive same-role turns.
/// A conversation that already alternates comes back unchanged.
pub fn alternate(conv: &Conversation) -> Conversation {
    let mut out: Vec<Utterance> = Vec::with_capacity(conv.utterances.len() * 3 / 2);
    for u in &conv.utterances {
        if let Some(prev) = out.last() {
            if prev.role == u.role {
                out.push(Utterance::silence(u.role.opposite()));
            }
        }
        out.push(u.clone());
    }
    let mut alternated = Conversation {
        id: conv.id.clone(),
        age_months: conv.age_months,
        utterances: out,
        source: conv.source,
    };
    alternated.reindex();
    alternated
}

/// Every adjacent `(u[i], u[i+1])` of an already-alternated conversation.
pub fn exchange_pairs(conv: &Conversation) -> Vec<ExchangePair> {
    conv.utterances
        .windows(2)
        .enumerate()
        .map(|(i, w)| ExchangePair {
            conversation_id: conv.id.clone(),
            pair_index: i,
            prompt: w[0].clone(),
            response: w[1].clone(),
        })
        .collect()
}

pub fn alternate_and_pair(conv: &Conversation) -> Result<(Conversation, Vec<ExchangePair>)> {
    if conv.len() < 2 {
        return Err(CorpusError::TooShort {
            conversation_id: conv.id.clone(),
            len: conv.len(),
        });
    }
    let alternated = alternate(conv);
    let pairs = exchange_pairs(&alternated);
    Ok((alternated, pairs))
}
