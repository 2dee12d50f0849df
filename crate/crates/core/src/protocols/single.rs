use rayon::prelude::*;

use super::{extract_exemplars, GeneratedConversation, Result, RunStore, TurnFailure};
use crate::backends::{render_prompt, Backend, Shots};
use crate::corpus::{exchange_pairs, Conversation, Role, Source, Utterance};

fn run_one(
    conv: &Conversation,
    backend: &Backend,
    responder: Role,
    shots: Shots,
    k: usize,
) -> Result<GeneratedConversation> {
    let age = conv.age_months.unwrap_or_default();
    let pairs = exchange_pairs(conv);
    let exemplars = match shots {
        Shots::Zero => Vec::new(),
        Shots::Few => extract_exemplars(conv, k.min(pairs.len()))?,
    };
    let excluded: Vec<usize> = exemplars.iter().map(|p| p.pair_index).collect();

    let mut utterances = Vec::new();
    let mut pair_indices = Vec::new();
    let mut failures = Vec::new();
    let mut refusals = 0;
    for pair in pairs
        .iter()
        .filter(|p| p.prompt.role == responder.opposite() && !excluded.contains(&p.pair_index))
    {
        let prompt = render_prompt(responder, age, std::slice::from_ref(&pair.prompt), shots, &exemplars)?;
        let reply = match backend.complete(&prompt) {
            Ok(c) => {
                refusals += usize::from(c.refusal_flag);
                Utterance::new(responder, &c.text)
            }
            Err(e) => {
                log::warn!("{} pair {}: {e}", conv.id, pair.pair_index);
                failures.push(TurnFailure {
                    turn: utterances.len() + 1,
                    message: e.to_string(),
                });
                Utterance::silence(responder)
            }
        };
        utterances.push(pair.prompt.clone());
        utterances.push(reply);
        pair_indices.push(pair.pair_index);
    }
    let mut generated = Conversation::new(conv.id.clone(), conv.age_months, utterances);
    generated.source = Source::Generated;
    Ok(GeneratedConversation {
        reference_id: conv.id.clone(),
        responder: Some(responder),
        conversation: generated,
        pair_indices,
        excluded_pairs: excluded,
        truncated: false,
        failures,
        refusals,
    })
}

/// Re-answers each reference pair whose prompt is by `responder`'s
/// interlocutor. The prompt is the only history line. In few-shot mode the
/// first `k` pairs serve as exemplars and are not re-answered.
pub fn run_single_turn(
    conversations: &[Conversation],
    backend: &Backend,
    responder: Role,
    shots: Shots,
    k: usize,
    store: Option<&RunStore>,
) -> Result<Vec<GeneratedConversation>> {
    conversations
        .par_iter()
        .enumerate()
        .map(|(i, conv)| {
            let key = format!("single-{}-{i:04}-{}", responder.as_str(), conv.id);
            if let Some(done) = store.map(|s| s.load_part(&key)).transpose()?.flatten() {
                return Ok(done);
            }
            let generated = run_one(conv, backend, responder, shots, k)?;
            if let Some(s) = store {
                s.save_part(&key, &generated)?;
            }
            Ok(generated)
        })
        .collect()
}
