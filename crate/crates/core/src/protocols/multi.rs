use rayon::prelude::*;

use super::{extract_exemplars, GeneratedConversation, Result, RoleBackends, RunStore, TurnFailure};
use crate::backends::{render_prompt, Shots};
use crate::corpus::{Conversation, Source, Utterance};

fn run_one(
    conv: &Conversation,
    backends: RoleBackends<'_>,
    shots: Shots,
    k: usize,
    max_turns: usize,
) -> Result<GeneratedConversation> {
    let age = conv.age_months.unwrap_or_default();
    let exemplars = match shots {
        Shots::Zero => Vec::new(),
        Shots::Few => extract_exemplars(conv, k.min(conv.len().saturating_sub(1)))?,
    };
    let target = conv.len().min(max_turns);
    let mut history: Vec<Utterance> = conv.utterances.iter().take(1).cloned().collect();
    let mut failures = Vec::new();
    let mut refusals = 0;
    let mut truncated = false;
    while history.len() < target {
        let role = history.last().expect("seeded").role.opposite();
        let prompt = render_prompt(role, age, &history, shots, &exemplars)?;
        match backends.for_role(role).complete(&prompt) {
            Ok(c) => {
                refusals += usize::from(c.refusal_flag);
                history.push(Utterance::new(role, &c.text));
            }
            Err(e) => {
                log::warn!("{} turn {}: {e}; conversation truncated", conv.id, history.len());
                failures.push(TurnFailure {
                    turn: history.len(),
                    message: e.to_string(),
                });
                truncated = true;
                break;
            }
        }
    }
    let mut generated = Conversation::new(conv.id.clone(), conv.age_months, history);
    generated.source = Source::Generated;
    Ok(GeneratedConversation {
        reference_id: conv.id.clone(),
        responder: None,
        conversation: generated,
        pair_indices: Vec::new(),
        excluded_pairs: exemplars.iter().map(|p| p.pair_index).collect(),
        truncated,
        failures,
        refusals,
    })
}

/// Simulates each reference conversation with two role backends, seeded with
/// its first utterance. Each turn sees the whole generated history. Few-shot
/// prompts for both roles carry the same exemplar pairs from the reference.
pub fn run_multi_turn(
    conversations: &[Conversation],
    backends: RoleBackends<'_>,
    shots: Shots,
    k: usize,
    max_turns: usize,
    store: Option<&RunStore>,
) -> Result<Vec<GeneratedConversation>> {
    conversations
        .par_iter()
        .enumerate()
        .map(|(i, conv)| {
            let key = format!("multi-{i:04}-{}", conv.id);
            if let Some(done) = store.map(|s| s.load_part(&key)).transpose()?.flatten() {
                return Ok(done);
            }
            let generated = run_one(conv, backends, shots, k, max_turns)?;
            if let Some(s) = store {
                s.save_part(&key, &generated)?;
            }
            Ok(generated)
        })
        .collect()
}
