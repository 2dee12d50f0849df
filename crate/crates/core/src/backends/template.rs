//! The four prompt templates and their rendering.

use serde::{Deserialize, Serialize};

use super::{BackendError, Result};
use crate::corpus::{ExchangePair, Role, Utterance};
use crate::digest::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shots {
    Zero,
    Few,
}

impl Shots {
    pub fn as_str(self) -> &'static str {
        match self {
            Shots::Zero => "zero",
            Shots::Few => "few",
        }
    }
}

pub const CAREGIVER_ZERO_SHOT: &str = "Conversation history:
<History>

You are the parent of a <Month>-month-old English-speaking child. Now, you are having a conversation with your child. <SILENCE> indicates silence in the previous turn; <UNINTELLIGIBLE> indicates unintelligible speech. Based on the given conversation history above, give your response to parent input as ADULT. Do not output the speaker label.
";

pub const CHILD_ZERO_SHOT: &str = "Conversation history:
<History>

You are a <Month>-month-old English-speaking child. Now, you are having a conversation with your parent. <SILENCE> indicates silence in the previous turn; <UNINTELLIGIBLE> indicates unintelligible speech. Based on the given conversation history above, give your response to parent input as CHI. Do not output the speaker label.
";

pub const CAREGIVER_FEW_SHOT: &str = "Conversation history:
<History>

You are the parent of a <Month>-month-old English-speaking child. Now, you are having a conversation with your child. <SILENCE> indicates silence in the previous turn; <UNINTELLIGIBLE> indicates unintelligible speech. Ensure your response is no longer than 50 words regardless of the prompt. Here are some example interactions:
<Examples>
Follow the example interactions. Based on the given conversation history above, give your response to parent input as ADULT. Do not output the speaker label.
";

pub const CHILD_FEW_SHOT: &str = "Conversation history:
<History>

You are a <Month>-month-old English-speaking child. Now, you are having a conversation with your parent. <SILENCE> indicates silence in the previous turn; <UNINTELLIGIBLE> indicates unintelligible speech. Ensure your response is no longer than 6 words regardless of the prompt. Here are some example interactions:
<Examples>
Follow the example interactions. Based on the given conversation history above, give your response to parent input as CHI. Do not output the speaker label.
";

/// Template identifier and text for a role and shot setting.
pub fn template_for(role: Role, shots: Shots) -> (&'static str, &'static str) {
    match (role, shots) {
        (Role::Caregiver, Shots::Zero) => ("caregiver-zero-shot", CAREGIVER_ZERO_SHOT),
        (Role::Child, Shots::Zero) => ("child-zero-shot", CHILD_ZERO_SHOT),
        (Role::Caregiver, Shots::Few) => ("caregiver-few-shot", CAREGIVER_FEW_SHOT),
        (Role::Child, Shots::Few) => ("child-few-shot", CHILD_FEW_SHOT),
    }
}

pub fn template_hash(role: Role, shots: Shots) -> String {
    sha256_hex(template_for(role, shots).1)
}

/// Hashes of all four templates keyed by template id, in a fixed order.
pub fn all_template_hashes() -> Vec<(String, String)> {
    [
        (Role::Child, Shots::Zero),
        (Role::Child, Shots::Few),
        (Role::Caregiver, Shots::Zero),
        (Role::Caregiver, Shots::Few),
    ]
    .into_iter()
    .map(|(r, s)| (template_for(r, s).0.to_string(), template_hash(r, s)))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub role_to_play: Role,
    pub age_months: u32,
    pub shots: Shots,
    pub history: Vec<Utterance>,
    pub exemplars: Vec<ExchangePair>,
    pub rendered_text: String,
    pub template_id: String,
    pub template_hash: String,
}

impl PromptSpec {
    /// Most recent utterance by the other role.
    pub fn last_interlocutor(&self) -> Option<&Utterance> {
        self.history.iter().rev().find(|u| u.role != self.role_to_play)
    }

    /// Playback key over template and rendered text.
    pub fn digest(&self) -> String {
        sha256_hex(format!("{}\n{}", self.template_hash, self.rendered_text))
    }
}

fn line(u: &Utterance) -> String {
    format!("{}: {}", u.role.label(), u.text())
}

/// Single left-to-right pass, so substituted text is never rescanned.
fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    'scan: while let Some(pos) = rest.find('<') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        for (key, value) in vars {
            if let Some(after) = tail.strip_prefix(key) {
                out.push_str(value);
                rest = after;
                continue 'scan;
            }
        }
        out.push('<');
        rest = &tail[1..];
    }
    out.push_str(rest);
    out
}

/// Instantiates the template for `role` and `shots`. History lines are
/// chronological, one `LABEL: text` per line; exemplar pairs likewise.
/// Exemplars are ignored for zero-shot.
pub fn render_prompt(
    role: Role,
    age_months: u32,
    history: &[Utterance],
    shots: Shots,
    exemplars: &[ExchangePair],
) -> Result<PromptSpec> {
    if history.is_empty() {
        return Err(BackendError::EmptyHistory);
    }
    if shots == Shots::Few && exemplars.is_empty() {
        return Err(BackendError::MissingExemplars);
    }
    let (template_id, template) = template_for(role, shots);
    let history_block = history.iter().map(line).collect::<Vec<_>>().join("\n");
    let exemplars: Vec<ExchangePair> = match shots {
        Shots::Zero => Vec::new(),
        Shots::Few => exemplars.to_vec(),
    };
    let example_block = exemplars
        .iter()
        .flat_map(|p| [line(&p.prompt), line(&p.response)])
        .collect::<Vec<_>>()
        .join("\n");
    let month = age_months.to_string();
    let rendered_text = fill(
        template,
        &[("<History>", &history_block), ("<Month>", &month), ("<Examples>", &example_block)],
    );
    Ok(PromptSpec {
        role_to_play: role,
        age_months,
        shots,
        history: history.to_vec(),
        exemplars,
        rendered_text,
        template_id: template_id.to_string(),
        template_hash: sha256_hex(template),
    })
}

/// Role from a user-supplied name (`child`, `caregiver`, `CHI`, `ADULT`).
pub fn parse_role(name: &str) -> Result<Role> {
    Role::parse(name).ok_or_else(|| BackendError::UnknownRole(name.to_string()))
}
