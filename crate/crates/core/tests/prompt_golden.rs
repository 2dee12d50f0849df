mod common;

use cdsbench_core::backends::{render_prompt, template_for, template_hash, Shots};
use cdsbench_core::corpus::{ExchangePair, Role, Utterance};
use cdsbench_core::digest::sha256_hex;

fn history(role: Role) -> Vec<Utterance> {
    let mut h = vec![
        Utterance::silence(Role::Child),
        Utterance::new(Role::Caregiver, "wanna play catch ?"),
        Utterance::new(Role::Child, "let's play catch ."),
    ];
    if role == Role::Child {
        h.push(Utterance::new(Role::Caregiver, "okay almost ."));
    }
    h
}

fn exemplars() -> Vec<ExchangePair> {
    let pair = |i, a: Utterance, b: Utterance| ExchangePair {
        conversation_id: "x".into(),
        pair_index: i,
        prompt: a,
        response: b,
    };
    vec![
        pair(0, Utterance::new(Role::Child, "big red truck !"), Utterance::new(Role::Caregiver, "I want the big truck .")),
        pair(1, Utterance::new(Role::Caregiver, "where is your nose ?"), Utterance::new(Role::Child, "xxx .")),
    ]
}

#[test]
fn renders_match_golden_files() {
    for role in Role::ALL {
        for shots in [Shots::Zero, Shots::Few] {
            let (id, _) = template_for(role, shots);
            let file = common::fixtures().join("templates").join(format!("{}.txt", id.replace('-', "_")));
            let golden = std::fs::read_to_string(&file).unwrap();
            let p = render_prompt(role, 30, &history(role), shots, &exemplars()).unwrap();
            assert_eq!(p.rendered_text, golden, "{id}");
            assert_eq!(p.rendered_text.matches("Do not output the speaker label.").count(), 1);
        }
    }
}

#[test]
fn caps_and_hashes() {
    let few_c = render_prompt(Role::Caregiver, 48, &history(Role::Caregiver), Shots::Few, &exemplars()).unwrap();
    assert!(few_c.rendered_text.contains("no longer than 50 words"));
    let few_k = render_prompt(Role::Child, 48, &history(Role::Child), Shots::Few, &exemplars()).unwrap();
    assert!(few_k.rendered_text.contains("no longer than 6 words"));
    assert_eq!(few_k.template_hash, template_hash(Role::Child, Shots::Few));

    // Frozen: a hash change means the template text changed.
    let frozen = [
        (Role::Child, Shots::Zero, "5ba4a7dfd9cfac35375b6d95ff27296353fb7dbff264c9b5f62a7b41368c49c3"),
        (Role::Child, Shots::Few, "eb7bd20ae149f0e3a131bbda7fc7bb98b05aaef3334889d2fc253a0c405d6b59"),
        (Role::Caregiver, Shots::Zero, "93ad6e2132f3c108cdccf3b42fb2329abd2036c054afe9ce0e55bf45347c9f1e"),
        (Role::Caregiver, Shots::Few, "8500a8abc526581f2c9371df7b6e1ae612ebf961697d25ff98be6ec4852581fc"),
    ];
    for (role, shots, hash) in frozen {
        assert_eq!(template_hash(role, shots), hash);
        assert_eq!(sha256_hex(template_for(role, shots).1), hash);
    }
}
