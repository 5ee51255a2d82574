//! Deterministic synthetic corpora over an ontology, used for fixtures,
//! benchmarks, and closed-loop testing. States draw closed-valued slots
//! only, so rendered summaries stay fully recoverable by extraction.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codec::{DialogueState, StateTuple};
use crate::corpus::{Dialogue, Speaker, Utterance};
use crate::error::Result;
use crate::extract::render_reference_summary;
use crate::ontology::Ontology;

/// Draw a random state: up to three (domain, intent) groups, one to three
/// closed slots each, one value per slot.
pub fn random_state<R: Rng>(ontology: &Ontology, rng: &mut R) -> DialogueState {
    let mut groups: Vec<(String, String, Vec<String>)> = Vec::new();
    for domain in ontology.domains() {
        for intent in ontology.intents_of(domain).into_iter().flatten() {
            let closed: Vec<String> = ontology
                .slots_of(domain, intent)
                .into_iter()
                .flatten()
                .filter(|slot| ontology.closed_values(domain, slot).is_some())
                .cloned()
                .collect();
            if !closed.is_empty() {
                groups.push((domain.to_string(), intent.clone(), closed));
            }
        }
    }
    assert!(!groups.is_empty(), "ontology has no closed-valued slots");

    let group_count = rng.random_range(1..=groups.len().min(3));
    let mut group_indices: Vec<usize> = (0..groups.len()).collect();
    for i in 0..group_count {
        let j = rng.random_range(i..group_indices.len());
        group_indices.swap(i, j);
    }
    let mut state = DialogueState::new();
    let mut chosen = group_indices[..group_count].to_vec();
    chosen.sort_unstable();
    for index in chosen {
        let (domain, intent, slots) = &groups[index];
        let slot_count = rng.random_range(1..=slots.len().min(3));
        let mut slot_indices: Vec<usize> = (0..slots.len()).collect();
        for i in 0..slot_count {
            let j = rng.random_range(i..slot_indices.len());
            slot_indices.swap(i, j);
        }
        for &slot_index in &slot_indices[..slot_count] {
            let slot = &slots[slot_index];
            let values = ontology.closed_values(domain, slot).unwrap();
            let value = &values[rng.random_range(0..values.len())];
            state.insert(StateTuple::new(domain, intent, slot, value));
        }
    }
    state
}

/// Synthesize one labeled dialogue: scripted turns that mention the state's
/// slot values, with the rendered reference text as the gold summary.
pub fn synth_dialogue<R: Rng>(ontology: &Ontology, rng: &mut R, id: &str) -> Result<Dialogue> {
    let state = random_state(ontology, rng);
    let summary = render_reference_summary(&state, ontology)?;

    let mut turns = vec![Utterance {
        speaker: Speaker::User,
        text: "Hello, I have a few requests.".into(),
    }];
    let mut groups: Vec<(&str, Vec<String>)> = Vec::new();
    for tuple in state.iter() {
        let cue = ontology
            .slot_cues(&tuple.domain, &tuple.slot)
            .first()
            .cloned()
            .unwrap_or_else(|| tuple.slot.clone());
        let part = format!("{cue} {}", tuple.value);
        match groups.last_mut() {
            Some((domain, parts)) if *domain == tuple.domain.as_str() => parts.push(part),
            _ => groups.push((tuple.domain.as_str(), vec![part])),
        }
    }
    for (domain, parts) in &groups {
        turns.push(Utterance {
            speaker: Speaker::User,
            text: format!("I want a {domain} with {}.", parts.join(", ")),
        });
        turns.push(Utterance {
            speaker: Speaker::System,
            text: format!("Your {domain} with {} is confirmed.", parts[0]),
        });
    }
    turns.push(Utterance {
        speaker: Speaker::System,
        text: "Is there anything else I can help with?".into(),
    });

    Ok(Dialogue {
        id: id.to_string(),
        turns,
        domains: state.domains().iter().map(|d| d.to_string()).collect(),
        state,
        summary: Some(summary),
    })
}

/// A seeded corpus of `size` synthetic dialogues.
pub fn synth_corpus(ontology: &Ontology, size: usize, seed: u64) -> Result<Vec<Dialogue>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..size)
        .map(|i| synth_dialogue(ontology, &mut rng, &format!("synth-{i:04}")))
        .collect()
}
