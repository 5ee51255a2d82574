//! Non-neural extractive baselines: Lead-k and the greedy ROUGE-2 oracle.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::Dialogue;
use crate::rouge::{rouge_n, Tokenizer};

/// An extractive summary: selected utterance indices in dialogue order plus
/// their space-joined text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractiveSummary {
    pub selected: Vec<usize>,
    pub text: String,
}

fn join_utterances(dialogue: &Dialogue, indices: &[usize]) -> String {
    indices
        .iter()
        .map(|&i| dialogue.turns[i].text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Take the first `k` utterances (fewer when the dialogue is shorter).
pub fn lead_k(dialogue: &Dialogue, k: usize) -> ExtractiveSummary {
    let selected: Vec<usize> = (0..k.min(dialogue.turns.len())).collect();
    let text = join_utterances(dialogue, &selected);
    ExtractiveSummary { selected, text }
}

/// Greedily add the utterance that maximizes ROUGE-2 F of the selection
/// against `reference`; stop when no addition strictly improves the score.
/// Ties break towards the lowest utterance index.
pub fn greedy_oracle(dialogue: &Dialogue, reference: &str) -> ExtractiveSummary {
    greedy_oracle_trace(dialogue, reference).0
}

/// [`greedy_oracle`] plus the score after each accepted step.
pub fn greedy_oracle_trace(dialogue: &Dialogue, reference: &str) -> (ExtractiveSummary, Vec<f64>) {
    let tokenizer = Tokenizer::default();
    let reference_tokens = tokenizer.tokenize(reference);
    let utterance_tokens: Vec<Vec<String>> = dialogue
        .turns
        .iter()
        .map(|u| tokenizer.tokenize(&u.text))
        .collect();

    let score_of = |selected: &BTreeSet<usize>| {
        let tokens: Vec<String> = selected
            .iter()
            .flat_map(|&i| utterance_tokens[i].iter().cloned())
            .collect();
        rouge_n(&tokens, &reference_tokens, 2).f
    };

    let mut selected: BTreeSet<usize> = BTreeSet::new();
    let mut current = score_of(&selected);
    let mut trace = Vec::new();
    loop {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..dialogue.turns.len() {
            if selected.contains(&i) {
                continue;
            }
            let mut candidate = selected.clone();
            candidate.insert(i);
            let score = score_of(&candidate);
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((i, score));
            }
        }
        match best {
            Some((i, score)) if score > current => {
                selected.insert(i);
                current = score;
                trace.push(score);
            }
            _ => break,
        }
    }

    let selected: Vec<usize> = selected.into_iter().collect();
    let text = join_utterances(dialogue, &selected);
    (ExtractiveSummary { selected, text }, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::DialogueState;
    use crate::corpus::{Speaker, Utterance};

    fn dialogue(texts: &[&str]) -> Dialogue {
        Dialogue {
            id: "d".into(),
            turns: texts
                .iter()
                .enumerate()
                .map(|(i, t)| Utterance {
                    speaker: if i % 2 == 0 { Speaker::User } else { Speaker::System },
                    text: t.to_string(),
                })
                .collect(),
            state: DialogueState::new(),
            summary: None,
            domains: Default::default(),
        }
    }

    #[test]
    fn lead_three_takes_the_first_three() {
        let d = dialogue(&["a b", "c d", "e f", "g h", "i j"]);
        let summary = lead_k(&d, 3);
        assert_eq!(summary.selected, [0, 1, 2]);
        assert_eq!(summary.text, "a b c d e f");
    }

    #[test]
    fn lead_k_truncates_short_dialogues() {
        let d = dialogue(&["a b", "c d"]);
        assert_eq!(lead_k(&d, 3).selected, [0, 1]);
    }

    #[test]
    fn lead_one_is_the_first_utterance() {
        let d = dialogue(&["a b", "c d"]);
        let summary = lead_k(&d, 1);
        assert_eq!(summary.selected, [0]);
        assert_eq!(summary.text, "a b");
    }

    #[test]
    fn perfect_utterance_is_selected_alone() {
        let d = dialogue(&["something else entirely", "the cheap hotel was booked", "more text"]);
        let summary = greedy_oracle(&d, "the cheap hotel was booked");
        assert_eq!(summary.selected, [1]);
    }

    #[test]
    fn no_shared_bigram_selects_nothing() {
        let d = dialogue(&["alpha beta", "gamma delta"]);
        let summary = greedy_oracle(&d, "epsilon zeta eta");
        assert!(summary.selected.is_empty());
        assert!(summary.text.is_empty());
    }

    #[test]
    fn greedy_beats_every_single_utterance() {
        let d = dialogue(&[
            "the user wants a cheap hotel",
            "the booking has four stars",
            "nothing relevant here",
            "it is in the north area",
        ]);
        let reference = "the user books a cheap hotel with four stars in the north area";
        let tokenizer = Tokenizer::default();
        let reference_tokens = tokenizer.tokenize(reference);
        let (summary, trace) = greedy_oracle_trace(&d, reference);
        let final_score = rouge_n(&tokenizer.tokenize(&summary.text), &reference_tokens, 2).f;
        let best_single = (0..d.turns.len())
            .map(|i| rouge_n(&tokenizer.tokenize(&d.turns[i].text), &reference_tokens, 2).f)
            .fold(0.0, f64::max);
        assert!(final_score >= best_single);
        // Each accepted step strictly improved the score.
        for pair in trace.windows(2) {
            assert!(pair[1] > pair[0]);
        }
        assert!(summary.selected.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn fifty_utterance_dialogues_finish_within_a_second() {
        let texts: Vec<String> = (0..50)
            .map(|i| format!("turn number {i} mentions a cheap hotel with {i} stars and area north"))
            .collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let d = dialogue(&refs);
        let reference =
            "the user books a cheap hotel with 4 stars and area north for the whole group";
        let started = std::time::Instant::now();
        let summary = greedy_oracle(&d, reference);
        assert!(!summary.selected.is_empty());
        assert!(started.elapsed().as_secs_f64() < 1.0);
    }

    #[test]
    fn indices_stay_in_dialogue_order() {
        // The best first pick is the later utterance; the earlier one still
        // comes first in the output.
        let d = dialogue(&["in the north area", "the user books a cheap hotel"]);
        let reference = "the user books a cheap hotel in the north area";
        let summary = greedy_oracle(&d, reference);
        assert_eq!(summary.selected, [0, 1]);
        assert_eq!(summary.text, "in the north area the user books a cheap hotel");
    }
}
