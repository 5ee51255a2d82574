//! Line-delimited corpus model: loading, validation, canonical saving, and
//! corpus statistics.
//!
//! A corpus file is UTF-8 JSONL, one dialogue per line:
//! `{"id": ..., "turns": [{"speaker": "user"|"system", "text": ...}],
//!   "state": [{"domain", "intent", "slot", "value"}], "summary"?, "domains"?}`.
//! Prediction files carry `{"id", "summary", "state"?}`.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::{DialogueState, StateTuple};
use crate::error::{Error, Result, Violation};
use crate::ontology::Ontology;
use crate::rouge::Tokenizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    System,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: Speaker,
    pub text: String,
}

/// One dialogue with its gold state and (optionally) gold summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialogue {
    pub id: String,
    pub turns: Vec<Utterance>,
    pub state: DialogueState,
    pub summary: Option<String>,
    pub domains: BTreeSet<String>,
}

/// An externally produced summary prediction, optionally with a predicted
/// state for the supplied-state factuality channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub id: String,
    pub summary: String,
    pub state: Option<DialogueState>,
}

#[derive(Serialize, Deserialize)]
struct DialogueRecord {
    id: String,
    turns: Vec<Utterance>,
    state: Vec<StateTuple>,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    domains: Option<Vec<String>>,
}

#[derive(Deserialize)]
struct PredictionRecord {
    id: String,
    summary: String,
    #[serde(default)]
    state: Option<Vec<StateTuple>>,
}

impl Dialogue {
    /// Domains derived from the state, the canonical definition of the
    /// `domains` field.
    pub fn derived_domains(&self) -> BTreeSet<String> {
        self.state.iter().map(|t| t.domain.clone()).collect()
    }
}

/// Canonicalize tuple values against the ontology where possible. Surfaces
/// that match nothing are kept verbatim so validation can name them.
fn canonicalize_state(tuples: Vec<StateTuple>, ontology: &Ontology) -> DialogueState {
    tuples
        .into_iter()
        .map(|t| {
            match ontology.normalize_value(&t.domain, &t.slot, &t.value) {
                Ok(Some(canonical)) => StateTuple { value: canonical, ..t },
                _ => t,
            }
        })
        .collect()
}

fn dialogue_from_record(record: DialogueRecord, ontology: &Ontology) -> Dialogue {
    let state = canonicalize_state(record.state, ontology);
    let domains = match record.domains {
        Some(list) => list.into_iter().collect(),
        None => state.iter().map(|t| t.domain.clone()).collect(),
    };
    Dialogue {
        id: record.id,
        turns: record.turns,
        state,
        summary: record.summary,
        domains,
    }
}

/// Load a corpus file, canonicalizing values and validating every dialogue.
pub fn load_corpus(path: impl AsRef<Path>, ontology: &Ontology) -> Result<Vec<Dialogue>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_corpus_from(BufReader::new(file), ontology)
}

pub fn load_corpus_from(reader: impl BufRead, ontology: &Ontology) -> Result<Vec<Dialogue>> {
    let mut corpus = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line.map_err(|source| Error::Io {
            path: format!("line {line_no}"),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DialogueRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        let dialogue = dialogue_from_record(record, ontology);
        if !seen_ids.insert(dialogue.id.clone()) {
            return Err(Error::Validation {
                id: dialogue.id.clone(),
                violations: vec![Violation {
                    dialogue_id: dialogue.id.clone(),
                    subject: "id".into(),
                    message: "duplicate dialogue id".into(),
                }],
            });
        }
        let violations = validate_dialogue(&dialogue, ontology);
        if !violations.is_empty() {
            return Err(Error::Validation {
                id: dialogue.id,
                violations,
            });
        }
        corpus.push(dialogue);
    }
    Ok(corpus)
}

/// Load a prediction file. Duplicate ids are rejected.
pub fn load_predictions(path: impl AsRef<Path>, ontology: &Ontology) -> Result<Vec<Prediction>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut predictions = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line_no = index + 1;
        let line = line.map_err(|source| Error::Io {
            path: format!("line {line_no}"),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        if !seen_ids.insert(record.id.clone()) {
            return Err(Error::Data(format!("duplicate prediction id {:?}", record.id)));
        }
        predictions.push(Prediction {
            id: record.id,
            summary: record.summary,
            state: record
                .state
                .map(|tuples| canonicalize_state(tuples, ontology)),
        });
    }
    Ok(predictions)
}

/// One JSONL line in the canonical form: state tuples sorted, domains
/// derived and sorted, `summary` omitted when absent.
pub fn to_canonical_line(dialogue: &Dialogue) -> String {
    let record = DialogueRecord {
        id: dialogue.id.clone(),
        turns: dialogue.turns.clone(),
        state: dialogue.state.iter().cloned().collect(),
        summary: dialogue.summary.clone(),
        domains: Some(dialogue.derived_domains().into_iter().collect()),
    };
    serde_json::to_string(&record).expect("dialogue records always serialize")
}

pub fn save_corpus(corpus: &[Dialogue], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    for dialogue in corpus {
        writeln!(file, "{}", to_canonical_line(dialogue)).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

/// Check one dialogue against the ontology and the model invariants.
/// Returns the list of violations, each citing one tuple or field; an empty
/// list means the dialogue is valid. Summary-dependent checks are skipped
/// for unlabeled dialogues.
pub fn validate_dialogue(dialogue: &Dialogue, ontology: &Ontology) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut push = |subject: String, message: String| {
        violations.push(Violation {
            dialogue_id: dialogue.id.clone(),
            subject,
            message,
        });
    };

    if dialogue.id.trim().is_empty() {
        push("id".into(), "dialogue id is empty".into());
    }
    if dialogue.turns.is_empty() {
        push("turns".into(), "dialogue has no turns".into());
    }
    for (i, turn) in dialogue.turns.iter().enumerate() {
        if turn.text.trim().is_empty() {
            push(format!("turns[{i}].text"), "utterance text is empty".into());
        }
    }

    for tuple in dialogue.state.iter() {
        let subject = format!("state[{tuple}]");
        if tuple.domain.is_empty()
            || tuple.intent.is_empty()
            || tuple.slot.is_empty()
            || tuple.value.is_empty()
        {
            push(subject, "tuple has an empty field".into());
            continue;
        }
        if !ontology.has_domain(&tuple.domain) {
            push(subject, format!("unknown domain {:?}", tuple.domain));
            continue;
        }
        if ontology.slots_of(&tuple.domain, &tuple.intent).is_none() {
            push(
                subject,
                format!("unknown intent {:?} in domain {:?}", tuple.intent, tuple.domain),
            );
            continue;
        }
        if !ontology.has_triple(&tuple.domain, &tuple.intent, &tuple.slot) {
            push(
                subject,
                format!(
                    "unknown slot {:?} for ({}, {})",
                    tuple.slot, tuple.domain, tuple.intent
                ),
            );
            continue;
        }
        match ontology.normalize_value(&tuple.domain, &tuple.slot, &tuple.value) {
            Ok(Some(_)) => {}
            Ok(None) => push(
                subject,
                format!(
                    "value {:?} is not in the vocabulary of slot {:?}",
                    tuple.value, tuple.slot
                ),
            ),
            Err(e) => push(subject, e.to_string()),
        }
    }

    let derived = dialogue.derived_domains();
    if dialogue.domains != derived {
        push(
            "domains".into(),
            format!(
                "domains field {:?} does not match domains in state {:?}",
                dialogue.domains, derived
            ),
        );
    }

    violations
}

/// Corpus-level statistics; token counts use the canonical tokenizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub size: usize,
    /// Dialogues that carry a gold summary.
    pub labeled: usize,
    /// Mean tokens per dialogue, summed across all turns.
    pub avg_dialogue_len: f64,
    pub avg_turns: f64,
    /// Mean summary tokens over labeled dialogues.
    pub avg_summary_len: f64,
    pub avg_domains_per_dialogue: f64,
    /// Distinct (domain, intent) pairs per dialogue.
    pub avg_intents_per_dialogue: f64,
    /// Distinct (domain, intent, slot) keys per dialogue: repeated slot
    /// names in different domains count per occurrence.
    pub avg_slots_per_dialogue: f64,
    /// Distinct slot names per dialogue: repeats across domains count once.
    pub avg_distinct_slot_names_per_dialogue: f64,
}

/// Integer token and count sums are accumulated before any division, so the
/// result is independent of corpus order and of how work is partitioned.
pub fn corpus_stats(corpus: &[Dialogue], tokenizer: &Tokenizer) -> Result<CorpusStats> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut dialogue_tokens = 0usize;
    let mut turns = 0usize;
    let mut summary_tokens = 0usize;
    let mut labeled = 0usize;
    let mut domain_count = 0usize;
    let mut intent_count = 0usize;
    let mut slot_key_count = 0usize;
    let mut slot_name_count = 0usize;

    for dialogue in corpus {
        turns += dialogue.turns.len();
        for turn in &dialogue.turns {
            dialogue_tokens += tokenizer.tokenize(&turn.text).len();
        }
        if let Some(summary) = &dialogue.summary {
            summary_tokens += tokenizer.tokenize(summary).len();
            labeled += 1;
        }
        let mut domains = BTreeSet::new();
        let mut intents = BTreeSet::new();
        let mut slot_keys = BTreeSet::new();
        let mut slot_names = BTreeSet::new();
        for tuple in dialogue.state.iter() {
            domains.insert(&tuple.domain);
            intents.insert((&tuple.domain, &tuple.intent));
            slot_keys.insert((&tuple.domain, &tuple.intent, &tuple.slot));
            slot_names.insert(&tuple.slot);
        }
        domain_count += domains.len();
        intent_count += intents.len();
        slot_key_count += slot_keys.len();
        slot_name_count += slot_names.len();
    }

    let n = corpus.len() as f64;
    Ok(CorpusStats {
        size: corpus.len(),
        labeled,
        avg_dialogue_len: dialogue_tokens as f64 / n,
        avg_turns: turns as f64 / n,
        avg_summary_len: if labeled > 0 {
            summary_tokens as f64 / labeled as f64
        } else {
            0.0
        },
        avg_domains_per_dialogue: domain_count as f64 / n,
        avg_intents_per_dialogue: intent_count as f64 / n,
        avg_slots_per_dialogue: slot_key_count as f64 / n,
        avg_distinct_slot_names_per_dialogue: slot_name_count as f64 / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn fixture() -> Ontology {
        Ontology::from_json(
            r#"{
              "domains": {
                "hotel": {
                  "intents": {"book_hotel": {"slots": ["price", "stars"]}},
                  "values": {
                    "price": ["cheap", "moderate", "expensive"],
                    "stars": ["0", "1", "2", "3", "4", "5"]
                  },
                  "aliases": {"price": {"inexpensive": "cheap"}}
                },
                "restaurant": {
                  "intents": {"find_restaurant": {"slots": ["food", "area"]}},
                  "values": {
                    "food": ["chinese", "italian"],
                    "area": ["centre", "north"]
                  }
                },
                "taxi": {
                  "intents": {"book_taxi": {"slots": ["destination"]}},
                  "values": {"destination": "open"}
                }
              }
            }"#,
        )
        .unwrap()
    }

    fn line(id: &str, state: &str, summary: Option<&str>) -> String {
        let summary = match summary {
            Some(s) => format!(",\"summary\":\"{s}\""),
            None => String::new(),
        };
        format!(
            "{{\"id\":\"{id}\",\"turns\":[{{\"speaker\":\"user\",\"text\":\"I need a room.\"}},{{\"speaker\":\"system\",\"text\":\"Done.\"}}],\"state\":{state}{summary}}}"
        )
    }

    const HOTEL_STATE: &str =
        r#"[{"domain":"hotel","intent":"book_hotel","slot":"stars","value":"4"}]"#;

    #[test]
    fn loads_records_in_file_order() {
        let data = format!(
            "{}\n{}\n{}\n",
            line("d1", HOTEL_STATE, Some("A hotel.")),
            line("d2", HOTEL_STATE, None),
            line("d3", "[]", Some("Nothing."))
        );
        let corpus = load_corpus_from(Cursor::new(data), &fixture()).unwrap();
        assert_eq!(
            corpus.iter().map(|d| d.id.as_str()).collect::<Vec<_>>(),
            ["d1", "d2", "d3"]
        );
        assert_eq!(corpus[0].domains.iter().collect::<Vec<_>>(), ["hotel"]);
        assert!(corpus[2].state.is_empty());
    }

    #[test]
    fn empty_file_is_an_empty_corpus() {
        let corpus = load_corpus_from(Cursor::new(""), &fixture()).unwrap();
        assert!(corpus.is_empty());
    }

    #[test]
    fn unknown_slot_is_named_in_the_error() {
        let state = r#"[{"domain":"hotel","intent":"book_hotel","slot":"colour","value":"red"}]"#;
        let err = load_corpus_from(Cursor::new(line("d1", state, None)), &fixture()).unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let data = format!("{}\n{}\n", line("d1", "[]", None), line("d1", "[]", None));
        let err = load_corpus_from(Cursor::new(data), &fixture()).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let data = format!("{}\nnot json\n", line("d1", "[]", None));
        let err = load_corpus_from(Cursor::new(data), &fixture()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_canonicalizes_alias_values() {
        let state =
            r#"[{"domain":"hotel","intent":"book_hotel","slot":"price","value":"inexpensive"}]"#;
        let corpus = load_corpus_from(Cursor::new(line("d1", state, None)), &fixture()).unwrap();
        let tuple = corpus[0].state.iter().next().unwrap();
        assert_eq!(tuple.value, "cheap");
    }

    fn dialogue(id: &str, state: DialogueState) -> Dialogue {
        let domains = state.iter().map(|t| t.domain.clone()).collect();
        Dialogue {
            id: id.into(),
            turns: vec![Utterance {
                speaker: Speaker::User,
                text: "I need a room.".into(),
            }],
            state,
            summary: None,
            domains,
        }
    }

    #[test]
    fn validate_accepts_listed_value() {
        let d = dialogue(
            "d1",
            [StateTuple::new("hotel", "book_hotel", "stars", "4")].into_iter().collect(),
        );
        assert!(validate_dialogue(&d, &fixture()).is_empty());
    }

    #[test]
    fn validate_flags_out_of_vocabulary_value() {
        let d = dialogue(
            "d1",
            [StateTuple::new("hotel", "book_hotel", "stars", "11")].into_iter().collect(),
        );
        let violations = validate_dialogue(&d, &fixture());
        assert_eq!(violations.len(), 1);
        assert!(violations[0].message.contains("11"));
    }

    #[test]
    fn validate_flags_unknown_domain() {
        let d = dialogue(
            "d1",
            [StateTuple::new("spaceport", "dock", "bay", "7")].into_iter().collect(),
        );
        let violations = validate_dialogue(&d, &fixture());
        assert_eq!(violations.len(), 1);
        assert!(violations[0].message.contains("spaceport"));
    }

    #[test]
    fn validate_flags_empty_turns_and_blank_text() {
        let mut d = dialogue("d1", DialogueState::new());
        d.turns.clear();
        let violations = validate_dialogue(&d, &fixture());
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].subject, "turns");

        let mut d = dialogue("d1", DialogueState::new());
        d.turns.push(Utterance {
            speaker: Speaker::System,
            text: "   ".into(),
        });
        let violations = validate_dialogue(&d, &fixture());
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].subject, "turns[1].text");
    }

    #[test]
    fn validate_flags_domains_mismatch() {
        let mut d = dialogue(
            "d1",
            [StateTuple::new("hotel", "book_hotel", "stars", "4")].into_iter().collect(),
        );
        d.domains.insert("restaurant".into());
        let violations = validate_dialogue(&d, &fixture());
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].subject, "domains");
    }

    #[test]
    fn stats_single_dialogue() {
        let d = Dialogue {
            id: "d1".into(),
            turns: vec![
                Utterance {
                    speaker: Speaker::User,
                    text: "one two three four five".into(),
                },
                Utterance {
                    speaker: Speaker::System,
                    text: "six seven eight nine ten".into(),
                },
            ],
            state: DialogueState::new(),
            summary: Some("a b c d e f g".into()),
            domains: BTreeSet::new(),
        };
        let stats = corpus_stats(&[d], &Tokenizer::default()).unwrap();
        assert_eq!(stats.size, 1);
        assert_eq!(stats.avg_dialogue_len, 10.0);
        assert_eq!(stats.avg_turns, 2.0);
        assert_eq!(stats.avg_summary_len, 7.0);
    }

    #[test]
    fn stats_average_domains() {
        let one = dialogue(
            "d1",
            [StateTuple::new("hotel", "book_hotel", "stars", "4")].into_iter().collect(),
        );
        let three = dialogue(
            "d2",
            [
                StateTuple::new("hotel", "book_hotel", "stars", "4"),
                StateTuple::new("restaurant", "find_restaurant", "food", "chinese"),
                StateTuple::new("taxi", "book_taxi", "destination", "centre"),
            ]
            .into_iter()
            .collect(),
        );
        let stats = corpus_stats(&[one, three], &Tokenizer::default()).unwrap();
        assert_eq!(stats.avg_domains_per_dialogue, 2.0);
        assert_eq!(stats.avg_intents_per_dialogue, 2.0);
    }

    #[test]
    fn stats_are_permutation_invariant() {
        let a = dialogue(
            "d1",
            [StateTuple::new("hotel", "book_hotel", "stars", "4")].into_iter().collect(),
        );
        let b = dialogue(
            "d2",
            [StateTuple::new("restaurant", "find_restaurant", "area", "centre")]
                .into_iter()
                .collect(),
        );
        let t = Tokenizer::default();
        let forward = corpus_stats(&[a.clone(), b.clone()], &t).unwrap();
        let backward = corpus_stats(&[b, a], &t).unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn stats_reject_empty_corpus() {
        assert!(matches!(
            corpus_stats(&[], &Tokenizer::default()),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn save_load_round_trip_is_byte_stable() {
        let data = format!(
            "{}\n{}\n",
            line("d1", HOTEL_STATE, Some("A hotel.")),
            line("d2", "[]", None)
        );
        let ontology = fixture();
        let corpus = load_corpus_from(Cursor::new(&data), &ontology).unwrap();
        let canonical: String = corpus
            .iter()
            .map(|d| format!("{}\n", to_canonical_line(d)))
            .collect();
        let reloaded = load_corpus_from(Cursor::new(&canonical), &ontology).unwrap();
        assert_eq!(reloaded, corpus);
        let canonical_again: String = reloaded
            .iter()
            .map(|d| format!("{}\n", to_canonical_line(d)))
            .collect();
        assert_eq!(canonical_again, canonical);
    }
}
