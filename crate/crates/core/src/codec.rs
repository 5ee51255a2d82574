//! Flat-string serialization of dialogue states and the joint
//! state-plus-summary target format.
//!
//! The serialized layout is `domain intent(slot=value ;slot=value) ...` with
//! the domain emitted once before its first intent and everything ordered
//! lexicographically, so equal states always produce identical bytes.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{clean_surface, Ontology};

/// Sentinel separating the state prefix from the summary in joint targets.
pub const JOINT_SENTINEL: &str = "<|endoftext|>";

/// One (domain, intent, slot, value) record; the unit of factual matching.
#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct StateTuple {
    pub domain: String,
    pub intent: String,
    pub slot: String,
    pub value: String,
}

impl StateTuple {
    pub fn new(
        domain: impl Into<String>,
        intent: impl Into<String>,
        slot: impl Into<String>,
        value: impl Into<String>,
    ) -> Self {
        StateTuple {
            domain: domain.into(),
            intent: intent.into(),
            slot: slot.into(),
            value: value.into(),
        }
    }

    /// The (domain, intent, slot) key this tuple fills.
    pub fn slot_key(&self) -> (&str, &str, &str) {
        (&self.domain, &self.intent, &self.slot)
    }
}

impl std::fmt::Display for StateTuple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            self.domain, self.intent, self.slot, self.value
        )
    }
}

/// A set of state tuples with order-free equality.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<StateTuple>", into = "Vec<StateTuple>")]
pub struct DialogueState {
    tuples: BTreeSet<StateTuple>,
}

impl From<Vec<StateTuple>> for DialogueState {
    fn from(tuples: Vec<StateTuple>) -> Self {
        DialogueState {
            tuples: tuples.into_iter().collect(),
        }
    }
}

impl From<DialogueState> for Vec<StateTuple> {
    fn from(state: DialogueState) -> Self {
        state.tuples.into_iter().collect()
    }
}

impl FromIterator<StateTuple> for DialogueState {
    fn from_iter<I: IntoIterator<Item = StateTuple>>(iter: I) -> Self {
        DialogueState {
            tuples: iter.into_iter().collect(),
        }
    }
}

impl DialogueState {
    pub fn new() -> Self {
        DialogueState::default()
    }

    pub fn insert(&mut self, tuple: StateTuple) -> bool {
        self.tuples.insert(tuple)
    }

    pub fn remove(&mut self, tuple: &StateTuple) -> bool {
        self.tuples.remove(tuple)
    }

    pub fn contains(&self, tuple: &StateTuple) -> bool {
        self.tuples.contains(tuple)
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Tuples in lexicographic (domain, intent, slot, value) order.
    pub fn iter(&self) -> impl Iterator<Item = &StateTuple> {
        self.tuples.iter()
    }

    pub fn intersection_len(&self, other: &DialogueState) -> usize {
        self.tuples.intersection(&other.tuples).count()
    }

    pub fn difference<'a>(
        &'a self,
        other: &'a DialogueState,
    ) -> impl Iterator<Item = &'a StateTuple> {
        self.tuples.difference(&other.tuples)
    }

    pub fn domains(&self) -> BTreeSet<&str> {
        self.tuples.iter().map(|t| t.domain.as_str()).collect()
    }
}

/// Render a state as the flat `domain intent(slot=value ;slot=value)` string.
pub fn serialize_state(state: &DialogueState) -> String {
    let mut out = String::new();
    let mut current_domain: Option<&str> = None;
    let mut current_intent: Option<(&str, &str)> = None;
    for tuple in state.iter() {
        let intent_key = (tuple.domain.as_str(), tuple.intent.as_str());
        if current_intent == Some(intent_key) {
            out.push_str(" ;");
        } else {
            if current_intent.is_some() {
                out.push_str(") ");
            }
            if current_domain != Some(tuple.domain.as_str()) {
                out.push_str(&tuple.domain);
                out.push(' ');
                current_domain = Some(&tuple.domain);
            }
            out.push_str(&tuple.intent);
            out.push('(');
            current_intent = Some(intent_key);
        }
        out.push_str(&tuple.slot);
        out.push('=');
        out.push_str(&tuple.value);
    }
    if current_intent.is_some() {
        out.push(')');
    }
    out
}

struct Scanner {
    chars: Vec<char>,
    pos: usize,
}

impl Scanner {
    fn new(text: &str) -> Self {
        Scanner {
            chars: text.chars().collect(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::StateSyntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    /// Read a bare name: chars up to whitespace or a structural character.
    fn read_name(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.chars.len() {
            let c = self.chars[self.pos];
            if c.is_whitespace() || matches!(c, '(' | ')' | ';' | '=') {
                break;
            }
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    /// Read up to (not past) any of `stops`; error on end of input.
    fn read_until(&mut self, stops: &[char], what: &str) -> Result<String> {
        let start = self.pos;
        while self.pos < self.chars.len() {
            if stops.contains(&self.chars[self.pos]) {
                return Ok(self.chars[start..self.pos].iter().collect());
            }
            self.pos += 1;
        }
        Err(self.err(format!("input ended while reading {what}")))
    }
}

/// Parse the flat state format back into a [`DialogueState`].
///
/// Inverse of [`serialize_state`] on its image; tolerates extra whitespace
/// and a domain name repeated before each intent. Values are normalized via
/// the ontology where the (domain, slot) pair is known; unknown names are
/// kept verbatim for validation to flag later.
pub fn parse_state(text: &str, ontology: &Ontology) -> Result<DialogueState> {
    let mut scanner = Scanner::new(text);
    let mut state = DialogueState::new();
    let mut domain: Option<String> = None;

    loop {
        scanner.skip_ws();
        if scanner.peek().is_none() {
            return Ok(state);
        }
        if matches!(scanner.peek(), Some('(' | ')' | ';' | '=')) {
            return Err(scanner.err(format!(
                "unexpected {:?} where a name was expected",
                scanner.peek().unwrap()
            )));
        }
        let name = scanner.read_name();
        scanner.skip_ws();
        if scanner.peek() == Some('(') {
            let Some(current) = domain.clone() else {
                return Err(scanner.err("intent block before any domain name"));
            };
            scanner.pos += 1;
            parse_intent_block(&mut scanner, &mut state, &current, &name, ontology)?;
        } else {
            domain = Some(name);
        }
    }
}

fn parse_intent_block(
    scanner: &mut Scanner,
    state: &mut DialogueState,
    domain: &str,
    intent: &str,
    ontology: &Ontology,
) -> Result<()> {
    scanner.skip_ws();
    if scanner.peek() == Some(')') {
        scanner.pos += 1;
        return Ok(());
    }
    loop {
        let slot_raw = scanner.read_until(&['=', ';', ')'], "a slot name")?;
        if scanner.peek() != Some('=') {
            return Err(scanner.err("expected '=' after slot name"));
        }
        let slot = slot_raw.trim().to_string();
        if slot.is_empty() {
            return Err(scanner.err("empty slot name"));
        }
        scanner.pos += 1;
        let value_raw = scanner.read_until(&[';', ')'], "a slot value")?;
        let value_surface = clean_surface(&value_raw);
        if value_surface.is_empty() {
            return Err(scanner.err("empty slot value"));
        }
        let value = match ontology.normalize_value(domain, &slot, &value_surface) {
            Ok(Some(canonical)) => canonical,
            Ok(None) | Err(Error::UnknownSlot { .. }) => value_surface,
            Err(other) => return Err(other),
        };
        state.insert(StateTuple::new(domain, intent, slot, value));
        match scanner.peek() {
            Some(';') => {
                scanner.pos += 1;
            }
            Some(')') => {
                scanner.pos += 1;
                return Ok(());
            }
            _ => unreachable!("read_until stops at ';' or ')'"),
        }
    }
}

/// Build the joint decoder target: serialized state, sentinel, summary.
pub fn encode_joint_target(state: &DialogueState, summary: &str) -> Result<String> {
    if summary.is_empty() {
        return Err(Error::EmptySummary);
    }
    if summary.contains(JOINT_SENTINEL) {
        return Err(Error::SentinelCollision(JOINT_SENTINEL.to_string()));
    }
    Ok(format!(
        "{} {} {}",
        serialize_state(state),
        JOINT_SENTINEL,
        summary
    ))
}

/// Result of splitting a joint model output into state and summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointDecoded {
    pub state: DialogueState,
    pub summary: String,
    /// The sentinel was absent; the whole text was taken as the summary.
    pub missing_sentinel: bool,
    /// The state prefix failed to parse; the state was left empty.
    pub state_error: Option<String>,
}

/// Split a joint output on the first sentinel occurrence.
///
/// Never fails: a missing sentinel or a malformed state prefix is flagged on
/// the result instead.
pub fn decode_joint_output(text: &str, ontology: &Ontology) -> JointDecoded {
    let Some(split_at) = text.find(JOINT_SENTINEL) else {
        return JointDecoded {
            state: DialogueState::new(),
            summary: text.trim().to_string(),
            missing_sentinel: true,
            state_error: None,
        };
    };
    let state_part = &text[..split_at];
    let summary = text[split_at + JOINT_SENTINEL.len()..].trim().to_string();
    match parse_state(state_part, ontology) {
        Ok(state) => JointDecoded {
            state,
            summary,
            missing_sentinel: false,
            state_error: None,
        },
        Err(e) => JointDecoded {
            state: DialogueState::new(),
            summary,
            missing_sentinel: false,
            state_error: Some(e.to_string()),
        },
    }
}

/// Fraction of aligned positions whose predicted and gold tuple sets match
/// exactly ("joint set match").
pub fn state_match_accuracy(pred: &[DialogueState], gold: &[DialogueState]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: gold.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Data(
            "state match accuracy is undefined on empty lists".into(),
        ));
    }
    let hits = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / pred.len() as f64)
}
