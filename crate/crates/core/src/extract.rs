//! Ontology-driven tuple extraction from free-text summaries, plus the
//! deterministic template renderer that serves as its closed-loop
//! counterpart in tests.
//!
//! Extraction runs in three stages:
//! 1. the summary is segmented into domain scopes by longest-match domain
//!    cue phrases (domain names and declared synonyms), with scope
//!    boundaries snapping to the sentence start when the cue is the first
//!    one in its sentence and text before any cue falling through to the
//!    first detected domain;
//! 2. each scope is assigned intents by intent cue phrases, defaulting to
//!    the domain's sole intent, and sub-segmented when several distinct
//!    intents are cued; scopes of a multi-intent domain without any cue are
//!    treated as intent-ambiguous;
//! 3. slot values are matched longest-first against the scope's closed
//!    vocabularies and aliases; values matchable under several slots attach
//!    only when a slot cue word sits in or next to the match, and an
//!    explicit "no"/"not" immediately before a match suppresses it.
//!
//! Anything the pipeline cannot attach unambiguously lands in
//! [`ExtractionResult::unattached_values`] instead of being guessed.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::codec::{DialogueState, StateTuple};
use crate::error::{Error, Result};
use crate::ontology::{clean_surface, Ontology};
use crate::rouge::{word_for_digits, SpannedToken, Tokenizer};

/// A value that matched text but could not be attached to a single slot.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnattachedValue {
    /// The surface text as it appears in the summary.
    pub surface: String,
    /// Char span of the surface in the summary.
    pub span: (usize, usize),
    /// The (domain, intent, slot) triples the value could fill.
    pub candidates: Vec<(String, String, String)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtractionResult {
    pub tuples: DialogueState,
    /// Char span of the first matched surface per extracted tuple.
    pub spans: BTreeMap<StateTuple, (usize, usize)>,
    pub unattached_values: Vec<UnattachedValue>,
}

/// Extract (domain, intent, slot, value) tuples asserted by a summary.
pub fn extract_tuples(summary: &str, ontology: &Ontology) -> ExtractionResult {
    let tokenizer = Tokenizer::default();
    let tokens = tokenizer.tokenize_spans(summary);
    let mut result = ExtractionResult::default();
    if tokens.is_empty() {
        return result;
    }
    let chars: Vec<char> = summary.chars().collect();
    let sentence_start = sentence_start_flags(&chars, &tokens);

    for scope in domain_scopes(&tokens, &sentence_start, ontology) {
        process_scope(&tokens, &chars, &scope, ontology, &mut result);
    }
    result.unattached_values.sort();
    result.unattached_values.dedup();
    result
}

/// `flags[i]` is true when token `i` opens a sentence.
fn sentence_start_flags(chars: &[char], tokens: &[SpannedToken]) -> Vec<bool> {
    let mut flags = vec![false; tokens.len()];
    for (i, token) in tokens.iter().enumerate() {
        if i == 0 {
            flags[0] = true;
            continue;
        }
        let gap = &chars[tokens[i - 1].end..token.start];
        flags[i] = gap.iter().any(|c| matches!(c, '.' | '!' | '?'));
    }
    flags
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct CueHit {
    start: usize,
    end: usize,
    key: String,
}

/// Greedy longest-match resolution: longer hits win over overlapping
/// shorter ones; ties break towards the earlier start, then the key.
fn resolve_longest(mut hits: Vec<CueHit>) -> Vec<CueHit> {
    hits.sort_by(|a, b| {
        (b.end - b.start)
            .cmp(&(a.end - a.start))
            .then(a.start.cmp(&b.start))
            .then(a.key.cmp(&b.key))
    });
    let mut accepted: Vec<CueHit> = Vec::new();
    for hit in hits {
        if accepted
            .iter()
            .all(|kept| hit.end <= kept.start || hit.start >= kept.end)
        {
            accepted.push(hit);
        }
    }
    accepted.sort_by_key(|hit| hit.start);
    accepted
}

fn find_phrase_hits(
    tokens: &[SpannedToken],
    lo: usize,
    hi: usize,
    phrases: &[(Vec<String>, String)],
) -> Vec<CueHit> {
    let mut hits = Vec::new();
    for (pattern, key) in phrases {
        if pattern.is_empty() || pattern.len() > hi.saturating_sub(lo) {
            continue;
        }
        for start in lo..=hi - pattern.len() {
            if tokens[start..start + pattern.len()]
                .iter()
                .zip(pattern)
                .all(|(t, p)| t.text == *p)
            {
                hits.push(CueHit {
                    start,
                    end: start + pattern.len(),
                    key: key.clone(),
                });
            }
        }
    }
    hits
}

#[derive(Debug)]
struct Scope {
    domain: String,
    start: usize,
    end: usize,
}

fn domain_scopes(
    tokens: &[SpannedToken],
    sentence_start: &[bool],
    ontology: &Ontology,
) -> Vec<Scope> {
    let tokenizer = Tokenizer::default();
    let mut phrases = Vec::new();
    for domain in ontology.domains() {
        for cue in ontology.domain_cues(domain) {
            phrases.push((tokenizer.tokenize(&cue), domain.to_string()));
        }
    }
    let cues = resolve_longest(find_phrase_hits(tokens, 0, tokens.len(), &phrases));
    if cues.is_empty() {
        return Vec::new();
    }

    let sentence_start_of = |index: usize| (0..=index).rev().find(|&i| sentence_start[i]).unwrap_or(0);
    let mut scopes: Vec<Scope> = Vec::new();
    let mut boundaries = Vec::with_capacity(cues.len());
    for (i, cue) in cues.iter().enumerate() {
        let boundary = if i == 0 {
            0
        } else {
            let sentence = sentence_start_of(cue.start);
            if cues[i - 1].start >= sentence {
                // An earlier cue shares this sentence; split at the cue itself.
                cue.start
            } else {
                sentence.max(cues[i - 1].end)
            }
        };
        boundaries.push(boundary);
    }
    for (i, cue) in cues.iter().enumerate() {
        let end = boundaries.get(i + 1).copied().unwrap_or(tokens.len());
        scopes.push(Scope {
            domain: cue.key.clone(),
            start: boundaries[i],
            end,
        });
    }
    // Adjacent scopes of the same domain act as one.
    let mut merged: Vec<Scope> = Vec::new();
    for scope in scopes {
        match merged.last_mut() {
            Some(last) if last.domain == scope.domain && last.end == scope.start => {
                last.end = scope.end;
            }
            _ => merged.push(scope),
        }
    }
    merged
}

#[derive(Debug, Clone)]
struct Candidate {
    pattern: Vec<String>,
    intent: String,
    slot: String,
    value: String,
    /// The pattern itself carries the slot's cue word ("4-star", "4 stars").
    embedded_cue: bool,
}

fn push_digit_variants(
    out: &mut Vec<Candidate>,
    digits: &str,
    cues: &[String],
    intent: &str,
    slot: &str,
    value: &str,
) {
    let word = word_for_digits(digits);
    if let Some(word) = word {
        out.push(Candidate {
            pattern: vec![word.to_string()],
            intent: intent.into(),
            slot: slot.into(),
            value: value.into(),
            embedded_cue: false,
        });
    }
    for cue in cues {
        let mut forms = vec![
            vec![format!("{digits}-{cue}")],
            vec![digits.to_string(), cue.clone()],
        ];
        if let Some(word) = word {
            forms.push(vec![format!("{word}-{cue}")]);
            forms.push(vec![word.to_string(), cue.clone()]);
        }
        for pattern in forms {
            out.push(Candidate {
                pattern,
                intent: intent.into(),
                slot: slot.into(),
                value: value.into(),
                embedded_cue: true,
            });
        }
    }
}

/// Matchable surfaces for every closed slot of one (domain, intent).
fn slot_candidates(ontology: &Ontology, domain: &str, intent: &str) -> Vec<Candidate> {
    let tokenizer = Tokenizer::default();
    let mut out = Vec::new();
    let Some(slots) = ontology.slots_of(domain, intent) else {
        return out;
    };
    for slot in slots {
        if ontology.closed_values(domain, slot).is_none() {
            continue;
        }
        let cue_words: Vec<String> = ontology
            .slot_cues(domain, slot)
            .iter()
            .map(|c| clean_surface(c))
            .filter(|c| !c.is_empty() && !c.contains(' '))
            .collect();
        let mut surfaces: BTreeSet<(Vec<String>, String)> = BTreeSet::new();
        for value in ontology.closed_values(domain, slot).unwrap() {
            surfaces.insert((tokenizer.tokenize(value), value.clone()));
        }
        for (surface, value) in ontology.alias_surfaces(domain, slot) {
            surfaces.insert((tokenizer.tokenize(surface), value.to_string()));
        }
        for (pattern, value) in surfaces {
            if pattern.is_empty() {
                continue;
            }
            if pattern.len() == 1 && pattern[0].chars().all(|c| c.is_ascii_digit()) {
                push_digit_variants(&mut out, &pattern[0], &cue_words, intent, slot, &value);
            }
            out.push(Candidate {
                pattern,
                intent: intent.into(),
                slot: slot.clone(),
                value,
                embedded_cue: false,
            });
        }
    }
    out
}

#[derive(Debug, Clone)]
struct ValueHit {
    start: usize,
    end: usize,
    candidate: Candidate,
}

fn find_value_hits(
    tokens: &[SpannedToken],
    lo: usize,
    hi: usize,
    candidates: &[Candidate],
) -> Vec<ValueHit> {
    let mut hits = Vec::new();
    for candidate in candidates {
        let len = candidate.pattern.len();
        if len == 0 || len > hi.saturating_sub(lo) {
            continue;
        }
        for start in lo..=hi - len {
            if tokens[start..start + len]
                .iter()
                .zip(&candidate.pattern)
                .all(|(t, p)| t.text == *p)
            {
                hits.push(ValueHit {
                    start,
                    end: start + len,
                    candidate: candidate.clone(),
                });
            }
        }
    }
    hits
}

fn process_scope(
    tokens: &[SpannedToken],
    chars: &[char],
    scope: &Scope,
    ontology: &Ontology,
    result: &mut ExtractionResult,
) {
    let Some(intents) = ontology.intents_of(&scope.domain) else {
        return;
    };
    let tokenizer = Tokenizer::default();
    let mut phrases = Vec::new();
    for intent in intents {
        for cue in ontology.intent_cues(&scope.domain, intent) {
            phrases.push((tokenizer.tokenize(cue), intent.clone()));
        }
    }
    let cue_hits = resolve_longest(find_phrase_hits(tokens, scope.start, scope.end, &phrases));

    if cue_hits.is_empty() {
        if intents.len() == 1 {
            let intent = intents.iter().next().unwrap();
            let sole = std::slice::from_ref(intent);
            match_region(tokens, chars, scope, scope.start, scope.end, sole, true, ontology, result);
        } else {
            // Multi-intent domain without a cue: record, never guess.
            let all: Vec<String> = intents.iter().cloned().collect();
            match_region(tokens, chars, scope, scope.start, scope.end, &all, false, ontology, result);
        }
        return;
    }

    // Sub-segment at intent cues, merging consecutive hits of one intent;
    // text before the first cue belongs to the first detected intent.
    let mut segments: Vec<(String, usize)> = Vec::new();
    for hit in &cue_hits {
        match segments.last() {
            Some((intent, _)) if *intent == hit.key => {}
            _ => segments.push((hit.key.clone(), hit.start)),
        }
    }
    for (i, (intent, start)) in segments.iter().enumerate() {
        let lo = if i == 0 { scope.start } else { *start };
        let hi = segments
            .get(i + 1)
            .map(|(_, next)| *next)
            .unwrap_or(scope.end);
        let sole = std::slice::from_ref(intent);
        match_region(tokens, chars, scope, lo, hi, sole, true, ontology, result);
    }
}

#[allow(clippy::too_many_arguments)]
fn match_region(
    tokens: &[SpannedToken],
    chars: &[char],
    scope: &Scope,
    lo: usize,
    hi: usize,
    intents: &[String],
    attach: bool,
    ontology: &Ontology,
    result: &mut ExtractionResult,
) {
    if lo >= hi {
        return;
    }
    let mut candidates = Vec::new();
    for intent in intents {
        candidates.extend(slot_candidates(ontology, &scope.domain, intent));
    }
    let hits = find_value_hits(tokens, lo, hi, &candidates);
    if hits.is_empty() {
        return;
    }

    // Group identical spans: they are alternative readings, not conflicts.
    let mut groups: BTreeMap<(usize, usize), Vec<ValueHit>> = BTreeMap::new();
    for hit in hits {
        groups.entry((hit.start, hit.end)).or_default().push(hit);
    }
    let spans = resolve_longest(
        groups
            .keys()
            .map(|&(start, end)| CueHit {
                start,
                end,
                key: String::new(),
            })
            .collect(),
    );

    for span in spans {
        let group = &groups[&(span.start, span.end)];
        // Explicit negation immediately before the match suppresses it.
        if span.start > 0 {
            let before = &tokens[span.start - 1].text;
            if before == "no" || before == "not" {
                continue;
            }
        }
        let surface: String = chars[tokens[span.start].start..tokens[span.end - 1].end]
            .iter()
            .collect();
        let char_span = (tokens[span.start].start, tokens[span.end - 1].end);

        if !attach {
            result.unattached_values.push(UnattachedValue {
                surface,
                span: char_span,
                candidates: triple_candidates(&scope.domain, group),
            });
            continue;
        }

        let slots: BTreeSet<&str> = group.iter().map(|h| h.candidate.slot.as_str()).collect();
        let chosen_slot = if slots.len() == 1 {
            Some(*slots.iter().next().unwrap())
        } else {
            let embedded: BTreeSet<&str> = group
                .iter()
                .filter(|h| h.candidate.embedded_cue)
                .map(|h| h.candidate.slot.as_str())
                .collect();
            if embedded.len() == 1 {
                Some(*embedded.iter().next().unwrap())
            } else {
                adjacent_cue_slot(tokens, lo, hi, span.start, span.end, &slots, scope, ontology)
            }
        };

        match chosen_slot {
            Some(slot) => {
                let sub: Vec<&ValueHit> =
                    group.iter().filter(|h| h.candidate.slot == slot).collect();
                let value = pick_value(&surface, slot, &sub, scope, ontology);
                let tuple = StateTuple::new(
                    scope.domain.clone(),
                    sub[0].candidate.intent.clone(),
                    slot,
                    value,
                );
                result.spans.entry(tuple.clone()).or_insert(char_span);
                result.tuples.insert(tuple);
            }
            None => result.unattached_values.push(UnattachedValue {
                surface,
                span: char_span,
                candidates: triple_candidates(&scope.domain, group),
            }),
        }
    }
}

fn triple_candidates(domain: &str, group: &[ValueHit]) -> Vec<(String, String, String)> {
    let set: BTreeSet<(String, String, String)> = group
        .iter()
        .map(|h| {
            (
                domain.to_string(),
                h.candidate.intent.clone(),
                h.candidate.slot.clone(),
            )
        })
        .collect();
    set.into_iter().collect()
}

/// Disambiguate by a cue word directly before the match, falling back to a
/// cue directly after it. The before position wins because slot mentions
/// canonically lead their values ("stars 4"); without the priority a value
/// between two cues ("internet no, parking no") would stay ambiguous.
#[allow(clippy::too_many_arguments)]
fn adjacent_cue_slot<'a>(
    tokens: &[SpannedToken],
    lo: usize,
    hi: usize,
    start: usize,
    end: usize,
    slots: &BTreeSet<&'a str>,
    scope: &Scope,
    ontology: &Ontology,
) -> Option<&'a str> {
    let mut neighbours = Vec::new();
    if start > lo {
        neighbours.push(tokens[start - 1].text.as_str());
    }
    if end < hi {
        neighbours.push(tokens[end].text.as_str());
    }
    for neighbour in neighbours {
        let cued: Vec<&str> = slots
            .iter()
            .filter(|slot| {
                ontology
                    .slot_cues(&scope.domain, slot)
                    .iter()
                    .flat_map(|cue| cue.split_whitespace())
                    .any(|word| clean_surface(word) == neighbour)
            })
            .copied()
            .collect();
        if let [only] = cued.as_slice() {
            return Some(only);
        }
        if !cued.is_empty() {
            return None;
        }
    }
    None
}

/// When one span carries several values of the same slot, prefer the
/// ontology's own normalization of the surface, then the smallest value.
fn pick_value(
    surface: &str,
    slot: &str,
    hits: &[&ValueHit],
    scope: &Scope,
    ontology: &Ontology,
) -> String {
    let values: BTreeSet<&str> = hits.iter().map(|h| h.candidate.value.as_str()).collect();
    if values.len() == 1 {
        return values.iter().next().unwrap().to_string();
    }
    if let Ok(Some(normalized)) = ontology.normalize_value(&scope.domain, slot, surface) {
        if values.contains(normalized.as_str()) {
            return normalized;
        }
    }
    values.iter().next().unwrap().to_string()
}

/// Render a deterministic English reference summary for a state: one
/// sentence per (domain, intent) group, slots written as "<cue> <value>" in
/// lexicographic slot order.
///
/// The renderer is deliberately independent of the extractor's matching
/// machinery; the pair is exercised as a closed loop in tests.
pub fn render_reference_summary(state: &DialogueState, ontology: &Ontology) -> Result<String> {
    let mut groups: BTreeMap<(String, String), Vec<&StateTuple>> = BTreeMap::new();
    for tuple in state.iter() {
        groups
            .entry((tuple.domain.clone(), tuple.intent.clone()))
            .or_default()
            .push(tuple);
    }
    let mut sentences = Vec::new();
    for ((domain, intent), tuples) in groups {
        let template = ontology.intent_template(&domain, &intent).ok_or_else(|| {
            Error::MissingTemplate {
                domain: domain.clone(),
                intent: intent.clone(),
            }
        })?;
        let parts: Vec<String> = tuples
            .iter()
            .map(|t| {
                let cue = ontology
                    .slot_cues(&domain, &t.slot)
                    .first()
                    .cloned()
                    .unwrap_or_else(|| t.slot.clone());
                format!("{cue} {}", t.value)
            })
            .collect();
        let listing = match parts.len() {
            1 => parts[0].clone(),
            n => format!("{} and {}", parts[..n - 1].join(", "), parts[n - 1]),
        };
        sentences.push(format!("{template} with {listing}."));
    }
    Ok(sentences.join(" "))
}
