//! Task ontology: domains, intents, slots, legal values, aliases, and the
//! extraction cues used by the tuple extractor and the reference renderer.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::rouge::fold_digit_word;

/// Legal values for one (domain, slot) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValueSet {
    /// Free-form slot (names, times); any cleaned surface is accepted.
    Open,
    /// Closed vocabulary in file order; entries are the canonical forms.
    Closed(Vec<String>),
}

/// Per-intent extraction cues and the rendering template.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IntentCues {
    pub cues: Vec<String>,
    pub template: Option<String>,
}

/// Cue phrases declared under a domain's `extraction` key.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractionConfig {
    pub domain_synonyms: Vec<String>,
    pub intents: BTreeMap<String, IntentCues>,
    pub slot_cues: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct Ontology {
    domains: BTreeSet<String>,
    intents: BTreeMap<String, BTreeSet<String>>,
    slots: BTreeMap<(String, String), BTreeSet<String>>,
    values: BTreeMap<(String, String), ValueSet>,
    /// Cleaned surface form -> canonical value, per (domain, slot).
    lookup: BTreeMap<(String, String), BTreeMap<String, String>>,
    extraction: BTreeMap<String, ExtractionConfig>,
}

#[derive(Deserialize)]
struct RawOntology {
    domains: BTreeMap<String, RawDomain>,
}

#[derive(Deserialize)]
struct RawDomain {
    intents: BTreeMap<String, RawIntent>,
    #[serde(default)]
    values: BTreeMap<String, RawValues>,
    #[serde(default)]
    aliases: BTreeMap<String, BTreeMap<String, String>>,
    #[serde(default)]
    extraction: RawExtraction,
}

#[derive(Deserialize)]
struct RawIntent {
    slots: Vec<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawValues {
    Marker(String),
    Closed(Vec<String>),
}

#[derive(Deserialize, Default)]
struct RawExtraction {
    #[serde(default)]
    domain_synonyms: Vec<String>,
    #[serde(default)]
    intents: BTreeMap<String, RawIntentCues>,
    #[serde(default)]
    slot_cues: BTreeMap<String, Vec<String>>,
}

#[derive(Deserialize)]
struct RawIntentCues {
    #[serde(default)]
    cues: Vec<String>,
    #[serde(default)]
    template: Option<String>,
}

/// Lowercase, trim, and collapse whitespace runs.
pub(crate) fn clean_surface(surface: &str) -> String {
    surface
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Fold digit words ("four" -> "4") and star-pattern suffixes
/// ("4-star", "four stars" -> "4") on a cleaned surface.
pub(crate) fn fold_surface(cleaned: &str) -> String {
    let core = ["-stars", " stars", "-star", " star"]
        .iter()
        .find_map(|suffix| cleaned.strip_suffix(suffix))
        .unwrap_or(cleaned);
    if core.is_empty() {
        return cleaned.to_string();
    }
    if let Some(digits) = fold_digit_word(core) {
        return digits.to_string();
    }
    if core.len() < cleaned.len() && core.chars().all(|c| c.is_ascii_digit()) {
        return core.to_string();
    }
    cleaned.to_string()
}

fn normalize_key(surface: &str) -> String {
    fold_surface(&clean_surface(surface))
}

/// Load and validate an ontology from a single JSON document.
pub fn load_ontology(path: impl AsRef<Path>) -> Result<Ontology> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ontology::from_json(&text)
}

impl Ontology {
    pub fn from_json(text: &str) -> Result<Ontology> {
        let raw: RawOntology =
            serde_json::from_str(text).map_err(|e| Error::Ontology(format!("bad JSON: {e}")))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawOntology) -> Result<Ontology> {
        let mut ontology = Ontology {
            domains: BTreeSet::new(),
            intents: BTreeMap::new(),
            slots: BTreeMap::new(),
            values: BTreeMap::new(),
            lookup: BTreeMap::new(),
            extraction: BTreeMap::new(),
        };

        for (domain, raw_domain) in raw.domains {
            ontology.domains.insert(domain.clone());
            let mut domain_slots: BTreeSet<String> = BTreeSet::new();
            let mut intent_names = BTreeSet::new();
            for (intent, raw_intent) in &raw_domain.intents {
                intent_names.insert(intent.clone());
                let slots: BTreeSet<String> = raw_intent.slots.iter().cloned().collect();
                domain_slots.extend(slots.iter().cloned());
                ontology
                    .slots
                    .insert((domain.clone(), intent.clone()), slots);
            }
            ontology.intents.insert(domain.clone(), intent_names);

            for slot in &domain_slots {
                let value_set = match raw_domain.values.get(slot) {
                    Some(RawValues::Marker(marker)) if marker == "open" => ValueSet::Open,
                    Some(RawValues::Marker(other)) => {
                        return Err(Error::Ontology(format!(
                            "domain {domain:?} slot {slot:?}: unknown value marker {other:?} (expected \"open\" or a list)"
                        )))
                    }
                    Some(RawValues::Closed(values)) => ValueSet::Closed(values.clone()),
                    None => {
                        return Err(Error::Ontology(format!(
                            "domain {domain:?} slot {slot:?} has no values entry"
                        )))
                    }
                };
                let mut lookup = BTreeMap::new();
                if let Some(aliases) = raw_domain.aliases.get(slot) {
                    for (surface, target) in aliases {
                        if let ValueSet::Closed(values) = &value_set {
                            if !values.contains(target) {
                                return Err(Error::Ontology(format!(
                                    "domain {domain:?} slot {slot:?}: alias {surface:?} targets {target:?} which is not a listed value"
                                )));
                            }
                        }
                        lookup.insert(normalize_key(surface), target.clone());
                    }
                }
                if let ValueSet::Closed(values) = &value_set {
                    // Listed value forms win over alias surfaces on collision.
                    for value in values {
                        lookup.insert(normalize_key(value), value.clone());
                    }
                }
                ontology
                    .values
                    .insert((domain.clone(), slot.clone()), value_set);
                ontology
                    .lookup
                    .insert((domain.clone(), slot.clone()), lookup);
            }
            for slot in raw_domain.aliases.keys() {
                if !domain_slots.contains(slot) {
                    return Err(Error::Ontology(format!(
                        "domain {domain:?}: aliases declared for unknown slot {slot:?}"
                    )));
                }
            }

            let mut config = ExtractionConfig {
                domain_synonyms: raw_domain.extraction.domain_synonyms,
                ..ExtractionConfig::default()
            };
            for (intent, raw_cues) in raw_domain.extraction.intents {
                if !ontology.intents[&domain].contains(&intent) {
                    return Err(Error::Ontology(format!(
                        "domain {domain:?}: extraction cues declared for unknown intent {intent:?}"
                    )));
                }
                config.intents.insert(
                    intent,
                    IntentCues {
                        cues: raw_cues.cues,
                        template: raw_cues.template,
                    },
                );
            }
            for (slot, cues) in raw_domain.extraction.slot_cues {
                if !domain_slots.contains(&slot) {
                    return Err(Error::Ontology(format!(
                        "domain {domain:?}: slot cues declared for unknown slot {slot:?}"
                    )));
                }
                config.slot_cues.insert(slot, cues);
            }
            ontology.extraction.insert(domain, config);
        }
        Ok(ontology)
    }

    pub fn domains(&self) -> impl Iterator<Item = &str> {
        self.domains.iter().map(String::as_str)
    }

    pub fn domain_count(&self) -> usize {
        self.domains.len()
    }

    pub fn has_domain(&self, domain: &str) -> bool {
        self.domains.contains(domain)
    }

    pub fn intents_of(&self, domain: &str) -> Option<&BTreeSet<String>> {
        self.intents.get(domain)
    }

    pub fn slots_of(&self, domain: &str, intent: &str) -> Option<&BTreeSet<String>> {
        self.slots.get(&(domain.to_string(), intent.to_string()))
    }

    pub fn has_triple(&self, domain: &str, intent: &str, slot: &str) -> bool {
        self.slots_of(domain, intent)
            .is_some_and(|slots| slots.contains(slot))
    }

    pub fn value_set(&self, domain: &str, slot: &str) -> Option<&ValueSet> {
        self.values.get(&(domain.to_string(), slot.to_string()))
    }

    pub fn is_open(&self, domain: &str, slot: &str) -> bool {
        matches!(self.value_set(domain, slot), Some(ValueSet::Open))
    }

    /// Canonical values of a closed slot, in file order.
    pub fn closed_values(&self, domain: &str, slot: &str) -> Option<&[String]> {
        match self.value_set(domain, slot) {
            Some(ValueSet::Closed(values)) => Some(values),
            _ => None,
        }
    }

    /// Alias surface -> canonical pairs for one slot (cleaned surfaces).
    pub fn alias_surfaces(&self, domain: &str, slot: &str) -> impl Iterator<Item = (&str, &str)> {
        self.lookup
            .get(&(domain.to_string(), slot.to_string()))
            .into_iter()
            .flat_map(|m| m.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }

    pub fn extraction(&self, domain: &str) -> Option<&ExtractionConfig> {
        self.extraction.get(domain)
    }

    /// Cue phrases that open a scope for `domain`: its name plus synonyms.
    pub fn domain_cues(&self, domain: &str) -> Vec<String> {
        let mut cues = vec![domain.to_string()];
        if let Some(config) = self.extraction.get(domain) {
            cues.extend(config.domain_synonyms.iter().cloned());
        }
        cues
    }

    pub fn intent_cues(&self, domain: &str, intent: &str) -> &[String] {
        self.extraction
            .get(domain)
            .and_then(|c| c.intents.get(intent))
            .map(|c| c.cues.as_slice())
            .unwrap_or(&[])
    }

    pub fn intent_template(&self, domain: &str, intent: &str) -> Option<&str> {
        self.extraction
            .get(domain)
            .and_then(|c| c.intents.get(intent))
            .and_then(|c| c.template.as_deref())
    }

    pub fn slot_cues(&self, domain: &str, slot: &str) -> &[String] {
        self.extraction
            .get(domain)
            .and_then(|c| c.slot_cues.get(slot))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// All legal (domain, intent, slot, value) combinations over closed slots.
    pub fn closed_tuple_space(&self) -> Vec<(String, String, String, String)> {
        let mut space = Vec::new();
        for ((domain, intent), slots) in &self.slots {
            for slot in slots {
                if let Some(values) = self.closed_values(domain, slot) {
                    for value in values {
                        space.push((
                            domain.clone(),
                            intent.clone(),
                            slot.clone(),
                            value.clone(),
                        ));
                    }
                }
            }
        }
        space
    }

    /// Map a surface form onto the slot's canonical value.
    ///
    /// Cleaning lowercases, collapses whitespace, and folds digit words and
    /// star-pattern suffixes. Open-valued slots accept the cleaned surface
    /// verbatim; closed slots return `None` when nothing matches.
    pub fn normalize_value(
        &self,
        domain: &str,
        slot: &str,
        surface: &str,
    ) -> Result<Option<String>> {
        let key = (domain.to_string(), slot.to_string());
        let Some(value_set) = self.values.get(&key) else {
            return Err(Error::UnknownSlot {
                domain: domain.to_string(),
                slot: slot.to_string(),
            });
        };
        let cleaned = clean_surface(surface);
        if let Some(canonical) = self.lookup[&key].get(&fold_surface(&cleaned)) {
            return Ok(Some(canonical.clone()));
        }
        match value_set {
            ValueSet::Open => Ok(Some(cleaned)),
            ValueSet::Closed(_) => Ok(None),
        }
    }
}
