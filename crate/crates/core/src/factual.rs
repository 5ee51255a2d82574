//! State-aware factual consistency metrics over (domain, intent, slot,
//! value) tuples, plus the five-type factual error classifier.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::codec::DialogueState;
use crate::error::{Error, Result};

/// Tuple precision/recall/F1 with the underlying counts.
///
/// Conventions: both sides empty scores 1.0 (asserting nothing about an
/// empty state is correct); exactly one side empty scores 0.0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactualScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_hyp: usize,
    pub n_tgt: usize,
    pub n_match: usize,
}

impl FactualScore {
    pub fn from_counts(n_match: usize, n_hyp: usize, n_tgt: usize) -> FactualScore {
        debug_assert!(n_match <= n_hyp.min(n_tgt));
        let (precision, recall, f1) = if n_hyp == 0 && n_tgt == 0 {
            (1.0, 1.0, 1.0)
        } else if n_hyp == 0 || n_tgt == 0 {
            (0.0, 0.0, 0.0)
        } else {
            let p = n_match as f64 / n_hyp as f64;
            let r = n_match as f64 / n_tgt as f64;
            let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            (p, r, f)
        };
        FactualScore {
            precision,
            recall,
            f1,
            n_hyp,
            n_tgt,
            n_match,
        }
    }
}

/// Exact-match tuple precision/recall/F1 between a hypothesis state (tuples
/// asserted by a summary) and the target (gold) state.
pub fn factual_prf(hyp: &DialogueState, tgt: &DialogueState) -> FactualScore {
    FactualScore::from_counts(hyp.intersection_len(tgt), hyp.len(), tgt.len())
}

/// Counts of the five factual error types. The categories are disjoint:
/// every unmatched tuple is accounted for exactly once, except that a slot
/// value error consumes one hypothesis and one target tuple together.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorProfile {
    pub domain_error: usize,
    pub intent_error: usize,
    pub slot_missing: usize,
    pub slot_redundancy: usize,
    pub slot_value_error: usize,
}

impl ErrorProfile {
    pub fn total(&self) -> usize {
        self.domain_error
            + self.intent_error
            + self.slot_missing
            + self.slot_redundancy
            + self.slot_value_error
    }

    /// Tuples consumed across both sides: value errors consume a pair.
    pub fn tuples_accounted(&self) -> usize {
        self.total() + self.slot_value_error
    }
}

/// Classify every unmatched tuple into one of the five error types.
///
/// The cascade runs over hypothesis tuples first: a tuple whose domain never
/// occurs in the target is a domain error; otherwise a tuple whose
/// (domain, intent) never occurs is an intent error; otherwise a tuple whose
/// (domain, intent, slot) key exists in the target with a different value is
/// a slot value error, consuming that target counterpart. Hypothesis
/// leftovers are slot redundancy, target leftovers slot missing.
pub fn classify_errors(hyp: &DialogueState, tgt: &DialogueState) -> ErrorProfile {
    let mut profile = ErrorProfile::default();

    let tgt_domains: BTreeSet<&str> = tgt.iter().map(|t| t.domain.as_str()).collect();
    let tgt_intents: BTreeSet<(&str, &str)> = tgt
        .iter()
        .map(|t| (t.domain.as_str(), t.intent.as_str()))
        .collect();

    let mut unmatched_tgt: BTreeMap<(&str, &str, &str), usize> = BTreeMap::new();
    for tuple in tgt.difference(hyp) {
        *unmatched_tgt.entry(tuple.slot_key()).or_default() += 1;
    }

    let mut value_candidates: BTreeMap<(&str, &str, &str), usize> = BTreeMap::new();
    for tuple in hyp.difference(tgt) {
        if !tgt_domains.contains(tuple.domain.as_str()) {
            profile.domain_error += 1;
        } else if !tgt_intents.contains(&(tuple.domain.as_str(), tuple.intent.as_str())) {
            profile.intent_error += 1;
        } else {
            *value_candidates.entry(tuple.slot_key()).or_default() += 1;
        }
    }

    for (key, hyp_count) in value_candidates {
        let tgt_count = unmatched_tgt.get_mut(&key);
        let pairs = match tgt_count {
            Some(count) => {
                let pairs = hyp_count.min(*count);
                *count -= pairs;
                pairs
            }
            None => 0,
        };
        profile.slot_value_error += pairs;
        profile.slot_redundancy += hyp_count - pairs;
    }
    profile.slot_missing += unmatched_tgt.values().sum::<usize>();

    profile
}

/// Sums of counts for micro scores plus running macro means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusFactualReport {
    pub samples: usize,
    /// Recomputed from summed match/hypothesis/target counts.
    pub micro: FactualScore,
    /// Unweighted means of per-sample precision/recall/F1.
    #[serde(rename = "macro")]
    pub macro_avg: MacroFactualScore,
    /// Mean count of each error type per sample.
    pub errors_per_sample: ErrorAverages,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroFactualScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorAverages {
    pub domain_error: f64,
    pub intent_error: f64,
    pub slot_missing: f64,
    pub slot_redundancy: f64,
    pub slot_value_error: f64,
}

/// Aggregate per-sample scores into the corpus report. Both micro and macro
/// averages are reported; error counts are averaged per sample.
pub fn aggregate_report(
    per_sample: &[(FactualScore, ErrorProfile)],
) -> Result<CorpusFactualReport> {
    if per_sample.is_empty() {
        return Err(Error::Data("cannot aggregate an empty sample list".into()));
    }
    let n = per_sample.len() as f64;
    let mut n_match = 0usize;
    let mut n_hyp = 0usize;
    let mut n_tgt = 0usize;
    let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
    let mut err_sums = [0usize; 5];
    for (score, errors) in per_sample {
        n_match += score.n_match;
        n_hyp += score.n_hyp;
        n_tgt += score.n_tgt;
        p_sum += score.precision;
        r_sum += score.recall;
        f_sum += score.f1;
        err_sums[0] += errors.domain_error;
        err_sums[1] += errors.intent_error;
        err_sums[2] += errors.slot_missing;
        err_sums[3] += errors.slot_redundancy;
        err_sums[4] += errors.slot_value_error;
    }
    Ok(CorpusFactualReport {
        samples: per_sample.len(),
        micro: FactualScore::from_counts(n_match, n_hyp, n_tgt),
        macro_avg: MacroFactualScore {
            precision: p_sum / n,
            recall: r_sum / n,
            f1: f_sum / n,
        },
        errors_per_sample: ErrorAverages {
            domain_error: err_sums[0] as f64 / n,
            intent_error: err_sums[1] as f64 / n,
            slot_missing: err_sums[2] as f64 / n,
            slot_redundancy: err_sums[3] as f64 / n,
            slot_value_error: err_sums[4] as f64 / n,
        },
    })
}
