//! Seeded dialogue-state noise injection and domain-adaptation splits.
//!
//! All randomness flows from a single `u64` seed through ChaCha8, so equal
//! inputs give byte-identical outputs on every platform. Parallel callers
//! derive one seed per dialogue with [`derive_seed`].

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{DialogueState, StateTuple};
use crate::corpus::Dialogue;
use crate::error::{Error, Result};
use crate::ontology::Ontology;

/// Relative weights of the three edit operations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperationMix {
    pub delete: f64,
    pub replace: f64,
    pub insert: f64,
}

impl Default for OperationMix {
    fn default() -> Self {
        OperationMix {
            delete: 1.0,
            replace: 1.0,
            insert: 1.0,
        }
    }
}

impl OperationMix {
    fn validate(&self) -> Result<()> {
        let weights = [self.delete, self.replace, self.insert];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Data("operation weights must be non-negative".into()));
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Data("operation weights must not all be zero".into()));
        }
        Ok(())
    }
}

/// Parameters mapping a target tuple-level accuracy to seeded edits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub target_accuracy: f64,
    pub operation_mix: OperationMix,
    pub seed: u64,
}

/// Tuple-level accuracy of a noisy state against its gold source:
/// `|noisy ∩ gold| / max(|noisy|, |gold|)`, so deletions, replacements, and
/// insertions all push the score down symmetrically. Two empty states score
/// 1.0.
pub fn noisy_accuracy(noisy: &DialogueState, gold: &DialogueState) -> f64 {
    let denominator = noisy.len().max(gold.len());
    if denominator == 0 {
        return 1.0;
    }
    noisy.intersection_len(gold) as f64 / denominator as f64
}

/// Stable per-dialogue seed: the run seed xored with an FNV-1a hash of the
/// dialogue id, so parallel perturbation never depends on worker order.
pub fn derive_seed(seed: u64, id: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in id.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    seed ^ hash
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum EditOp {
    Delete,
    Replace,
    Insert,
}

fn draw_op(rng: &mut ChaCha8Rng, mix: &OperationMix) -> EditOp {
    let total = mix.delete + mix.replace + mix.insert;
    let x = rng.random_range(0.0..total);
    if x < mix.delete {
        EditOp::Delete
    } else if x < mix.delete + mix.replace {
        EditOp::Replace
    } else {
        EditOp::Insert
    }
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    &items[rng.random_range(0..items.len())]
}

/// Perturb a gold state down to (just under) the target tuple-level
/// accuracy with seeded delete/replace/insert edits.
///
/// Edits are applied one at a time until the realized accuracy reaches the
/// target; every edit lowers the accuracy by at most one tuple's worth, so
/// the result always lands within `1/n` of the target. An insert that is
/// impossible (the ontology's closed tuples are exhausted) falls back to a
/// replace, and an impossible replace (no closed slot with a spare legal
/// value) falls back to a delete, in that order.
pub fn inject_noise(
    state: &DialogueState,
    spec: &NoiseSpec,
    ontology: &Ontology,
) -> Result<DialogueState> {
    if !(0.0..=1.0).contains(&spec.target_accuracy) {
        return Err(Error::Data(format!(
            "target accuracy {} outside [0, 1]",
            spec.target_accuracy
        )));
    }
    spec.operation_mix.validate()?;
    if state.is_empty() {
        return Ok(state.clone());
    }

    let legal: Vec<StateTuple> = ontology
        .closed_tuple_space()
        .into_iter()
        .map(|(d, i, s, v)| StateTuple::new(d, i, s, v))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut noisy = state.clone();

    while noisy_accuracy(&noisy, state) > spec.target_accuracy + 1e-12 {
        let mut op = draw_op(&mut rng, &spec.operation_mix);

        if op == EditOp::Insert {
            let pool: Vec<&StateTuple> = legal
                .iter()
                .filter(|t| !noisy.contains(t) && !state.contains(t))
                .collect();
            if pool.is_empty() {
                op = EditOp::Replace;
            } else {
                noisy.insert((*pick(&mut rng, &pool)).clone());
                continue;
            }
        }

        if op == EditOp::Replace {
            // Replace targets an intact gold tuple and never writes a value
            // the gold state holds for the same slot key, so each replace
            // strictly lowers the intersection.
            let targets: Vec<(StateTuple, Vec<String>)> = noisy
                .iter()
                .filter(|t| state.contains(t))
                .filter_map(|t| {
                    let values = ontology.closed_values(&t.domain, &t.slot)?;
                    let gold_values: BTreeSet<&str> = state
                        .iter()
                        .filter(|g| g.slot_key() == t.slot_key())
                        .map(|g| g.value.as_str())
                        .collect();
                    let pool: Vec<String> = values
                        .iter()
                        .filter(|v| !gold_values.contains(v.as_str()))
                        .cloned()
                        .collect();
                    (!pool.is_empty()).then(|| (t.clone(), pool))
                })
                .collect();
            if targets.is_empty() {
                op = EditOp::Delete;
            } else {
                let (target, pool) = pick(&mut rng, &targets);
                let value = pick(&mut rng, pool).clone();
                noisy.remove(target);
                noisy.insert(StateTuple { value, ..target.clone() });
                continue;
            }
        }

        debug_assert!(op == EditOp::Delete);
        let targets: Vec<StateTuple> = noisy
            .iter()
            .filter(|t| state.contains(t))
            .cloned()
            .collect();
        debug_assert!(!targets.is_empty(), "accuracy > 0 implies a shared tuple");
        let target = pick(&mut rng, &targets).clone();
        noisy.remove(&target);
    }

    Ok(noisy)
}

/// One domain-adaptation split: single-domain dialogues of the target
/// domain form the test pool, the other domains form the training set, and
/// a seeded few-shot sample of the target pool moves over to training.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSplit {
    pub target_domain: String,
    /// Ids of training dialogues, few-shot sample included.
    pub train: Vec<String>,
    /// Ids of held-out target-domain dialogues.
    pub test: Vec<String>,
    /// The sampled target-domain ids also present in `train`.
    pub fewshot: Vec<String>,
    pub seed: u64,
    /// The requested few-shot count exceeded the pool and was clamped.
    pub fewshot_truncated: bool,
}

/// Split a corpus for domain adaptation. Multi-domain dialogues are
/// excluded; the few-shot ids are removed from the test side so train and
/// test stay disjoint.
pub fn make_da_splits(
    corpus: &[Dialogue],
    target_domain: &str,
    fewshot_fraction: f64,
    seed: u64,
) -> Result<DomainSplit> {
    if !fewshot_fraction.is_finite() || fewshot_fraction < 0.0 {
        return Err(Error::Data(format!(
            "few-shot fraction {fewshot_fraction} must be non-negative"
        )));
    }
    let single_domain = |d: &Dialogue| d.domains.len() == 1;
    let target_pool: Vec<&Dialogue> = corpus
        .iter()
        .filter(|d| single_domain(d) && d.domains.iter().any(|x| x == target_domain))
        .collect();
    if target_pool.is_empty() {
        return Err(Error::EmptyDomainPool(target_domain.to_string()));
    }
    let mut train: Vec<String> = corpus
        .iter()
        .filter(|d| single_domain(d) && !d.domains.iter().any(|x| x == target_domain))
        .map(|d| d.id.clone())
        .collect();

    let requested = (fewshot_fraction * target_pool.len() as f64).round() as usize;
    let fewshot_truncated = requested > target_pool.len();
    let count = requested.min(target_pool.len());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..target_pool.len()).collect();
    for i in 0..count {
        let j = rng.random_range(i..indices.len());
        indices.swap(i, j);
    }
    let mut chosen: Vec<usize> = indices[..count].to_vec();
    chosen.sort_unstable();
    let chosen_set: BTreeSet<usize> = chosen.iter().copied().collect();

    let fewshot: Vec<String> = chosen.iter().map(|&i| target_pool[i].id.clone()).collect();
    let test: Vec<String> = target_pool
        .iter()
        .enumerate()
        .filter(|(i, _)| !chosen_set.contains(i))
        .map(|(_, d)| d.id.clone())
        .collect();
    train.extend(fewshot.iter().cloned());

    Ok(DomainSplit {
        target_domain: target_domain.to_string(),
        train,
        test,
        fewshot,
        seed,
        fewshot_truncated,
    })
}
