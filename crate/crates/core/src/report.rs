//! End-to-end evaluation of summary predictions against a gold corpus, and
//! the JSON report that pipelines consume.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::codec::DialogueState;
use crate::corpus::{Dialogue, Prediction};
use crate::error::{Error, Result};
use crate::extract::extract_tuples;
use crate::factual::{
    aggregate_report, classify_errors, factual_prf, CorpusFactualReport, ErrorProfile,
    FactualScore,
};
use crate::ontology::Ontology;
use crate::rouge::{rouge_l, rouge_n, RougeScore, Tokenizer};

pub const SCHEMA_VERSION: u32 = 1;

/// Where the hypothesis state for factual scoring comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateChannel {
    /// Extract tuples from the predicted summary text (the default).
    Extract,
    /// Use the state supplied in the prediction file (DST or joint-model
    /// outputs).
    PredFile,
}

impl std::fmt::Display for StateChannel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StateChannel::Extract => f.write_str("extract"),
            StateChannel::PredFile => f.write_str("pred-file"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub state_channel: StateChannel,
    pub tokenizer: Tokenizer,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            state_channel: StateChannel::Extract,
            tokenizer: Tokenizer::default(),
        }
    }
}

/// Scores for one (gold, prediction) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerSample {
    pub id: String,
    pub rouge1: RougeScore,
    pub rouge2: RougeScore,
    pub rouge_l: RougeScore,
    pub factual: FactualScore,
    pub errors: ErrorProfile,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanPrf {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeMeans {
    pub rouge1: MeanPrf,
    pub rouge2: MeanPrf,
    pub rouge_l: MeanPrf,
}

/// The scoring conventions in force, echoed so a report is interpretable
/// on its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub empty_sides: String,
    pub factual_matching: String,
    pub state_accuracy: String,
    pub rouge_counting: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions {
            empty_sides: "both sides empty score 1.0; exactly one empty side scores 0.0".into(),
            factual_matching:
                "exact 4-field tuple equality after canonical value normalization".into(),
            state_accuracy: "joint set match per sample".into(),
            rouge_counting: "clipped n-gram counts; sentence-level LCS for rouge-l".into(),
        }
    }
}

/// Everything needed to reproduce a run bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub gold: String,
    pub predictions: String,
    pub ontology: String,
    pub state_channel: String,
    pub workers: usize,
    pub tokenizer: Tokenizer,
    pub conventions: Conventions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub samples: usize,
    pub rouge: RougeMeans,
    pub factual: CorpusFactualReport,
    /// Joint set-match accuracy of supplied states; pred-file channel only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_match_accuracy: Option<f64>,
    pub config: ReportConfig,
}

/// Align predictions with gold dialogues by id. Prediction ids must cover
/// the gold corpus exactly; every gold dialogue must carry a summary.
pub fn pair_predictions<'a>(
    gold: &'a [Dialogue],
    predictions: &'a [Prediction],
) -> Result<Vec<(&'a Dialogue, &'a Prediction)>> {
    let by_id: BTreeMap<&str, &Prediction> =
        predictions.iter().map(|p| (p.id.as_str(), p)).collect();
    let missing: Vec<&str> = gold
        .iter()
        .filter(|d| !by_id.contains_key(d.id.as_str()))
        .map(|d| d.id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Data(format!(
            "prediction file is missing ids: {}",
            missing.join(", ")
        )));
    }
    let gold_ids: BTreeMap<&str, ()> = gold.iter().map(|d| (d.id.as_str(), ())).collect();
    let unknown: Vec<&str> = predictions
        .iter()
        .filter(|p| !gold_ids.contains_key(p.id.as_str()))
        .map(|p| p.id.as_str())
        .collect();
    if !unknown.is_empty() {
        return Err(Error::Data(format!(
            "prediction ids not present in the gold corpus: {}",
            unknown.join(", ")
        )));
    }
    let unlabeled: Vec<&str> = gold
        .iter()
        .filter(|d| d.summary.is_none())
        .map(|d| d.id.as_str())
        .collect();
    if !unlabeled.is_empty() {
        return Err(Error::Data(format!(
            "gold corpus has no summary for ids: {}",
            unlabeled.join(", ")
        )));
    }
    Ok(gold.iter().map(|d| (d, by_id[d.id.as_str()])).collect())
}

/// Score one aligned (gold, prediction) pair.
pub fn evaluate_sample(
    dialogue: &Dialogue,
    prediction: &Prediction,
    ontology: &Ontology,
    options: &EvalOptions,
) -> Result<PerSample> {
    let gold_summary = dialogue
        .summary
        .as_deref()
        .ok_or_else(|| Error::Data(format!("dialogue {} has no gold summary", dialogue.id)))?;
    let hyp_tokens = options.tokenizer.tokenize(&prediction.summary);
    let ref_tokens = options.tokenizer.tokenize(gold_summary);

    let mut flags = Vec::new();
    let hyp_state: DialogueState = match options.state_channel {
        StateChannel::Extract => {
            let extraction = extract_tuples(&prediction.summary, ontology);
            if !extraction.unattached_values.is_empty() {
                flags.push(format!(
                    "unattached_values={}",
                    extraction.unattached_values.len()
                ));
            }
            extraction.tuples
        }
        StateChannel::PredFile => prediction.state.clone().ok_or_else(|| {
            Error::Data(format!(
                "prediction {} carries no state but the pred-file channel was requested",
                prediction.id
            ))
        })?,
    };

    Ok(PerSample {
        id: dialogue.id.clone(),
        rouge1: rouge_n(&hyp_tokens, &ref_tokens, 1),
        rouge2: rouge_n(&hyp_tokens, &ref_tokens, 2),
        rouge_l: rouge_l(&hyp_tokens, &ref_tokens),
        factual: factual_prf(&hyp_state, &dialogue.state),
        errors: classify_errors(&hyp_state, &dialogue.state),
        flags,
    })
}

fn mean_prf(scores: impl Iterator<Item = RougeScore> + Clone, n: f64) -> MeanPrf {
    MeanPrf {
        precision: scores.clone().map(|s| s.precision).sum::<f64>() / n,
        recall: scores.clone().map(|s| s.recall).sum::<f64>() / n,
        f: scores.map(|s| s.f).sum::<f64>() / n,
    }
}

/// Aggregate per-sample scores into the corpus report.
pub fn build_report(
    samples: &[PerSample],
    state_match_accuracy: Option<f64>,
    config: ReportConfig,
) -> Result<EvaluationReport> {
    if samples.is_empty() {
        return Err(Error::Data("no samples to report on".into()));
    }
    let n = samples.len() as f64;
    let factual =
        aggregate_report(&samples.iter().map(|s| (s.factual, s.errors)).collect::<Vec<_>>())?;
    Ok(EvaluationReport {
        schema_version: SCHEMA_VERSION,
        samples: samples.len(),
        rouge: RougeMeans {
            rouge1: mean_prf(samples.iter().map(|s| s.rouge1), n),
            rouge2: mean_prf(samples.iter().map(|s| s.rouge2), n),
            rouge_l: mean_prf(samples.iter().map(|s| s.rouge_l), n),
        },
        factual,
        state_match_accuracy,
        config,
    })
}

/// Serial end-to-end evaluation: pair, score, aggregate.
pub fn evaluate_pairs(
    gold: &[Dialogue],
    predictions: &[Prediction],
    ontology: &Ontology,
    options: &EvalOptions,
    config: ReportConfig,
) -> Result<(Vec<PerSample>, EvaluationReport)> {
    let pairs = pair_predictions(gold, predictions)?;
    let samples: Vec<PerSample> = pairs
        .iter()
        .map(|(d, p)| evaluate_sample(d, p, ontology, options))
        .collect::<Result<_>>()?;
    let state_match = match options.state_channel {
        StateChannel::PredFile => {
            let hits = pairs
                .iter()
                .filter(|(d, p)| p.state.as_ref() == Some(&d.state))
                .count();
            Some(hits as f64 / pairs.len() as f64)
        }
        StateChannel::Extract => None,
    };
    let report = build_report(&samples, state_match, config)?;
    Ok((samples, report))
}
