//! Python bindings: the ontology, tokenizer, metrics, state codec,
//! extractor, baselines, and noise injection, with states passed as lists
//! of (domain, intent, slot, value) tuples.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use statesum::baselines;
use statesum::codec;
use statesum::corpus::{Dialogue, Speaker, Utterance};
use statesum::extract;
use statesum::factual;
use statesum::perturb;
use statesum::rouge;
use statesum::DialogueState;
use statesum::StateTuple;
use statesum::Tokenizer;

type Tuple4 = (String, String, String, String);
type UnattachedRecord = (String, (usize, usize), Vec<(String, String, String)>);

fn to_state(tuples: Vec<Tuple4>) -> DialogueState {
    tuples
        .into_iter()
        .map(|(domain, intent, slot, value)| StateTuple::new(domain, intent, slot, value))
        .collect()
}

fn from_state(state: &DialogueState) -> Vec<Tuple4> {
    state
        .iter()
        .map(|t| {
            (
                t.domain.clone(),
                t.intent.clone(),
                t.slot.clone(),
                t.value.clone(),
            )
        })
        .collect()
}

fn to_py_err(e: statesum::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// The task schema: domains, intents, slots, legal values, and aliases.
#[pyclass(name = "Ontology", frozen)]
struct PyOntology {
    inner: statesum::Ontology,
}

#[pymethods]
impl PyOntology {
    /// Load the ontology from a JSON file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyOntology {
            inner: statesum::ontology::load_ontology(path).map_err(to_py_err)?,
        })
    }

    /// Parse the ontology from a JSON string.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyOntology {
            inner: statesum::Ontology::from_json(text).map_err(to_py_err)?,
        })
    }

    fn domains(&self) -> Vec<String> {
        self.inner.domains().map(str::to_string).collect()
    }

    /// Map a surface form onto the slot's canonical value; None when the
    /// surface matches nothing for a closed slot.
    fn normalize_value(&self, domain: &str, slot: &str, surface: &str) -> PyResult<Option<String>> {
        self.inner
            .normalize_value(domain, slot, surface)
            .map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!("Ontology({} domains)", self.inner.domain_count())
    }
}

fn build_tokenizer(lowercase: bool, strip_punctuation: bool, fold_digit_words: bool) -> Tokenizer {
    Tokenizer {
        lowercase,
        strip_punctuation,
        fold_digit_words,
    }
}

/// Tokenize with the toolkit's canonical rules.
#[pyfunction]
#[pyo3(signature = (text, lowercase=true, strip_punctuation=true, fold_digit_words=false))]
fn tokenize(
    text: &str,
    lowercase: bool,
    strip_punctuation: bool,
    fold_digit_words: bool,
) -> Vec<String> {
    build_tokenizer(lowercase, strip_punctuation, fold_digit_words).tokenize(text)
}

fn score_dict<'py>(py: Python<'py>, score: rouge::RougeScore) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("precision", score.precision)?;
    d.set_item("recall", score.recall)?;
    d.set_item("f", score.f)?;
    Ok(d)
}

/// ROUGE-1, ROUGE-2, and ROUGE-L (precision, recall, F) for raw texts.
#[pyfunction]
#[pyo3(signature = (hypothesis, reference, lowercase=true, strip_punctuation=true, fold_digit_words=false))]
fn rouge_scores<'py>(
    py: Python<'py>,
    hypothesis: &str,
    reference: &str,
    lowercase: bool,
    strip_punctuation: bool,
    fold_digit_words: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let tokenizer = build_tokenizer(lowercase, strip_punctuation, fold_digit_words);
    let hyp = tokenizer.tokenize(hypothesis);
    let reference = tokenizer.tokenize(reference);
    let out = PyDict::new(py);
    out.set_item("rouge1", score_dict(py, rouge::rouge_n(&hyp, &reference, 1))?)?;
    out.set_item("rouge2", score_dict(py, rouge::rouge_n(&hyp, &reference, 2))?)?;
    out.set_item("rouge_l", score_dict(py, rouge::rouge_l(&hyp, &reference))?)?;
    Ok(out)
}

/// Render a state as the flat `domain intent(slot=value ;slot=value)` form.
#[pyfunction]
fn serialize_state(tuples: Vec<Tuple4>) -> String {
    codec::serialize_state(&to_state(tuples))
}

/// Parse the flat state form back into tuples.
#[pyfunction]
fn parse_state(text: &str, ontology: PyRef<PyOntology>) -> PyResult<Vec<Tuple4>> {
    codec::parse_state(text, &ontology.inner)
        .map(|s| from_state(&s))
        .map_err(to_py_err)
}

/// Build the joint decoder target `state <|endoftext|> summary`.
#[pyfunction]
fn encode_joint_target(tuples: Vec<Tuple4>, summary: &str) -> PyResult<String> {
    codec::encode_joint_target(&to_state(tuples), summary).map_err(to_py_err)
}

/// Split a joint model output into state, summary, and flags.
#[pyfunction]
fn decode_joint_output<'py>(
    py: Python<'py>,
    text: &str,
    ontology: PyRef<PyOntology>,
) -> PyResult<Bound<'py, PyDict>> {
    let decoded = codec::decode_joint_output(text, &ontology.inner);
    let out = PyDict::new(py);
    out.set_item("state", from_state(&decoded.state))?;
    out.set_item("summary", decoded.summary)?;
    out.set_item("missing_sentinel", decoded.missing_sentinel)?;
    out.set_item("state_error", decoded.state_error)?;
    Ok(out)
}

/// Fraction of aligned positions whose tuple sets match exactly.
#[pyfunction]
fn state_match_accuracy(pred: Vec<Vec<Tuple4>>, gold: Vec<Vec<Tuple4>>) -> PyResult<f64> {
    let pred: Vec<DialogueState> = pred.into_iter().map(to_state).collect();
    let gold: Vec<DialogueState> = gold.into_iter().map(to_state).collect();
    codec::state_match_accuracy(&pred, &gold).map_err(to_py_err)
}

/// Tuple precision/recall/F1 of a hypothesis state against the gold state.
#[pyfunction]
fn factual_prf<'py>(
    py: Python<'py>,
    hyp: Vec<Tuple4>,
    tgt: Vec<Tuple4>,
) -> PyResult<Bound<'py, PyDict>> {
    let score = factual::factual_prf(&to_state(hyp), &to_state(tgt));
    let out = PyDict::new(py);
    out.set_item("precision", score.precision)?;
    out.set_item("recall", score.recall)?;
    out.set_item("f1", score.f1)?;
    out.set_item("n_hyp", score.n_hyp)?;
    out.set_item("n_tgt", score.n_tgt)?;
    out.set_item("n_match", score.n_match)?;
    Ok(out)
}

/// Counts of the five factual error types.
#[pyfunction]
fn classify_errors<'py>(
    py: Python<'py>,
    hyp: Vec<Tuple4>,
    tgt: Vec<Tuple4>,
) -> PyResult<Bound<'py, PyDict>> {
    let profile = factual::classify_errors(&to_state(hyp), &to_state(tgt));
    let out = PyDict::new(py);
    out.set_item("domain_error", profile.domain_error)?;
    out.set_item("intent_error", profile.intent_error)?;
    out.set_item("slot_missing", profile.slot_missing)?;
    out.set_item("slot_redundancy", profile.slot_redundancy)?;
    out.set_item("slot_value_error", profile.slot_value_error)?;
    Ok(out)
}

/// Extract (domain, intent, slot, value) tuples asserted by a summary.
#[pyfunction]
fn extract_tuples<'py>(
    py: Python<'py>,
    summary: &str,
    ontology: PyRef<PyOntology>,
) -> PyResult<Bound<'py, PyDict>> {
    let result = extract::extract_tuples(summary, &ontology.inner);
    let out = PyDict::new(py);
    let tuples = from_state(&result.tuples);
    let spans: Vec<(usize, usize)> = result.tuples.iter().map(|t| result.spans[t]).collect();
    let unattached: Vec<UnattachedRecord> = result
        .unattached_values
        .into_iter()
        .map(|u| (u.surface, u.span, u.candidates))
        .collect();
    out.set_item("tuples", tuples)?;
    out.set_item("spans", spans)?;
    out.set_item("unattached", unattached)?;
    Ok(out)
}

/// Deterministic English rendering of a state, one sentence per
/// (domain, intent) group.
#[pyfunction]
fn render_reference_summary(tuples: Vec<Tuple4>, ontology: PyRef<PyOntology>) -> PyResult<String> {
    extract::render_reference_summary(&to_state(tuples), &ontology.inner).map_err(to_py_err)
}

fn turns_to_dialogue(turns: Vec<String>) -> Dialogue {
    Dialogue {
        id: String::new(),
        turns: turns
            .into_iter()
            .map(|text| Utterance {
                speaker: Speaker::User,
                text,
            })
            .collect(),
        state: DialogueState::new(),
        summary: None,
        domains: Default::default(),
    }
}

/// First-k extractive baseline over utterance texts.
#[pyfunction]
#[pyo3(signature = (turns, k=3))]
fn lead_k(turns: Vec<String>, k: usize) -> (Vec<usize>, String) {
    let summary = baselines::lead_k(&turns_to_dialogue(turns), k);
    (summary.selected, summary.text)
}

/// Greedy ROUGE-2 oracle over utterance texts.
#[pyfunction]
fn greedy_oracle(turns: Vec<String>, reference: &str) -> (Vec<usize>, String) {
    let summary = baselines::greedy_oracle(&turns_to_dialogue(turns), reference);
    (summary.selected, summary.text)
}

/// Perturb a state down to a target tuple-level accuracy with seeded
/// delete/replace/insert edits.
#[pyfunction]
#[pyo3(signature = (tuples, ontology, target_accuracy, seed, mix=(1.0, 1.0, 1.0)))]
fn inject_noise(
    tuples: Vec<Tuple4>,
    ontology: PyRef<PyOntology>,
    target_accuracy: f64,
    seed: u64,
    mix: (f64, f64, f64),
) -> PyResult<Vec<Tuple4>> {
    let spec = perturb::NoiseSpec {
        target_accuracy,
        operation_mix: perturb::OperationMix {
            delete: mix.0,
            replace: mix.1,
            insert: mix.2,
        },
        seed,
    };
    perturb::inject_noise(&to_state(tuples), &spec, &ontology.inner)
        .map(|s| from_state(&s))
        .map_err(to_py_err)
}

/// Tuple-level accuracy `|noisy ∩ gold| / max(|noisy|, |gold|)`.
#[pyfunction]
fn noisy_accuracy(noisy: Vec<Tuple4>, gold: Vec<Tuple4>) -> f64 {
    perturb::noisy_accuracy(&to_state(noisy), &to_state(gold))
}

#[pymodule]
fn statesum_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyOntology>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(rouge_scores, m)?)?;
    m.add_function(wrap_pyfunction!(serialize_state, m)?)?;
    m.add_function(wrap_pyfunction!(parse_state, m)?)?;
    m.add_function(wrap_pyfunction!(encode_joint_target, m)?)?;
    m.add_function(wrap_pyfunction!(decode_joint_output, m)?)?;
    m.add_function(wrap_pyfunction!(state_match_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(factual_prf, m)?)?;
    m.add_function(wrap_pyfunction!(classify_errors, m)?)?;
    m.add_function(wrap_pyfunction!(extract_tuples, m)?)?;
    m.add_function(wrap_pyfunction!(render_reference_summary, m)?)?;
    m.add_function(wrap_pyfunction!(lead_k, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(inject_noise, m)?)?;
    m.add_function(wrap_pyfunction!(noisy_accuracy, m)?)?;
    m.add("JOINT_SENTINEL", codec::JOINT_SENTINEL)?;
    Ok(())
}
