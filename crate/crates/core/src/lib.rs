//! Evaluation toolkit for task-oriented dialogue summarization.
//!
//! The crate bundles everything needed to score externally produced summary
//! predictions against gold dialogues that carry dialogue-state annotations:
//!
//! - [`ontology`]: the task schema (domains, intents, slots, legal values,
//!   aliases) and value normalization.
//! - [`corpus`]: the line-delimited corpus model, validation, and statistics.
//! - [`codec`]: flat-string dialogue-state serialization and the joint
//!   state-plus-summary target format.
//! - [`extract`]: ontology-driven tuple extraction from free-text summaries
//!   and the template renderer used to close the loop in tests.
//! - [`factual`]: state-aware factual precision/recall/F1 and the five-type
//!   factual error classifier.
//! - [`rouge`]: the canonical tokenizer and ROUGE-1/2/L.
//! - [`baselines`]: Lead-k and the greedy ROUGE-2 oracle.
//! - [`perturb`]: seeded dialogue-state noise injection and domain-adaptation
//!   splits.
//! - [`report`]: the end-to-end evaluation pipeline and its JSON report.

pub mod baselines;
pub mod codec;
pub mod corpus;
pub mod error;
pub mod extract;
pub mod factual;
pub mod ontology;
pub mod perturb;
pub mod report;
pub mod rouge;
pub mod synth;

pub use codec::{DialogueState, StateTuple};
pub use corpus::{CorpusStats, Dialogue, Prediction, Speaker, Utterance};
pub use error::{Error, Result};
pub use ontology::Ontology;
pub use rouge::{RougeScore, Tokenizer};
