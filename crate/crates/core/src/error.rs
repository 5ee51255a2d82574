use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// A single validation finding. Each violation cites exactly one tuple or
/// one named field of a dialogue record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub dialogue_id: String,
    /// The field or tuple the finding is about, e.g. `turns[3].text` or
    /// `state[(hotel, book_hotel, colour)]`.
    pub subject: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}: {}", self.dialogue_id, self.subject, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("ontology error: {0}")]
    Ontology(String),

    #[error("unknown (domain, slot) pair: ({domain}, {slot})")]
    UnknownSlot { domain: String, slot: String },

    #[error("dialogue {id} failed validation: {}", format_violations(.violations))]
    Validation { id: String, violations: Vec<Violation> },

    #[error("state syntax error at offset {offset}: {message}")]
    StateSyntax { offset: usize, message: String },

    #[error("summary contains the reserved sentinel {0:?}")]
    SentinelCollision(String),

    #[error("empty summary")]
    EmptySummary,

    #[error("no rendering template for intent {intent:?} in domain {domain:?}")]
    MissingTemplate { domain: String, intent: String },

    #[error("aligned lists differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("no single-domain dialogues found for target domain {0:?}")]
    EmptyDomainPool(String),

    #[error("{0}")]
    Data(String),
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
