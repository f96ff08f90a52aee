//! ROUGE metrics and extractive-explanation utilities: greedy oracle
//! sentence selection against a gold justification, the lead-k baseline,
//! and corpus-level evaluation.

mod oracle;
mod rouge;

pub use oracle::{evaluate_explanations, greedy_oracle, lead_k, EvalSummary, OracleSelection};
pub use rouge::{rouge_l, rouge_n, tokenize, RougeScore};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExplainError {
    #[error("document has no sentences")]
    NoSentences,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("prediction and gold ids do not match: `{0}` has no counterpart")]
    IdMismatch(String),
}

pub type Result<T> = std::result::Result<T, ExplainError>;
