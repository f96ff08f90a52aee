//! Loading, validation, and persistence of datasets, saliency tensors,
//! rationales, confidences, activations, and evaluation reports.
//!
//! Instance-level data lives in JSON Lines files; reports are single JSON
//! documents with sorted keys. Every loader error names the offending line
//! or id, and `load(write(x)) == x` holds for all in-memory values.

mod dataset;
mod report;
mod tensors;

pub use dataset::{
    load_dataset, load_explain_corpus, write_dataset, write_explain_corpus, ExplainInstance,
    FeatureDataset, Instance, PuFlag, Schema,
};
pub use report::{read_report, write_report};
pub use tensors::{
    load_activations, load_confidences, load_rationales, load_saliency, write_activations,
    write_confidences, write_rationales, write_saliency, ActivationTable, Confidence,
    ConfidenceTable, RationaleSet, SaliencyTensor,
};

use thiserror::Error;

/// Errors raised while loading or persisting data files.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: schema error in field `{field}`: {message}")]
    Schema {
        path: String,
        line: usize,
        field: String,
        message: String,
    },
    #[error("{path}:{line}: duplicate id `{id}`")]
    DuplicateId {
        path: String,
        line: usize,
        id: String,
    },
    #[error("unknown instance id `{id}`")]
    UnknownInstance { id: String },
    #[error("length mismatch for id `{id}`: expected {expected}, got {got}")]
    LengthMismatch {
        id: String,
        expected: usize,
        got: usize,
    },
    #[error("io error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, DataError>;
