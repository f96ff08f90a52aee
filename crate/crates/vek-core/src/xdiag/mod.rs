//! Diagnostic properties for saliency explanations, plus built-in saliency
//! generators (occlusion, gradient, Shapley value sampling) over any
//! [`ModelAdapter`].
//!
//! The five properties: agreement with human rationales (mean average
//! precision), confidence indication (a regressor from saliency-distance
//! features to model confidence, scored by MAE), faithfulness (area under
//! the threshold-performance curve when masking the most salient tokens),
//! rationale consistency (rank correlation between activation distances and
//! saliency distances across model pairs), and dataset consistency (the
//! same across instance pairs of one model).

mod adapter;
mod properties;
mod saliency;

pub use adapter::{BagOfTokensAdapter, ModelAdapter, TokenInstance};
pub use properties::{
    adapter_activations, confidence_indication, dataset_consistency, faithfulness_auctp,
    human_agreement_map, rationale_consistency, ClassChoice, ConfidenceIndication,
    ConsistencyOutcome, FaithfulnessOutcome, MapOutcome, ModelExplanations, PerformanceMetric,
};
pub use saliency::{
    saliency_distance_features, saliency_gradient, saliency_occlusion,
    saliency_shapley_sampling, Aggregation,
};

use serde::Serialize;
use thiserror::Error;

use crate::dataio::DataError;
use crate::numerics::NumericsError;

#[derive(Debug, Error)]
pub enum DiagError {
    #[error("no saliency scores for instance `{id}` at class {class}")]
    MissingSaliency { id: String, class: usize },
    #[error("instance `{id}` lacks saliency for class {class}")]
    MissingClass { id: String, class: usize },
    #[error("instance `{0}` has no gold label")]
    MissingLabel(String),
    #[error("instance `{0}` has no tokens")]
    MissingTokens(String),
    #[error("no activation summary for model `{model}`, instance `{id}`")]
    MissingActivation { model: String, id: String },
    #[error("need at least {need} instances, got {got}")]
    TooFewInstances { got: usize, need: usize },
    #[error("adapter does not support token masking")]
    MaskUnsupported,
    #[error("adapter does not expose analytic gradients")]
    GradientUnsupported,
    #[error("need at least two adapters, got {0}")]
    TooFewAdapters(usize),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Data(#[from] DataError),
}

pub type Result<T> = std::result::Result<T, DiagError>;

/// Aggregated results of a diagnostics run; sections are filled by whichever
/// properties were computed.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DiagnosticsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map_skipped_instances: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence_mae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence_max_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auctp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rationale_rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset_rho: Option<f64>,
}
