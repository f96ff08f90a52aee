//! Deterministic numerical primitives shared by the algorithm modules.
//!
//! Everything here is pure given its inputs and seed: PCA via a cyclic
//! Jacobi eigensolver, a weighted multinomial logistic model trained by
//! full-batch gradient descent, k-means with k-means++ seeding, 1-NN
//! classification, rank statistics, and min-max scaling. All tie-breaks
//! (ranking, nearest neighbour, argmax) resolve to the lowest index so two
//! runs with the same seed are bit-identical.

mod kmeans;
mod linear;
mod matrix;
mod neighbors;
mod pca;
mod stats;

pub use kmeans::kmeans;
pub use linear::{predict_proba, train_linear_prob, LinearProbModel, TrainConfig};
pub use matrix::Matrix;
pub use neighbors::nn1_classify;
pub use pca::{pca_fit, Subspace};
pub use stats::{average_precision, minmax_scale, pearson, rank_average, spearman_rho};

use thiserror::Error;

/// Errors raised by the numerical primitives.
#[derive(Debug, Error, PartialEq)]
pub enum NumericsError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("degenerate data: requested {requested} components but covariance rank is {rank}")]
    DegenerateData { requested: usize, rank: usize },
    #[error("zero variance: {0} sequence is constant")]
    ZeroVariance(&'static str),
    #[error("no positive labels in gold sequence")]
    NoPositives,
    #[error("training data contains a single class")]
    SingleClass,
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("empty reference set")]
    EmptyReference,
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Index of the largest value, ties resolved to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
