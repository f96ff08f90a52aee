//! Positive-unlabelled learning and positive-unlabelled conversion.
//!
//! The scheme follows Elkan & Noto: a classifier `f` is trained to predict
//! whether an instance is labelled, the labelling frequency
//! `c = p(s=1 | y=1)` is estimated as the mean confidence of `f` on held-out
//! positives, and each unlabelled instance receives the weight
//! `w(x) = (1-c)/c · p_s/(1-p_s)`. A downstream classifier `g` then trains
//! on positives once with unit weight and on every unlabelled instance
//! twice, as a positive with weight `w` and as a negative with weight `1-w`.
//!
//! Conversion goes one step further: the prior `p(y=1)` is estimated from
//! the weights, unlabelled instances are ranked by `w` descending, and the
//! top of the ranking is relabelled positive one instance at a time until
//! the positive fraction reaches the prior. Converted instances leave the
//! duplication scheme and train once as ordinary positives.

use thiserror::Error;

use crate::dataio::{DataError, FeatureDataset, PuFlag};
use crate::numerics::{
    predict_proba, train_linear_prob, LinearProbModel, Matrix, NumericsError, TrainConfig,
};

/// Clip applied to `p_s` before the weight formula so weights stay bounded.
const P_CLIP: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum PuError {
    #[error("no validation positives to estimate c from")]
    EmptyValidation,
    #[error("invalid labelling frequency c = {0}; must lie in (0, 1]")]
    InvalidC(f64),
    #[error("no weight entry for unlabelled instance `{0}`")]
    MissingWeight(String),
    #[error("prior estimate missing; run estimate_prior first")]
    MissingPrior,
    #[error("dataset has no labelled positives")]
    NoPositives,
    #[error("dataset has no unlabelled instances")]
    NoUnlabelled,
    #[error("instance `{0}` has no pu_flag")]
    MissingPuFlag(String),
    #[error("instance `{0}` has no feature vector")]
    MissingFeatures(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Data(#[from] DataError),
}

pub type Result<T> = std::result::Result<T, PuError>;

/// Weight row for one unlabelled instance.
#[derive(Debug, Clone, PartialEq)]
pub struct PuWeight {
    pub id: String,
    /// Clipped `p(s=1|x)` from the classifier `f`.
    pub p_s: f64,
    /// `(1-c)/c · p_s/(1-p_s)`.
    pub w: f64,
    pub converted: bool,
}

/// Estimated labelling frequency, prior, and per-unlabelled-instance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PuWeightTable {
    pub c_estimate: f64,
    pub prior_estimate: Option<f64>,
    /// One row per unlabelled instance, in dataset order.
    pub rows: Vec<PuWeight>,
}

impl PuWeightTable {
    pub fn row(&self, id: &str) -> Option<&PuWeight> {
        self.rows.iter().find(|r| r.id == id)
    }

    pub fn converted_count(&self) -> usize {
        self.rows.iter().filter(|r| r.converted).count()
    }
}

/// Estimates `c = p(s=1 | y=1)` as the mean labelled-class probability of
/// the model over validation positives, clipped to `[1e-6, 1]`.
pub fn estimate_c(model: &LinearProbModel, validation_positives: &Matrix) -> Result<f64> {
    if validation_positives.rows() == 0 {
        return Err(PuError::EmptyValidation);
    }
    let mut sum = 0.0;
    for row in validation_positives.iter_rows() {
        sum += predict_proba(model, row)?[1];
    }
    Ok((sum / validation_positives.rows() as f64).clamp(P_CLIP, 1.0))
}

/// The Elkan–Noto instance weight `w = (1-c)/c · p_s/(1-p_s)` with `p_s`
/// clipped to `[1e-6, 1-1e-6]`.
pub fn instance_weight(p_s: f64, c: f64) -> Result<f64> {
    if c <= 0.0 || c > 1.0 || !c.is_finite() {
        return Err(PuError::InvalidC(c));
    }
    let p = p_s.clamp(P_CLIP, 1.0 - P_CLIP);
    Ok((1.0 - c) / c * p / (1.0 - p))
}

/// One row of the duplicated training set for the classifier `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedExample {
    pub id: String,
    pub features: Vec<f64>,
    pub label: usize,
    pub weight: f64,
}

/// Builds the duplicated training set: labelled positives once with unit
/// weight, converted instances once as positives with unit weight, and every
/// remaining unlabelled instance twice as `(positive, w)` and
/// `(negative, 1-w)` with `w` clamped to `[0, 1]`.
pub fn build_weighted_training_set(
    dataset: &FeatureDataset,
    weights: &PuWeightTable,
) -> Result<Vec<WeightedExample>> {
    let mut out = Vec::new();
    for inst in dataset.instances() {
        let features = inst
            .features
            .clone()
            .ok_or_else(|| PuError::MissingFeatures(inst.id.clone()))?;
        match inst.pu_flag {
            Some(PuFlag::Labelled) => out.push(WeightedExample {
                id: inst.id.clone(),
                features,
                label: 1,
                weight: 1.0,
            }),
            Some(PuFlag::Unlabelled) => {
                let row = weights
                    .row(&inst.id)
                    .ok_or_else(|| PuError::MissingWeight(inst.id.clone()))?;
                if row.converted {
                    out.push(WeightedExample {
                        id: inst.id.clone(),
                        features,
                        label: 1,
                        weight: 1.0,
                    });
                } else {
                    let w = row.w.clamp(0.0, 1.0);
                    out.push(WeightedExample {
                        id: inst.id.clone(),
                        features: features.clone(),
                        label: 1,
                        weight: w,
                    });
                    out.push(WeightedExample {
                        id: inst.id.clone(),
                        features,
                        label: 0,
                        weight: 1.0 - w,
                    });
                }
            }
            None => return Err(PuError::MissingPuFlag(inst.id.clone())),
        }
    }
    Ok(out)
}

/// Estimates the positive-class prior
/// `p(y=1) ≈ (1/k) (Σ_{s=1} 1 + Σ_{s=0} w(x))`, clipped to `[0, 1]`.
pub fn estimate_prior(dataset: &FeatureDataset, model: &LinearProbModel, c: f64) -> Result<f64> {
    if c <= 0.0 || c > 1.0 || !c.is_finite() {
        return Err(PuError::InvalidC(c));
    }
    let mut sum = 0.0;
    for inst in dataset.instances() {
        match inst.pu_flag {
            Some(PuFlag::Labelled) => sum += 1.0,
            Some(PuFlag::Unlabelled) => {
                let features = inst
                    .features
                    .as_ref()
                    .ok_or_else(|| PuError::MissingFeatures(inst.id.clone()))?;
                let p_s = predict_proba(model, features)?[1];
                sum += instance_weight(p_s, c)?;
            }
            None => return Err(PuError::MissingPuFlag(inst.id.clone())),
        }
    }
    Ok((sum / dataset.len() as f64).clamp(0.0, 1.0))
}

/// Relabels the highest-weight unlabelled instances as positives until the
/// positive fraction reaches the prior estimate. Ties in `w` resolve to the
/// lexicographically smaller id; zero conversions is a valid outcome.
pub fn puc_convert(dataset: &FeatureDataset, weights: &PuWeightTable) -> Result<PuWeightTable> {
    let prior = weights.prior_estimate.ok_or(PuError::MissingPrior)?;
    let mut table = weights.clone();
    for row in &mut table.rows {
        row.converted = false;
    }

    let total = dataset.len() as f64;
    let mut positives = dataset
        .instances()
        .iter()
        .filter(|i| i.pu_flag == Some(PuFlag::Labelled))
        .count() as f64;

    // Rank unlabelled instances by weight descending, ties by id ascending.
    let mut order: Vec<usize> = (0..table.rows.len()).collect();
    order.sort_by(|&a, &b| {
        table.rows[b]
            .w
            .partial_cmp(&table.rows[a].w)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| table.rows[a].id.cmp(&table.rows[b].id))
    });

    for idx in order {
        if positives / total >= prior {
            break;
        }
        table.rows[idx].converted = true;
        positives += 1.0;
    }
    Ok(table)
}

/// Training mode for [`fit_pu_pipeline`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PuMode {
    /// Treat unlabelled instances as negatives.
    Pn,
    /// Elkan–Noto weighting with duplicated unlabelled instances.
    Pu,
    /// Weighting plus conversion of the top-ranked unlabelled instances.
    Puc,
}

impl std::str::FromStr for PuMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "pn" => Ok(PuMode::Pn),
            "pu" => Ok(PuMode::Pu),
            "puc" => Ok(PuMode::Puc),
            other => Err(format!("unknown mode `{other}` (expected pn, pu, or puc)")),
        }
    }
}

/// FNV-1a hash, the stable id hash behind the 80/20 validation split.
fn fnv1a64(s: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// True when the id falls in the 20% validation slice of the dataset.
///
/// The whole dataset is split, not just the positives: holding out only
/// positives would lower the labelled fraction `f` trains on and bias the
/// c estimate downward.
fn is_validation(id: &str) -> bool {
    fnv1a64(id).is_multiple_of(5)
}

fn train_on_examples(examples: &[WeightedExample], config: &TrainConfig) -> Result<LinearProbModel> {
    let rows: Vec<Vec<f64>> = examples.iter().map(|e| e.features.clone()).collect();
    let labels: Vec<usize> = examples.iter().map(|e| e.label).collect();
    let weights: Vec<f64> = examples.iter().map(|e| e.weight).collect();
    Ok(train_linear_prob(
        &Matrix::from_rows(&rows)?,
        &labels,
        &weights,
        config,
    )?)
}

/// Runs the full pipeline in the requested mode. Deterministic given the
/// seed carried by `config`: `f` trains with that seed and `g` with seed+1.
pub fn fit_pu_pipeline(
    train: &FeatureDataset,
    mode: PuMode,
    config: &TrainConfig,
) -> Result<(LinearProbModel, PuWeightTable)> {
    let mut labelled_count = 0usize;
    let mut unlabelled_count = 0usize;
    for inst in train.instances() {
        match inst.pu_flag {
            Some(PuFlag::Labelled) => labelled_count += 1,
            Some(PuFlag::Unlabelled) => unlabelled_count += 1,
            None => return Err(PuError::MissingPuFlag(inst.id.clone())),
        }
    }
    if labelled_count == 0 {
        return Err(PuError::NoPositives);
    }
    if unlabelled_count == 0 {
        return Err(PuError::NoUnlabelled);
    }

    if mode == PuMode::Pn {
        // Unlabelled treated as negative; no weighting machinery involved.
        let examples: Vec<WeightedExample> = train
            .instances()
            .iter()
            .map(|inst| {
                Ok(WeightedExample {
                    id: inst.id.clone(),
                    features: inst
                        .features
                        .clone()
                        .ok_or_else(|| PuError::MissingFeatures(inst.id.clone()))?,
                    label: usize::from(inst.pu_flag == Some(PuFlag::Labelled)),
                    weight: 1.0,
                })
            })
            .collect::<Result<_>>()?;
        let g = train_on_examples(&examples, config)?;
        let table = PuWeightTable {
            c_estimate: 1.0,
            prior_estimate: None,
            rows: Vec::new(),
        };
        return Ok((g, table));
    }

    // Train f on the 80% slice; estimate c on the positives of the rest.
    let mut f_examples = Vec::new();
    let mut validation_rows = Vec::new();
    for inst in train.instances() {
        let features = inst
            .features
            .clone()
            .ok_or_else(|| PuError::MissingFeatures(inst.id.clone()))?;
        let labelled = inst.pu_flag == Some(PuFlag::Labelled);
        if is_validation(&inst.id) {
            if labelled {
                validation_rows.push(features);
            }
        } else {
            f_examples.push(WeightedExample {
                id: inst.id.clone(),
                features,
                label: usize::from(labelled),
                weight: 1.0,
            });
        }
    }
    if validation_rows.is_empty() {
        // Hash split left no validation positives (tiny dataset); fall back
        // to estimating c on all positives.
        for inst in train.instances() {
            if inst.pu_flag == Some(PuFlag::Labelled) {
                validation_rows.push(inst.features.clone().unwrap());
            }
        }
    }
    let f = train_on_examples(&f_examples, config)?;
    let c = estimate_c(&f, &Matrix::from_rows(&validation_rows)?)?;

    let mut rows = Vec::with_capacity(unlabelled_count);
    for inst in train.instances() {
        if inst.pu_flag == Some(PuFlag::Unlabelled) {
            let p_s = predict_proba(&f, inst.features.as_ref().unwrap())?[1]
                .clamp(P_CLIP, 1.0 - P_CLIP);
            rows.push(PuWeight {
                id: inst.id.clone(),
                p_s,
                w: instance_weight(p_s, c)?,
                converted: false,
            });
        }
    }
    let mut table = PuWeightTable {
        c_estimate: c,
        prior_estimate: None,
        rows,
    };

    if mode == PuMode::Puc {
        table.prior_estimate = Some(estimate_prior(train, &f, c)?);
        table = puc_convert(train, &table)?;
    }

    let g_examples = build_weighted_training_set(train, &table)?;
    let g = train_on_examples(
        &g_examples,
        &TrainConfig {
            seed: config.seed.wrapping_add(1),
            ..config.clone()
        },
    )?;
    Ok((g, table))
}
