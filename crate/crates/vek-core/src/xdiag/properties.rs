use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adapter::{ModelAdapter, TokenInstance};
use super::saliency::saliency_distance_features;
use super::{DiagError, Result};
use crate::dataio::{FeatureDataset, RationaleSet, SaliencyTensor};
use crate::numerics::{average_precision, minmax_scale, spearman_rho, NumericsError};

/// Mean average precision of saliency scores against gold rationales.
#[derive(Debug, Clone, PartialEq)]
pub struct MapOutcome {
    pub map: f64,
    pub instances: usize,
    /// Instances skipped because their gold mask has no positive token.
    pub skipped_no_positives: usize,
}

/// Agreement with human rationales: the mean per-instance average precision
/// of the saliency scores at the gold class against the gold token mask.
pub fn human_agreement_map(
    dataset: &FeatureDataset,
    saliency: &SaliencyTensor,
    gold: &RationaleSet,
) -> Result<MapOutcome> {
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for (id, mask) in gold.iter() {
        let inst = dataset
            .get(id)
            .ok_or_else(|| crate::dataio::DataError::UnknownInstance { id: id.clone() })?;
        let label = inst
            .label
            .ok_or_else(|| DiagError::MissingLabel(id.clone()))?;
        let scores = saliency
            .get(id, label)
            .ok_or_else(|| DiagError::MissingSaliency {
                id: id.clone(),
                class: label,
            })?;
        match average_precision(mask, scores) {
            Ok(ap) => {
                sum += ap;
                used += 1;
            }
            Err(NumericsError::NoPositives) => skipped += 1,
            Err(e) => return Err(e.into()),
        }
    }
    if used == 0 {
        return Err(DiagError::TooFewInstances { got: 0, need: 1 });
    }
    Ok(MapOutcome {
        map: sum / used as f64,
        instances: used,
        skipped_no_positives: skipped,
    })
}

/// Cross-validated confidence-indication results.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceIndication {
    /// Mean of the per-fold mean absolute errors.
    pub mae: f64,
    /// Largest absolute error over all held-out predictions.
    pub max_error: f64,
    pub fold_maes: Vec<f64>,
}

/// Predicts model confidence from saliency-distance features with a
/// sigmoid-output linear regressor under k-fold cross-validation.
///
/// With `upsample`, every non-empty confidence decile of a training fold is
/// resampled with replacement up to the most populated decile's count.
pub fn confidence_indication(
    saliency: &SaliencyTensor,
    confidences: &crate::dataio::ConfidenceTable,
    num_classes: usize,
    folds: usize,
    upsample: bool,
    seed: u64,
) -> Result<ConfidenceIndication> {
    let mut ids = Vec::new();
    let mut features = Vec::new();
    let mut targets = Vec::new();
    for (id, row) in confidences.iter() {
        let per_class: Vec<Vec<f64>> = (0..num_classes)
            .map(|c| {
                saliency
                    .get(id, c)
                    .map(<[f64]>::to_vec)
                    .ok_or_else(|| DiagError::MissingClass {
                        id: id.clone(),
                        class: c,
                    })
            })
            .collect::<Result<_>>()?;
        ids.push(id.clone());
        features.push(saliency_distance_features(&per_class, row.predicted_class));
        targets.push(row.confidence);
    }
    if ids.len() < 10 {
        return Err(DiagError::TooFewInstances {
            got: ids.len(),
            need: 10,
        });
    }

    let folds = folds.max(2).min(ids.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut rng);

    let mut fold_maes = Vec::with_capacity(folds);
    let mut max_error = 0.0f64;
    for fold in 0..folds {
        let test: BTreeSet<usize> = order
            .iter()
            .copied()
            .skip(fold)
            .step_by(folds)
            .collect();
        let mut train: Vec<usize> = order.iter().copied().filter(|i| !test.contains(i)).collect();
        if upsample {
            train = upsample_deciles(&train, &targets, &mut rng);
        }
        let train_x: Vec<Vec<f64>> = train.iter().map(|&i| features[i].clone()).collect();
        let train_y: Vec<f64> = train.iter().map(|&i| targets[i]).collect();
        let (w, b) = fit_sigmoid_regressor(&train_x, &train_y, 4000, 1.0);

        let mut err_sum = 0.0;
        for &i in &test {
            let pred = sigmoid(dot(&w, &features[i]) + b);
            let err = (pred - targets[i]).abs();
            err_sum += err;
            max_error = max_error.max(err);
        }
        fold_maes.push(err_sum / test.len() as f64);
    }
    Ok(ConfidenceIndication {
        mae: fold_maes.iter().sum::<f64>() / fold_maes.len() as f64,
        max_error,
        fold_maes,
    })
}

/// Resamples each non-empty confidence decile with replacement until it
/// matches the most populated decile.
pub(crate) fn upsample_deciles(
    train: &[usize],
    targets: &[f64],
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let mut deciles: Vec<Vec<usize>> = vec![Vec::new(); 10];
    for &i in train {
        let d = ((targets[i] * 10.0).floor() as usize).min(9);
        deciles[d].push(i);
    }
    let target_count = deciles.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = train.to_vec();
    for members in deciles.iter().filter(|m| !m.is_empty()) {
        for _ in members.len()..target_count {
            out.push(*members.choose(rng).expect("decile is non-empty"));
        }
    }
    out
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Squared-error gradient descent on `sigmoid(w·x + b)` with learning-rate
/// halving on loss increases. Deterministic (zero initialization).
fn fit_sigmoid_regressor(
    features: &[Vec<f64>],
    targets: &[f64],
    epochs: usize,
    learning_rate: f64,
) -> (Vec<f64>, f64) {
    let dim = features.first().map_or(0, Vec::len);
    let n = features.len().max(1) as f64;
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut lr = learning_rate;

    let loss_of = |w: &[f64], b: f64| -> f64 {
        features
            .iter()
            .zip(targets)
            .map(|(x, y)| {
                let e = sigmoid(dot(w, x) + b) - y;
                e * e
            })
            .sum::<f64>()
            / n
    };
    let mut loss = loss_of(&w, b);

    for _ in 0..epochs {
        let mut gw = vec![0.0; dim];
        let mut gb = 0.0;
        for (x, y) in features.iter().zip(targets) {
            let p = sigmoid(dot(&w, x) + b);
            let delta = 2.0 * (p - y) * p * (1.0 - p) / n;
            for (g, xv) in gw.iter_mut().zip(x) {
                *g += delta * xv;
            }
            gb += delta;
        }
        loop {
            let cand_w: Vec<f64> = w.iter().zip(&gw).map(|(wv, g)| wv - lr * g).collect();
            let cand_b = b - lr * gb;
            let cand_loss = loss_of(&cand_w, cand_b);
            if cand_loss <= loss || lr < 1e-12 {
                w = cand_w;
                b = cand_b;
                let improved = loss - cand_loss;
                loss = cand_loss;
                if improved.abs() < 1e-12 {
                    return (w, b);
                }
                break;
            }
            lr *= 0.5;
        }
    }
    (w, b)
}

/// Task performance measure used by faithfulness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerformanceMetric {
    MacroF1,
    Accuracy,
}

impl std::str::FromStr for PerformanceMetric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "macro_f1" => Ok(PerformanceMetric::MacroF1),
            "accuracy" => Ok(PerformanceMetric::Accuracy),
            other => Err(format!(
                "unknown metric `{other}` (expected macro_f1 or accuracy)"
            )),
        }
    }
}

/// Which class's saliency ranks the tokens to mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassChoice {
    Predicted,
    Gold,
}

/// Macro F1 over the model's classes; a class with no true positives,
/// false positives, or false negatives contributes zero.
fn performance(metric: PerformanceMetric, gold: &[usize], pred: &[usize], classes: usize) -> f64 {
    match metric {
        PerformanceMetric::Accuracy => {
            gold.iter().zip(pred).filter(|(g, p)| g == p).count() as f64 / gold.len() as f64
        }
        PerformanceMetric::MacroF1 => {
            let mut sum = 0.0;
            for c in 0..classes {
                let tp = gold
                    .iter()
                    .zip(pred)
                    .filter(|(&g, &p)| g == c && p == c)
                    .count() as f64;
                let fp = gold
                    .iter()
                    .zip(pred)
                    .filter(|(&g, &p)| g != c && p == c)
                    .count() as f64;
                let fn_ = gold
                    .iter()
                    .zip(pred)
                    .filter(|(&g, &p)| g == c && p != c)
                    .count() as f64;
                let denom = 2.0 * tp + fp + fn_;
                sum += if denom > 0.0 { 2.0 * tp / denom } else { 0.0 };
            }
            sum / classes as f64
        }
    }
}

/// Faithfulness results: threshold/performance-drop points and their area.
#[derive(Debug, Clone, PartialEq)]
pub struct FaithfulnessOutcome {
    pub auctp: f64,
    /// (masked fraction, performance drop) per threshold.
    pub points: Vec<(f64, f64)>,
    pub base_performance: f64,
}

/// Area under the threshold-performance curve: for each threshold, the
/// top-`i%` most salient tokens of every instance are masked and the drop
/// in task performance against the unmasked run is recorded; the points are
/// integrated by the trapezoid rule over the masked fraction in `[0, 1]`.
pub fn faithfulness_auctp(
    adapter: &dyn ModelAdapter,
    dataset: &FeatureDataset,
    saliency: &SaliencyTensor,
    metric: PerformanceMetric,
    thresholds: &[u32],
    class_choice: ClassChoice,
) -> Result<FaithfulnessOutcome> {
    let mut instances = Vec::new();
    let mut gold = Vec::new();
    for inst in dataset.instances() {
        let tokens = inst
            .tokens
            .clone()
            .ok_or_else(|| DiagError::MissingTokens(inst.id.clone()))?;
        gold.push(
            inst.label
                .ok_or_else(|| DiagError::MissingLabel(inst.id.clone()))?,
        );
        instances.push(TokenInstance::new(inst.id.clone(), tokens));
    }
    if instances.is_empty() {
        return Err(DiagError::TooFewInstances { got: 0, need: 1 });
    }

    // Saliency ranking per instance at the predicted (or gold) class.
    let mut rankings = Vec::with_capacity(instances.len());
    for (inst, &gold_label) in instances.iter().zip(&gold) {
        let class = match class_choice {
            ClassChoice::Predicted => adapter.predicted_class(inst)?,
            ClassChoice::Gold => gold_label,
        };
        let scores = saliency
            .get(&inst.id, class)
            .ok_or_else(|| DiagError::MissingSaliency {
                id: inst.id.clone(),
                class,
            })?;
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        rankings.push(order);
    }

    let base_pred: Vec<usize> = instances
        .iter()
        .map(|i| adapter.predicted_class(i))
        .collect::<Result<_>>()?;
    let base = performance(metric, &gold, &base_pred, adapter.num_classes());

    let mut points = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let drop = if t == 0 {
            // No tokens masked: the difference is zero by definition.
            0.0
        } else {
            let mut pred = Vec::with_capacity(instances.len());
            for (inst, order) in instances.iter().zip(&rankings) {
                let count = ((t as f64 / 100.0) * inst.len() as f64).floor() as usize;
                let masked = adapter.mask_tokens(inst, &order[..count.min(order.len())])?;
                pred.push(adapter.predicted_class(&masked)?);
            }
            base - performance(metric, &gold, &pred, adapter.num_classes())
        };
        points.push((t as f64 / 100.0, drop));
    }

    points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut auctp = 0.0;
    for pair in points.windows(2) {
        auctp += (pair[1].0 - pair[0].0) * (pair[0].1 + pair[1].1) / 2.0;
    }
    Ok(FaithfulnessOutcome {
        auctp,
        points,
        base_performance: base,
    })
}

/// Activation summaries and gold-class saliency of one model over a dataset.
#[derive(Debug, Clone, Default)]
pub struct ModelExplanations {
    pub name: String,
    pub activations: BTreeMap<String, Vec<f64>>,
    pub saliency: BTreeMap<String, Vec<f64>>,
}

impl ModelExplanations {
    /// Computes activations through the adapter and pulls gold-class
    /// saliency rows from the tensor.
    pub fn from_adapter(
        name: impl Into<String>,
        adapter: &dyn ModelAdapter,
        dataset: &FeatureDataset,
        saliency: &SaliencyTensor,
    ) -> Result<Self> {
        let name = name.into();
        let mut out = ModelExplanations {
            name: name.clone(),
            ..ModelExplanations::default()
        };
        for inst in dataset.instances() {
            let tokens = inst
                .tokens
                .clone()
                .ok_or_else(|| DiagError::MissingTokens(inst.id.clone()))?;
            let label = inst
                .label
                .ok_or_else(|| DiagError::MissingLabel(inst.id.clone()))?;
            let token_inst = TokenInstance::new(inst.id.clone(), tokens);
            out.activations
                .insert(inst.id.clone(), adapter.activation_summary(&token_inst)?);
            let scores = saliency
                .get(&inst.id, label)
                .ok_or_else(|| DiagError::MissingSaliency {
                    id: inst.id.clone(),
                    class: label,
                })?;
            out.saliency.insert(inst.id.clone(), scores.to_vec());
        }
        Ok(out)
    }
}

/// Rank-correlation outcome for the consistency properties.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyOutcome {
    pub rho: f64,
    pub pairs: usize,
    pub points: usize,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    // Shorter vectors are zero-padded.
    let len = a.len().max(b.len());
    (0..len)
        .map(|i| {
            let d = a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Rationale consistency: Spearman correlation between activation distances
/// and saliency distances over every unordered model pair and instance.
/// Both distance sequences are min-max scaled first.
pub fn rationale_consistency(
    models: &[ModelExplanations],
    ids: &[String],
) -> Result<ConsistencyOutcome> {
    if models.len() < 2 {
        return Err(DiagError::TooFewAdapters(models.len()));
    }
    let mut act_dists = Vec::new();
    let mut sal_dists = Vec::new();
    let mut pairs = 0usize;
    for s in 0..models.len() {
        for p in s + 1..models.len() {
            pairs += 1;
            for id in ids {
                let a_s = models[s]
                    .activations
                    .get(id)
                    .ok_or_else(|| DiagError::MissingActivation {
                        model: models[s].name.clone(),
                        id: id.clone(),
                    })?;
                let a_p = models[p]
                    .activations
                    .get(id)
                    .ok_or_else(|| DiagError::MissingActivation {
                        model: models[p].name.clone(),
                        id: id.clone(),
                    })?;
                let w_s = models[s]
                    .saliency
                    .get(id)
                    .ok_or_else(|| DiagError::MissingSaliency {
                        id: id.clone(),
                        class: 0,
                    })?;
                let w_p = models[p]
                    .saliency
                    .get(id)
                    .ok_or_else(|| DiagError::MissingSaliency {
                        id: id.clone(),
                        class: 0,
                    })?;
                act_dists.push(euclidean(a_s, a_p));
                sal_dists.push(euclidean(w_s, w_p));
            }
        }
    }
    let rho = spearman_rho(&minmax_scale(&act_dists), &minmax_scale(&sal_dists))?;
    Ok(ConsistencyOutcome {
        rho,
        pairs,
        points: act_dists.len(),
    })
}

/// Dataset consistency: instance pairs are ranked by shared-unique-token
/// overlap; the top `n_overlap` pairs plus `n_random` seeded samples from
/// the remainder enter the same distance/rank-correlation computation as
/// rationale consistency, on a single model.
pub fn dataset_consistency(
    dataset: &FeatureDataset,
    activations: &BTreeMap<String, Vec<f64>>,
    saliency: &SaliencyTensor,
    n_overlap: usize,
    n_random: usize,
    seed: u64,
) -> Result<ConsistencyOutcome> {
    let with_tokens: Vec<(&str, BTreeSet<&str>, usize)> = dataset
        .instances()
        .iter()
        .filter(|i| i.tokens.is_some())
        .map(|i| {
            let label = i
                .label
                .ok_or_else(|| DiagError::MissingLabel(i.id.clone()))?;
            let set: BTreeSet<&str> = i
                .tokens
                .as_ref()
                .expect("filtered to token-bearing instances")
                .iter()
                .map(String::as_str)
                .collect();
            Ok((i.id.as_str(), set, label))
        })
        .collect::<Result<_>>()?;
    if with_tokens.len() < 2 {
        return Err(DiagError::TooFewInstances {
            got: with_tokens.len(),
            need: 2,
        });
    }

    // All unordered pairs ranked by overlap, ties by id pair.
    let mut candidates: Vec<(usize, usize, usize)> = Vec::new();
    for i in 0..with_tokens.len() {
        for j in i + 1..with_tokens.len() {
            let overlap = with_tokens[i].1.intersection(&with_tokens[j].1).count();
            candidates.push((i, j, overlap));
        }
    }
    candidates.sort_by(|a, b| {
        b.2.cmp(&a.2)
            .then_with(|| with_tokens[a.0].0.cmp(with_tokens[b.0].0))
            .then_with(|| with_tokens[a.1].0.cmp(with_tokens[b.1].0))
    });

    let mut selected: Vec<(usize, usize)> = candidates
        .iter()
        .take(n_overlap)
        .map(|&(i, j, _)| (i, j))
        .collect();
    if candidates.len() > n_overlap && n_random > 0 {
        let remainder: Vec<(usize, usize)> = candidates[n_overlap..]
            .iter()
            .map(|&(i, j, _)| (i, j))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sampled: Vec<(usize, usize)> = remainder
            .choose_multiple(&mut rng, n_random.min(remainder.len()))
            .copied()
            .collect();
        sampled.sort_unstable();
        selected.extend(sampled);
    }

    let mut act_dists = Vec::with_capacity(selected.len());
    let mut sal_dists = Vec::with_capacity(selected.len());
    for &(i, j) in &selected {
        let (id_i, _, label_i) = &with_tokens[i];
        let (id_j, _, _) = &with_tokens[j];
        let a_i = activations
            .get(*id_i)
            .ok_or_else(|| DiagError::MissingActivation {
                model: "<model>".into(),
                id: (*id_i).to_string(),
            })?;
        let a_j = activations
            .get(*id_j)
            .ok_or_else(|| DiagError::MissingActivation {
                model: "<model>".into(),
                id: (*id_j).to_string(),
            })?;
        // Both saliencies are taken at the first instance's gold class.
        let w_i = saliency
            .get(id_i, *label_i)
            .ok_or_else(|| DiagError::MissingSaliency {
                id: (*id_i).to_string(),
                class: *label_i,
            })?;
        let w_j = saliency
            .get(id_j, *label_i)
            .ok_or_else(|| DiagError::MissingSaliency {
                id: (*id_j).to_string(),
                class: *label_i,
            })?;
        act_dists.push(euclidean(a_i, a_j));
        sal_dists.push(euclidean(w_i, w_j));
    }
    let rho = spearman_rho(&minmax_scale(&act_dists), &minmax_scale(&sal_dists))?;
    Ok(ConsistencyOutcome {
        rho,
        pairs: selected.len(),
        points: selected.len(),
    })
}

/// Computes a model's activation summaries over a dataset, for callers that
/// feed [`dataset_consistency`] from an adapter instead of a file.
pub fn adapter_activations(
    adapter: &dyn ModelAdapter,
    dataset: &FeatureDataset,
) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut out = BTreeMap::new();
    for inst in dataset.instances() {
        let tokens = inst
            .tokens
            .clone()
            .ok_or_else(|| DiagError::MissingTokens(inst.id.clone()))?;
        let token_inst = TokenInstance::new(inst.id.clone(), tokens);
        out.insert(inst.id.clone(), adapter.activation_summary(&token_inst)?);
    }
    Ok(out)
}
