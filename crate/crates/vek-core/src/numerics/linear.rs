use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::matrix::Matrix;
use super::{argmax, NumericsError, Result};

const PROB_CLIP: f64 = 1e-12;

/// Multinomial logistic model: `softmax(W·x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbModel {
    /// num_classes × num_features.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LinearProbModel {
    pub fn num_classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn num_features(&self) -> usize {
        self.weights.cols()
    }

    /// Pre-softmax class scores.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.num_features() {
            return Err(NumericsError::Dimension(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.num_features()
            )));
        }
        Ok((0..self.num_classes())
            .map(|c| {
                self.bias[c]
                    + self
                        .weights
                        .row(c)
                        .iter()
                        .zip(x)
                        .map(|(w, v)| w * v)
                        .sum::<f64>()
            })
            .collect())
    }

    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&predict_proba(self, x)?))
    }
}

/// Class distribution `softmax(W·x + b)`.
pub fn predict_proba(model: &LinearProbModel, x: &[f64]) -> Result<Vec<f64>> {
    Ok(softmax(&model.logits(x)?))
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Training settings for [`train_linear_prob`].
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 300,
            l2: 1e-3,
            seed: 13,
        }
    }
}

/// Weighted cross-entropy loss and its gradient for the flat parameter
/// vector `[W row-major.., b..]`. Probabilities are clipped to
/// `[1e-12, 1-1e-12]` inside the loss; the L2 penalty covers weights only.
pub(crate) fn loss_and_grad(
    params: &[f64],
    data: &Matrix,
    labels: &[usize],
    sample_weights: &[f64],
    num_classes: usize,
    l2: f64,
) -> (f64, Vec<f64>) {
    let nf = data.cols();
    let total_weight: f64 = sample_weights.iter().sum();
    let norm = if total_weight > 0.0 { total_weight } else { 1.0 };

    let mut loss = 0.0;
    let mut grad = vec![0.0; params.len()];
    for (i, row) in data.iter_rows().enumerate() {
        let sw = sample_weights[i];
        if sw == 0.0 {
            continue;
        }
        let logits: Vec<f64> = (0..num_classes)
            .map(|c| {
                params[num_classes * nf + c]
                    + params[c * nf..(c + 1) * nf]
                        .iter()
                        .zip(row)
                        .map(|(w, v)| w * v)
                        .sum::<f64>()
            })
            .collect();
        let probs = softmax(&logits);
        let y = labels[i];
        let p = probs[y].clamp(PROB_CLIP, 1.0 - PROB_CLIP);
        loss -= sw * p.ln();
        for c in 0..num_classes {
            let delta = sw * (probs[c] - if c == y { 1.0 } else { 0.0 });
            for (f, v) in row.iter().enumerate() {
                grad[c * nf + f] += delta * v;
            }
            grad[num_classes * nf + c] += delta;
        }
    }
    loss /= norm;
    for g in grad.iter_mut() {
        *g /= norm;
    }
    for c in 0..num_classes {
        for f in 0..nf {
            loss += 0.5 * l2 * params[c * nf + f] * params[c * nf + f];
            grad[c * nf + f] += l2 * params[c * nf + f];
        }
    }
    (loss, grad)
}

/// Trains a multinomial logistic model by full-batch gradient descent with
/// weighted cross-entropy. The learning rate halves whenever a step would
/// increase the loss, so the loss trace is non-increasing; training stops
/// when |Δloss| < 1e-8 or at the epoch cap. Deterministic given the seed.
pub fn train_linear_prob(
    data: &Matrix,
    labels: &[usize],
    sample_weights: &[f64],
    config: &TrainConfig,
) -> Result<LinearProbModel> {
    if labels.len() != data.rows() || sample_weights.len() != data.rows() {
        return Err(NumericsError::Dimension(
            "labels/weights length must equal row count".into(),
        ));
    }
    if sample_weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(NumericsError::Dimension(
            "sample weights must be finite and non-negative".into(),
        ));
    }
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut present = vec![false; num_classes];
    for (&y, &w) in labels.iter().zip(sample_weights) {
        if w > 0.0 {
            present[y] = true;
        }
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(NumericsError::SingleClass);
    }

    let nf = data.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params: Vec<f64> = (0..num_classes * nf)
        .map(|_| (rng.gen::<f64>() - 0.5) * 0.02)
        .chain(std::iter::repeat_n(0.0, num_classes))
        .collect();

    let (mut loss, mut grad) =
        loss_and_grad(&params, data, labels, sample_weights, num_classes, config.l2);
    if !loss.is_finite() {
        return Err(NumericsError::NonFiniteLoss { epoch: 0 });
    }
    let mut lr = config.learning_rate;

    for epoch in 0..config.epochs {
        let mut candidate;
        let cand_loss;
        let cand_grad;
        loop {
            candidate = params
                .iter()
                .zip(&grad)
                .map(|(p, g)| p - lr * g)
                .collect::<Vec<f64>>();
            let (l, g) =
                loss_and_grad(&candidate, data, labels, sample_weights, num_classes, config.l2);
            if !l.is_finite() {
                return Err(NumericsError::NonFiniteLoss { epoch });
            }
            if l <= loss || lr < 1e-12 {
                cand_loss = l;
                cand_grad = g;
                break;
            }
            lr *= 0.5;
        }
        if cand_loss > loss {
            // Learning rate exhausted without improvement.
            break;
        }
        let delta = loss - cand_loss;
        params = candidate;
        loss = cand_loss;
        grad = cand_grad;
        if delta < 1e-8 {
            break;
        }
    }

    let weights = Matrix::from_vec(num_classes, nf, params[..num_classes * nf].to_vec())?;
    let bias = params[num_classes * nf..].to_vec();
    Ok(LinearProbModel { weights, bias })
}
