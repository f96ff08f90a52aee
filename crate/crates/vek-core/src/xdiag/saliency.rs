use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adapter::{ModelAdapter, TokenInstance};
use super::{DiagError, Result};

/// Occlusion saliency: the drop in the class probability when each token is
/// masked on its own, `score_j = p_c(x) − p_c(x with token j masked)`.
pub fn saliency_occlusion(
    adapter: &dyn ModelAdapter,
    instance: &TokenInstance,
    class: usize,
) -> Result<Vec<f64>> {
    let base = adapter.predict_distribution(instance)?[class];
    let mut scores = Vec::with_capacity(instance.len());
    for j in 0..instance.len() {
        let masked = adapter.mask_tokens(instance, &[j])?;
        scores.push(base - adapter.predict_distribution(&masked)?[class]);
    }
    Ok(scores)
}

/// How embedding-level gradients are reduced to one score per token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    Mean,
    L2,
}

impl std::str::FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "l2" => Ok(Aggregation::L2),
            other => Err(format!("unknown aggregation `{other}` (expected mean or l2)")),
        }
    }
}

/// Gradient saliency: the analytic gradient of the class score with respect
/// to each token's feature block, optionally multiplied by the input
/// (InputXGradient), aggregated per token by mean or L2 norm.
pub fn saliency_gradient(
    adapter: &dyn ModelAdapter,
    instance: &TokenInstance,
    class: usize,
    aggregation: Aggregation,
    inputx: bool,
) -> Result<Vec<f64>> {
    let blocks = adapter
        .class_score_gradient(instance, class)
        .ok_or(DiagError::GradientUnsupported)??;
    let inputs = if inputx {
        Some(
            adapter
                .token_inputs(instance)
                .ok_or(DiagError::GradientUnsupported)?,
        )
    } else {
        None
    };

    Ok(blocks
        .iter()
        .enumerate()
        .map(|(j, block)| {
            let values: Vec<f64> = match &inputs {
                Some(inp) => block.iter().zip(&inp[j]).map(|(g, x)| g * x).collect(),
                None => block.clone(),
            };
            match aggregation {
                Aggregation::Mean => values.iter().sum::<f64>() / values.len().max(1) as f64,
                Aggregation::L2 => values.iter().map(|v| v * v).sum::<f64>().sqrt(),
            }
        })
        .collect())
}

/// Shapley value sampling after Castro et al.: for each sampled random
/// permutation of the token positions, every token's marginal contribution
/// to the class probability is measured when it joins the coalition of the
/// tokens before it (all others masked). Scores are the means over samples;
/// deterministic given the seed.
pub fn saliency_shapley_sampling(
    adapter: &dyn ModelAdapter,
    instance: &TokenInstance,
    class: usize,
    num_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = instance.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut totals = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();

    for _ in 0..num_samples.max(1) {
        order.shuffle(&mut rng);
        // Start from everything masked and reveal tokens in order.
        let mut coalition = vec![true; n];
        let mut prev = adapter.predict_distribution(&masked_instance(adapter, instance, &coalition)?)?[class];
        for &j in &order {
            coalition[j] = false;
            let p = adapter.predict_distribution(&masked_instance(adapter, instance, &coalition)?)?[class];
            totals[j] += p - prev;
            prev = p;
        }
    }
    Ok(totals
        .iter()
        .map(|t| t / num_samples.max(1) as f64)
        .collect())
}

fn masked_instance(
    adapter: &dyn ModelAdapter,
    instance: &TokenInstance,
    masked: &[bool],
) -> Result<TokenInstance> {
    let indices: Vec<usize> = masked
        .iter()
        .enumerate()
        .filter_map(|(i, &m)| m.then_some(i))
        .collect();
    adapter.mask_tokens(instance, &indices)
}

/// Saliency-distance features between the predicted class and the others.
///
/// With two classes this is the scalar token-sum of the score difference;
/// with more classes the per-class token-summed differences are reduced to
/// their (max, min, mean) concatenation.
pub fn saliency_distance_features(
    per_class_saliency: &[Vec<f64>],
    predicted_class: usize,
) -> Vec<f64> {
    let diffs: Vec<f64> = per_class_saliency
        .iter()
        .enumerate()
        .filter(|(c, _)| *c != predicted_class)
        .map(|(_, other)| {
            per_class_saliency[predicted_class]
                .iter()
                .zip(other)
                .map(|(a, b)| a - b)
                .sum()
        })
        .collect();
    if diffs.len() <= 1 {
        return diffs;
    }
    let max = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = diffs.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    vec![max, min, mean]
}
