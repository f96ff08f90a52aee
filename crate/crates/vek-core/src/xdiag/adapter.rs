use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DiagError, Result};
use crate::dataio::FeatureDataset;
use crate::numerics::{predict_proba, train_linear_prob, LinearProbModel, Matrix, TrainConfig};

/// A tokenized instance with a mask over its positions.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenInstance {
    pub id: String,
    pub tokens: Vec<String>,
    masked: Vec<bool>,
}

impl TokenInstance {
    pub fn new(id: impl Into<String>, tokens: Vec<String>) -> Self {
        let masked = vec![false; tokens.len()];
        Self {
            id: id.into(),
            tokens,
            masked,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_masked(&self, index: usize) -> bool {
        self.masked[index]
    }

    /// Returns a copy with the given positions masked as well. Masking an
    /// already-masked position changes nothing.
    pub fn with_masked(&self, indices: &[usize]) -> Self {
        let mut out = self.clone();
        for &i in indices {
            if i < out.masked.len() {
                out.masked[i] = true;
            }
        }
        out
    }

    pub fn fully_masked(&self) -> Self {
        let mut out = self.clone();
        out.masked.iter_mut().for_each(|m| *m = true);
        out
    }
}

/// Behaviour contract every diagnosed model must satisfy.
///
/// `predict_distribution` must sum to one; `activation_summary` must return
/// a fixed-length vector per adapter; masking must be idempotent.
pub trait ModelAdapter {
    fn num_classes(&self) -> usize;

    fn predict_distribution(&self, instance: &TokenInstance) -> Result<Vec<f64>>;

    fn activation_summary(&self, instance: &TokenInstance) -> Result<Vec<f64>>;

    /// Returns a copy of the instance with the given token positions masked.
    fn mask_tokens(&self, instance: &TokenInstance, indices: &[usize]) -> Result<TokenInstance> {
        Ok(instance.with_masked(indices))
    }

    /// Analytic gradient of the class score (pre-softmax logit) with respect
    /// to each token's feature block. `None` when the adapter has no
    /// differentiable contract.
    fn class_score_gradient(
        &self,
        _instance: &TokenInstance,
        _class: usize,
    ) -> Option<Result<Vec<Vec<f64>>>> {
        None
    }

    /// Current feature value block per token, for input-times-gradient.
    fn token_inputs(&self, _instance: &TokenInstance) -> Option<Vec<Vec<f64>>> {
        None
    }

    fn predicted_class(&self, instance: &TokenInstance) -> Result<usize> {
        let probs = self.predict_distribution(instance)?;
        Ok(crate::numerics::argmax(&probs))
    }
}

/// The built-in reference adapter: a linear probability model over a
/// bag-of-tokens count vector. Masking a token position zeroes that token's
/// count, mirroring occlusion's zero baseline; out-of-vocabulary tokens
/// contribute nothing.
#[derive(Debug, Clone)]
pub struct BagOfTokensAdapter {
    vocabulary: BTreeMap<String, usize>,
    model: LinearProbModel,
}

impl BagOfTokensAdapter {
    pub fn new(vocabulary: BTreeMap<String, usize>, model: LinearProbModel) -> Self {
        Self { vocabulary, model }
    }

    /// Builds the vocabulary from a dataset's tokens (sorted, first-index
    /// assignment) and trains the linear model on its labels.
    pub fn train(dataset: &FeatureDataset, config: &TrainConfig) -> Result<Self> {
        let vocabulary = Self::vocabulary_of(dataset);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for inst in dataset.instances() {
            let tokens = inst
                .tokens
                .as_ref()
                .ok_or_else(|| DiagError::MissingTokens(inst.id.clone()))?;
            let label = inst
                .label
                .ok_or_else(|| DiagError::MissingLabel(inst.id.clone()))?;
            rows.push(count_vector(tokens, &vocabulary));
            labels.push(label);
        }
        let weights = vec![1.0; rows.len()];
        let model = train_linear_prob(&Matrix::from_rows(&rows)?, &labels, &weights, config)?;
        Ok(Self { vocabulary, model })
    }

    /// An untrained adapter with randomly initialized weights, the
    /// random-init counterpart used by rationale consistency.
    pub fn random_init(dataset: &FeatureDataset, num_classes: usize, seed: u64) -> Self {
        let vocabulary = Self::vocabulary_of(dataset);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nf = vocabulary.len();
        let values: Vec<f64> = (0..num_classes * nf)
            .map(|_| (rng.gen::<f64>() - 0.5) * 2.0)
            .collect();
        let bias: Vec<f64> = (0..num_classes).map(|_| (rng.gen::<f64>() - 0.5) * 0.5).collect();
        let model = LinearProbModel {
            weights: Matrix::from_vec(num_classes, nf, values).expect("shape is consistent"),
            bias,
        };
        Self { vocabulary, model }
    }

    pub fn vocabulary_of(dataset: &FeatureDataset) -> BTreeMap<String, usize> {
        let mut vocabulary = BTreeMap::new();
        for inst in dataset.instances() {
            if let Some(tokens) = &inst.tokens {
                for t in tokens {
                    let next = vocabulary.len();
                    vocabulary.entry(t.clone()).or_insert(next);
                }
            }
        }
        vocabulary
    }

    pub fn model(&self) -> &LinearProbModel {
        &self.model
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    /// Bag-of-tokens features honouring the mask. A masked position zeroes
    /// the whole count of its token, including unmasked duplicates of the
    /// same word.
    pub fn features(&self, instance: &TokenInstance) -> Vec<f64> {
        let mut counts = vec![0.0; self.vocabulary.len()];
        for token in &instance.tokens {
            if let Some(&v) = self.vocabulary.get(token) {
                counts[v] += 1.0;
            }
        }
        for (i, token) in instance.tokens.iter().enumerate() {
            if instance.is_masked(i) {
                if let Some(&v) = self.vocabulary.get(token) {
                    counts[v] = 0.0;
                }
            }
        }
        counts
    }
}

fn count_vector(tokens: &[String], vocabulary: &BTreeMap<String, usize>) -> Vec<f64> {
    let mut counts = vec![0.0; vocabulary.len()];
    for t in tokens {
        if let Some(&v) = vocabulary.get(t) {
            counts[v] += 1.0;
        }
    }
    counts
}

impl ModelAdapter for BagOfTokensAdapter {
    fn num_classes(&self) -> usize {
        self.model.num_classes()
    }

    fn predict_distribution(&self, instance: &TokenInstance) -> Result<Vec<f64>> {
        Ok(predict_proba(&self.model, &self.features(instance))?)
    }

    fn activation_summary(&self, instance: &TokenInstance) -> Result<Vec<f64>> {
        Ok(self.model.logits(&self.features(instance))?)
    }

    fn class_score_gradient(
        &self,
        instance: &TokenInstance,
        class: usize,
    ) -> Option<Result<Vec<Vec<f64>>>> {
        if class >= self.num_classes() {
            return Some(Err(DiagError::MissingClass {
                id: instance.id.clone(),
                class,
            }));
        }
        let blocks = instance
            .tokens
            .iter()
            .map(|t| match self.vocabulary.get(t) {
                Some(&v) => vec![self.model.weights.get(class, v)],
                None => vec![0.0],
            })
            .collect();
        Some(Ok(blocks))
    }

    fn token_inputs(&self, instance: &TokenInstance) -> Option<Vec<Vec<f64>>> {
        let features = self.features(instance);
        Some(
            instance
                .tokens
                .iter()
                .map(|t| match self.vocabulary.get(t) {
                    Some(&v) => vec![features[v]],
                    None => vec![0.0],
                })
                .collect(),
        )
    }
}
