//! Synthetic data generators with known generative truth, used by the
//! acceptance tests and exposed through the CLI so runs need no external
//! data.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataio::{FeatureDataset, Instance, PuFlag};

/// Standard normal via Box-Muller, deterministic given the RNG stream.
fn sample_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Settings for the SCAR positive-unlabelled mixture.
#[derive(Debug, Clone)]
pub struct ScarConfig {
    pub n: usize,
    /// True probability that an instance is positive.
    pub prior: f64,
    /// True labelling frequency c = p(s=1 | y=1).
    pub label_frequency: f64,
    /// Distance between the two class means along each axis.
    pub separation: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for ScarConfig {
    fn default() -> Self {
        Self {
            n: 5000,
            prior: 0.5,
            label_frequency: 0.5,
            separation: 6.0,
            noise: 1.0,
            seed: 13,
        }
    }
}

/// Two 2-D Gaussians under the SCAR assumption: positives are labelled
/// completely at random with probability `label_frequency`. The instance
/// `label` field keeps the true class for evaluation; `pu_flag` is what a
/// PU learner is allowed to see.
pub fn scar_mixture(config: &ScarConfig) -> FeatureDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let half = config.separation / 2.0;
    let mut instances = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let positive = rng.gen::<f64>() < config.prior;
        let center = if positive { half } else { -half };
        let x = center + config.noise * sample_normal(&mut rng);
        let y = center + config.noise * sample_normal(&mut rng);
        let labelled = positive && rng.gen::<f64>() < config.label_frequency;
        instances.push(
            Instance::new(format!("s{i:05}"))
                .with_features(vec![x, y])
                .with_label(usize::from(positive))
                .with_pu_flag(if labelled {
                    PuFlag::Labelled
                } else {
                    PuFlag::Unlabelled
                }),
        );
    }
    FeatureDataset::from_instances(instances).expect("generated ids are unique")
}

/// Settings for the rotating two-class drift sequence.
#[derive(Debug, Clone)]
pub struct DriftConfig {
    pub steps: usize,
    pub per_class: usize,
    /// Rotation applied between consecutive steps, in degrees.
    pub rotation_degrees: f64,
    /// Labelled seeds per class kept in the final step.
    pub seeds_per_class: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self {
            steps: 2,
            per_class: 100,
            rotation_degrees: 30.0,
            seeds_per_class: 10,
            noise: 0.5,
            seed: 13,
        }
    }
}

/// A generated drift sequence: one dataset per time-step plus the withheld
/// true labels of the final step.
#[derive(Debug, Clone)]
pub struct DriftSample {
    pub steps: Vec<FeatureDataset>,
    /// (id, true label) for final-step instances whose label was removed.
    pub final_truth: Vec<(String, usize)>,
}

/// Two Gaussian classes on a ring that rotate by a fixed angle between
/// steps. All steps are fully labelled except the last, which keeps only
/// `seeds_per_class` labels per class; the rest move to `final_truth`.
///
/// The class means sit 40 degrees apart on a radius-3 ring, so one step of
/// the default 30-degree rotation moves each class close to where the other
/// used to be — a raw nearest-neighbour classifier degrades while an aligned
/// one does not.
pub fn drift_sequence(config: &DriftConfig) -> DriftSample {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let radius = 3.0;
    let class_angles = [0.0f64, 40.0f64.to_radians()];
    let step_angle = config.rotation_degrees.to_radians();

    let mut steps = Vec::with_capacity(config.steps);
    let mut final_truth = Vec::new();
    for step in 0..config.steps {
        let rotation = step_angle * step as f64;
        let mut instances = Vec::new();
        for (class, base_angle) in class_angles.iter().enumerate() {
            let angle = base_angle + rotation;
            let (cx, cy) = (radius * angle.cos(), radius * angle.sin());
            for i in 0..config.per_class {
                let x = cx + config.noise * sample_normal(&mut rng);
                let y = cy + config.noise * sample_normal(&mut rng);
                let id = format!("t{step}_c{class}_{i:04}");
                let mut inst = Instance::new(&id)
                    .with_features(vec![x, y])
                    .with_timestep(step as i64);
                let is_final = step + 1 == config.steps;
                if !is_final || i < config.seeds_per_class {
                    inst = inst.with_label(class);
                } else {
                    final_truth.push((id, class));
                }
                instances.push(inst);
            }
        }
        steps.push(FeatureDataset::from_instances(instances).expect("generated ids are unique"));
    }
    DriftSample { steps, final_truth }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scar_respects_prior_and_frequency() {
        let ds = scar_mixture(&ScarConfig::default());
        assert_eq!(ds.len(), 5000);
        let positives = ds
            .instances()
            .iter()
            .filter(|i| i.label == Some(1))
            .count();
        let labelled = ds
            .instances()
            .iter()
            .filter(|i| i.pu_flag == Some(PuFlag::Labelled))
            .count();
        let frac_pos = positives as f64 / 5000.0;
        let frac_labelled = labelled as f64 / positives as f64;
        assert!((frac_pos - 0.5).abs() < 0.03, "positive rate {frac_pos}");
        assert!(
            (frac_labelled - 0.5).abs() < 0.03,
            "labelling frequency {frac_labelled}"
        );
        // Only true positives can be labelled.
        assert!(ds
            .instances()
            .iter()
            .filter(|i| i.pu_flag == Some(PuFlag::Labelled))
            .all(|i| i.label == Some(1)));
    }

    #[test]
    fn drift_marks_only_final_step_unlabelled() {
        let sample = drift_sequence(&DriftConfig {
            steps: 3,
            ..DriftConfig::default()
        });
        assert_eq!(sample.steps.len(), 3);
        for ds in &sample.steps[..2] {
            assert!(ds.instances().iter().all(|i| i.label.is_some()));
        }
        let last = sample.steps.last().unwrap();
        let labelled = last.instances().iter().filter(|i| i.label.is_some()).count();
        assert_eq!(labelled, 20);
        assert_eq!(sample.final_truth.len(), 180);
    }

    #[test]
    fn generators_are_deterministic() {
        let a = scar_mixture(&ScarConfig::default());
        let b = scar_mixture(&ScarConfig::default());
        assert_eq!(a.instances(), b.instances());
        let da = drift_sequence(&DriftConfig::default());
        let db = drift_sequence(&DriftConfig::default());
        for (x, y) in da.steps.iter().zip(&db.steps) {
            assert_eq!(x.instances(), y.instances());
        }
    }
}
