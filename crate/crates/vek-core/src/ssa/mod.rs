//! Sequential subspace alignment between time-steps or domains.
//!
//! Unsupervised alignment maps the principal components of a source dataset
//! onto those of a target dataset with the closed-form transformation
//! `M = C_Sᵀ·C_T`. Semi-supervised alignment does the same per class after
//! pseudo-labelling the target with a single 1-NN pass from a few labelled
//! seeds, then centres each transformed source class on the matching target
//! class. A binary-tree extension aligns sequences of more than two steps
//! by repeatedly joining adjacent spaces.

mod sequence;

pub use sequence::{align_sequence, SequenceAlignment, SpaceSummary};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dataio::FeatureDataset;
use crate::numerics::{kmeans, nn1_classify, pca_fit, Matrix, NumericsError, Subspace};

#[derive(Debug, Error)]
pub enum SsaError {
    #[error("class {0} has no labelled target seed")]
    MissingClassSeed(usize),
    #[error("class {class} has only {count} samples on the {side} side; need at least d+1 = {needed}")]
    InsufficientClassSamples {
        class: usize,
        count: usize,
        side: &'static str,
        needed: usize,
    },
    #[error("source instance `{0}` is unlabelled")]
    UnlabelledSource(String),
    #[error("instance `{0}` has no feature vector")]
    MissingFeatures(String),
    #[error("sequence needs at least 2 steps, got {0}")]
    TooFewSteps(usize),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, SsaError>;

/// Key of one alignment class: a label, optionally refined by a cluster id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ClassKey {
    pub label: usize,
    pub cluster: Option<usize>,
}

impl ClassKey {
    fn plain(label: usize) -> Self {
        Self {
            label,
            cluster: None,
        }
    }
}

/// Per-class alignment: subspaces, transformation, and the offset that
/// centres the transformed source class on the target class.
#[derive(Debug, Clone)]
pub struct ClassAlignment {
    pub map: Matrix,
    pub source_subspace: Subspace,
    pub target_subspace: Subspace,
    pub centering_offset: Vec<f64>,
}

/// The result of aligning one source dataset onto one target dataset.
#[derive(Debug, Clone)]
pub struct AlignmentMap {
    /// Global transformation `C_Sᵀ·C_T`.
    pub map: Matrix,
    pub source_subspace: Subspace,
    pub target_subspace: Subspace,
    /// Present iff the alignment is semi-supervised.
    pub per_class: Option<BTreeMap<ClassKey, ClassAlignment>>,
}

/// Closed-form unsupervised alignment `M = C_Sᵀ·C_T`.
pub fn align_unsupervised(c_s: &Subspace, c_t: &Subspace) -> Result<AlignmentMap> {
    if c_s.dim() != c_t.dim() || c_s.ambient_dim() != c_t.ambient_dim() {
        return Err(NumericsError::Dimension(format!(
            "subspace shapes {}x{} and {}x{} do not match",
            c_s.ambient_dim(),
            c_s.dim(),
            c_t.ambient_dim(),
            c_t.dim()
        ))
        .into());
    }
    let map = c_s.components.transpose().matmul(&c_t.components)?;
    Ok(AlignmentMap {
        map,
        source_subspace: c_s.clone(),
        target_subspace: c_t.clone(),
        per_class: None,
    })
}

/// Projects both datasets through an unsupervised alignment: the source as
/// `(X_s − mean_S)·C_S·M` and the target as `(X_t − mean_T)·C_T`.
pub fn project_aligned(x_s: &Matrix, x_t: &Matrix, map: &AlignmentMap) -> Result<(Matrix, Matrix)> {
    let source = map.source_subspace.project(x_s)?.matmul(&map.map)?;
    let target = map.target_subspace.project(x_t)?;
    Ok((source, target))
}

/// Options for semi-supervised alignment.
#[derive(Debug, Clone)]
pub struct SemiSupervisedOptions {
    pub d: usize,
    pub use_clusters: bool,
    pub k_clusters: usize,
    pub seed: u64,
}

impl Default for SemiSupervisedOptions {
    fn default() -> Self {
        Self {
            d: 2,
            use_clusters: false,
            k_clusters: 5,
            seed: 13,
        }
    }
}

/// A semi-supervised alignment together with the transformed coordinates.
#[derive(Debug, Clone)]
pub struct SemiAligned {
    pub alignment: AlignmentMap,
    /// Aligned source coordinates, one row per source instance.
    pub source_coords: Matrix,
    /// Projected target coordinates, one row per target instance.
    pub target_coords: Matrix,
    /// Pseudo-labels for every target instance (seeds keep their own label).
    pub target_pseudo_labels: Vec<usize>,
    /// Cluster id per target instance when clustering is enabled.
    pub target_clusters: Option<Vec<usize>>,
}

/// Semi-supervised subspace alignment over datasets: the source must be
/// fully labelled, the target needs at least one labelled seed per class.
pub fn align_semisupervised(
    source: &FeatureDataset,
    target: &FeatureDataset,
    options: &SemiSupervisedOptions,
) -> Result<SemiAligned> {
    let source_mat = feature_matrix(source)?;
    let source_labels: Vec<usize> = source
        .instances()
        .iter()
        .map(|i| i.label.ok_or_else(|| SsaError::UnlabelledSource(i.id.clone())))
        .collect::<Result<_>>()?;
    let target_mat = feature_matrix(target)?;
    let target_labels: Vec<Option<usize>> =
        target.instances().iter().map(|i| i.label).collect();
    align_semisupervised_raw(&source_mat, &source_labels, &target_mat, &target_labels, options)
}

fn feature_matrix(dataset: &FeatureDataset) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = dataset
        .instances()
        .iter()
        .map(|i| {
            i.features
                .clone()
                .ok_or_else(|| SsaError::MissingFeatures(i.id.clone()))
        })
        .collect::<Result<_>>()?;
    Ok(Matrix::from_rows(&rows)?)
}

/// Matrix-level semi-supervised alignment, shared with the sequence tree.
pub(crate) fn align_semisupervised_raw(
    source: &Matrix,
    source_labels: &[usize],
    target: &Matrix,
    target_labels: &[Option<usize>],
    options: &SemiSupervisedOptions,
) -> Result<SemiAligned> {
    let d = options.d;
    let num_classes = source_labels
        .iter()
        .copied()
        .chain(target_labels.iter().flatten().copied())
        .max()
        .map_or(0, |m| m + 1);

    // Every class needs at least one labelled target seed.
    for class in 0..num_classes {
        let has_seed = target_labels.contains(&Some(class));
        if !has_seed {
            return Err(SsaError::MissingClassSeed(class));
        }
    }

    // Pseudo-label all target samples with a single 1-NN pass from seeds.
    let seed_rows: Vec<Vec<f64>> = target_labels
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.map(|_| target.row(i).to_vec()))
        .collect();
    let seed_labels: Vec<usize> = target_labels.iter().flatten().copied().collect();
    let pseudo = {
        let reference = Matrix::from_rows(&seed_rows)?;
        let predicted = nn1_classify(&reference, &seed_labels, target)?;
        // Seeds keep their given label.
        target_labels
            .iter()
            .zip(predicted)
            .map(|(given, p)| given.unwrap_or(p))
            .collect::<Vec<usize>>()
    };

    // Global subspaces give the shared location frame and the reported map.
    let c_s = pca_fit(source, d)?;
    let c_t = pca_fit(target, d)?;
    let global_map = c_s.components.transpose().matmul(&c_t.components)?;

    // Optional instance-similarity clusters on the unaligned target space;
    // source rows adopt the nearest target centroid.
    let (target_clusters, source_clusters) = if options.use_clusters {
        let k = options.k_clusters.min(target.rows());
        let assignment = kmeans(target, k, options.seed)?;
        let centroids = centroids_of(target, &assignment, k);
        let source_assignment: Vec<usize> = source
            .iter_rows()
            .map(|row| nearest(row, &centroids))
            .collect();
        (Some(assignment), Some(source_assignment))
    } else {
        (None, None)
    };

    // Label-level alignments always exist; cluster cells refine them when
    // both sides have enough samples for a d-dimensional class subspace.
    let mut per_class: BTreeMap<ClassKey, ClassAlignment> = BTreeMap::new();
    for class in 0..num_classes {
        let src_idx: Vec<usize> = (0..source.rows())
            .filter(|&i| source_labels[i] == class)
            .collect();
        let tgt_idx: Vec<usize> = (0..target.rows())
            .filter(|&i| pseudo[i] == class)
            .collect();
        let alignment = class_alignment(
            source, target, &c_s, &c_t, &src_idx, &tgt_idx, d, class,
        )?;
        per_class.insert(ClassKey::plain(class), alignment);

        if let (Some(tc), Some(sc)) = (&target_clusters, &source_clusters) {
            let k = options.k_clusters.min(target.rows());
            for cluster in 0..k {
                let cell_src: Vec<usize> = src_idx
                    .iter()
                    .copied()
                    .filter(|&i| sc[i] == cluster)
                    .collect();
                let cell_tgt: Vec<usize> = tgt_idx
                    .iter()
                    .copied()
                    .filter(|&i| tc[i] == cluster)
                    .collect();
                if cell_src.len() <= d || cell_tgt.len() <= d {
                    continue; // cell dropped; instances use the class map
                }
                match class_alignment(
                    source, target, &c_s, &c_t, &cell_src, &cell_tgt, d, class,
                ) {
                    Ok(cell) => {
                        per_class.insert(
                            ClassKey {
                                label: class,
                                cluster: Some(cluster),
                            },
                            cell,
                        );
                    }
                    Err(SsaError::Numerics(NumericsError::DegenerateData { .. })) => {
                        // Degenerate cell geometry: fall back to the class map.
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }

    // Transform the source and project the target through their cells.
    let mut source_coords = Matrix::zeros(source.rows(), d);
    for (i, row) in source.iter_rows().enumerate() {
        let key = cell_key(source_labels[i], source_clusters.as_deref().map(|c| c[i]), &per_class);
        let cell = &per_class[&key];
        let centered: Vec<f64> = row.iter().zip(&c_s.mean).map(|(v, m)| v - m).collect();
        let projected = project_vector(&centered, &cell.source_subspace.components);
        let mapped = vec_matmul(&projected, &cell.map);
        for (j, v) in mapped.iter().enumerate() {
            source_coords.set(i, j, v + cell.centering_offset[j]);
        }
    }
    // Target samples keep their plain projection onto the global target
    // components; the per-class machinery only decides where the source
    // classes land. Evaluation coordinates therefore never depend on
    // pseudo-label quality.
    let target_coords = c_t.project(target)?;

    Ok(SemiAligned {
        alignment: AlignmentMap {
            map: global_map,
            source_subspace: c_s,
            target_subspace: c_t,
            per_class: Some(per_class),
        },
        source_coords,
        target_coords,
        target_pseudo_labels: pseudo,
        target_clusters,
    })
}

/// Builds one per-class alignment. Class subspaces come from class-centred
/// PCA; the centering offset matches the transformed source class mean to
/// the target class mean in the shared global-mean frame.
#[allow(clippy::too_many_arguments)]
fn class_alignment(
    source: &Matrix,
    target: &Matrix,
    c_s_global: &Subspace,
    c_t_global: &Subspace,
    src_idx: &[usize],
    tgt_idx: &[usize],
    d: usize,
    class: usize,
) -> Result<ClassAlignment> {
    if src_idx.len() <= d {
        return Err(SsaError::InsufficientClassSamples {
            class,
            count: src_idx.len(),
            side: "source",
            needed: d + 1,
        });
    }
    if tgt_idx.len() <= d {
        return Err(SsaError::InsufficientClassSamples {
            class,
            count: tgt_idx.len(),
            side: "target",
            needed: d + 1,
        });
    }
    let src_rows: Vec<Vec<f64>> = src_idx.iter().map(|&i| source.row(i).to_vec()).collect();
    let tgt_rows: Vec<Vec<f64>> = tgt_idx.iter().map(|&i| target.row(i).to_vec()).collect();
    let c_s_k = pca_fit(&Matrix::from_rows(&src_rows)?, d)?;
    let c_t_k = pca_fit(&Matrix::from_rows(&tgt_rows)?, d)?;
    let map = c_s_k.components.transpose().matmul(&c_t_k.components)?;

    // Class means in the shared frame.
    let mut src_mean = vec![0.0; d];
    for row in &src_rows {
        let centered: Vec<f64> = row.iter().zip(&c_s_global.mean).map(|(v, m)| v - m).collect();
        let mapped = vec_matmul(&project_vector(&centered, &c_s_k.components), &map);
        for (s, v) in src_mean.iter_mut().zip(&mapped) {
            *s += v;
        }
    }
    for s in &mut src_mean {
        *s /= src_rows.len() as f64;
    }
    let mut tgt_mean = vec![0.0; d];
    for row in &tgt_rows {
        let centered: Vec<f64> = row.iter().zip(&c_t_global.mean).map(|(v, m)| v - m).collect();
        let projected = project_vector(&centered, &c_t_global.components);
        for (s, v) in tgt_mean.iter_mut().zip(&projected) {
            *s += v;
        }
    }
    for s in &mut tgt_mean {
        *s /= tgt_rows.len() as f64;
    }

    let centering_offset: Vec<f64> = tgt_mean
        .iter()
        .zip(&src_mean)
        .map(|(t, s)| t - s)
        .collect();
    Ok(ClassAlignment {
        map,
        source_subspace: c_s_k,
        target_subspace: c_t_k,
        centering_offset,
    })
}

fn cell_key(
    label: usize,
    cluster: Option<usize>,
    per_class: &BTreeMap<ClassKey, ClassAlignment>,
) -> ClassKey {
    if let Some(c) = cluster {
        let key = ClassKey {
            label,
            cluster: Some(c),
        };
        if per_class.contains_key(&key) {
            return key;
        }
    }
    ClassKey::plain(label)
}

fn project_vector(v: &[f64], components: &Matrix) -> Vec<f64> {
    (0..components.cols())
        .map(|c| (0..components.rows()).map(|r| v[r] * components.get(r, c)).sum())
        .collect()
}

fn vec_matmul(v: &[f64], m: &Matrix) -> Vec<f64> {
    (0..m.cols())
        .map(|c| (0..m.rows()).map(|r| v[r] * m.get(r, c)).sum())
        .collect()
}

fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d: f64 = row.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn centroids_of(data: &Matrix, assignment: &[usize], k: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; data.cols()]; k];
    let mut counts = vec![0usize; k];
    for (row, &c) in data.iter_rows().zip(assignment) {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(row) {
            *s += v;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for s in sums[c].iter_mut() {
                *s /= counts[c] as f64;
            }
        }
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::Instance;
    use crate::synth::{drift_sequence, DriftConfig};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn orthonormal_2d(angle: f64) -> Matrix {
        Matrix::from_vec(
            2,
            2,
            vec![angle.cos(), -angle.sin(), angle.sin(), angle.cos()],
        )
        .unwrap()
    }

    fn subspace(components: Matrix) -> Subspace {
        let p = components.rows();
        Subspace {
            eigenvalues: vec![1.0; components.cols()],
            mean: vec![0.0; p],
            components,
        }
    }

    #[test]
    fn identical_subspaces_give_identity() {
        let c = subspace(orthonormal_2d(0.4));
        let map = align_unsupervised(&c, &c).unwrap();
        assert!(map.map.max_abs_diff(&Matrix::identity(2)) <= 1e-12);
    }

    #[test]
    fn rotation_is_recovered() {
        let c_s = subspace(orthonormal_2d(0.3));
        let r = orthonormal_2d(0.7);
        let c_t = subspace(c_s.components.matmul(&r).unwrap());
        let map = align_unsupervised(&c_s, &c_t).unwrap();
        assert!(map.map.max_abs_diff(&r) <= 1e-12);
    }

    #[test]
    fn alignment_is_local_optimum() {
        // Random orthonormal bases in 4-D ambient space, d = 2.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut random_basis = || {
            // Gram-Schmidt on two random 4-vectors.
            let a: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() - 0.5).collect();
            let b: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() - 0.5).collect();
            let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            let a: Vec<f64> = a.iter().map(|v| v / na).collect();
            let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            let b: Vec<f64> = b.iter().zip(&a).map(|(y, x)| y - dot * x).collect();
            let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let b: Vec<f64> = b.iter().map(|v| v / nb).collect();
            Matrix::from_vec(4, 2, vec![a[0], b[0], a[1], b[1], a[2], b[2], a[3], b[3]]).unwrap()
        };
        let c_s = subspace(random_basis());
        let c_t = subspace(random_basis());
        let map = align_unsupervised(&c_s, &c_t).unwrap();

        let residual = |m: &Matrix| {
            let diff_rows: Vec<Vec<f64>> = (0..4)
                .map(|r| {
                    (0..2)
                        .map(|c| {
                            (0..2)
                                .map(|k| c_s.components.get(r, k) * m.get(k, c))
                                .sum::<f64>()
                                - c_t.components.get(r, c)
                        })
                        .collect()
                })
                .collect();
            diff_rows
                .iter()
                .flat_map(|r| r.iter())
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
        };
        let base = residual(&map.map);
        for _ in 0..100 {
            let mut perturbed = map.map.clone();
            for r in 0..2 {
                for c in 0..2 {
                    perturbed.set(r, c, perturbed.get(r, c) + (rng.gen::<f64>() - 0.5) * 0.02);
                }
            }
            assert!(residual(&perturbed) + 1e-12 >= base);
        }
    }

    #[test]
    fn matches_explicit_least_squares_solve() {
        // Independent route: solve the normal equations (C_SᵀC_S)M = C_SᵀC_T
        // by Gaussian elimination without assuming orthonormality.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let angle_s = rng.gen::<f64>() * std::f64::consts::PI;
            let angle_t = rng.gen::<f64>() * std::f64::consts::PI;
            let c_s = subspace(orthonormal_2d(angle_s));
            let c_t = subspace(orthonormal_2d(angle_t));
            let map = align_unsupervised(&c_s, &c_t).unwrap();

            let ata = c_s.components.transpose().matmul(&c_s.components).unwrap();
            let atb = c_s.components.transpose().matmul(&c_t.components).unwrap();
            // Solve ata · X = atb column by column (2x2 elimination).
            let det = ata.get(0, 0) * ata.get(1, 1) - ata.get(0, 1) * ata.get(1, 0);
            let mut solved = Matrix::zeros(2, 2);
            for c in 0..2 {
                let b0 = atb.get(0, c);
                let b1 = atb.get(1, c);
                solved.set(0, c, (b0 * ata.get(1, 1) - b1 * ata.get(0, 1)) / det);
                solved.set(1, c, (ata.get(0, 0) * b1 - ata.get(1, 0) * b0) / det);
            }
            assert!(map.map.max_abs_diff(&solved) <= 1e-8);
        }
    }

    #[test]
    fn project_aligned_identity_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![rng.gen::<f64>() * 2.0, rng.gen::<f64>() - 1.0])
            .collect();
        let data = Matrix::from_rows(&rows).unwrap();
        let sub = pca_fit(&data, 2).unwrap();
        let map = align_unsupervised(&sub, &sub).unwrap();
        let (aligned, plain) = project_aligned(&data, &data, &map).unwrap();
        assert!(aligned.max_abs_diff(&plain) <= 1e-8);
    }

    fn drift_pair(seed: u64) -> (FeatureDataset, FeatureDataset) {
        let sample = drift_sequence(&DriftConfig {
            steps: 2,
            seed,
            ..DriftConfig::default()
        });
        let mut steps = sample.steps.into_iter();
        (steps.next().unwrap(), steps.next().unwrap())
    }

    #[test]
    fn fully_labelled_target_keeps_labels() {
        let (source, target) = drift_pair(1);
        // Relabel the target fully.
        let full: Vec<Instance> = target
            .instances()
            .iter()
            .map(|i| {
                let mut inst = i.clone();
                let class = if i.id.contains("_c0_") { 0 } else { 1 };
                inst.label = Some(class);
                inst
            })
            .collect();
        let target = FeatureDataset::from_instances(full).unwrap();
        let aligned =
            align_semisupervised(&source, &target, &SemiSupervisedOptions::default()).unwrap();
        for (inst, &pseudo) in target.instances().iter().zip(&aligned.target_pseudo_labels) {
            assert_eq!(inst.label.unwrap(), pseudo);
        }
    }

    #[test]
    fn transformed_source_class_mean_matches_target_class_mean() {
        let (source, target) = drift_pair(2);
        let aligned =
            align_semisupervised(&source, &target, &SemiSupervisedOptions::default()).unwrap();
        for class in 0..2 {
            let mut src_mean = [0.0; 2];
            let mut src_n = 0.0;
            for (i, inst) in source.instances().iter().enumerate() {
                if inst.label == Some(class) {
                    src_mean[0] += aligned.source_coords.get(i, 0);
                    src_mean[1] += aligned.source_coords.get(i, 1);
                    src_n += 1.0;
                }
            }
            let mut tgt_mean = [0.0; 2];
            let mut tgt_n = 0.0;
            for i in 0..target.len() {
                if aligned.target_pseudo_labels[i] == class {
                    tgt_mean[0] += aligned.target_coords.get(i, 0);
                    tgt_mean[1] += aligned.target_coords.get(i, 1);
                    tgt_n += 1.0;
                }
            }
            for j in 0..2 {
                assert!(
                    (src_mean[j] / src_n - tgt_mean[j] / tgt_n).abs() <= 1e-9,
                    "class {class} axis {j}"
                );
            }
        }
    }

    #[test]
    fn too_small_class_is_reported_with_count() {
        // Class 1 has two source samples; d = 2 needs at least three.
        let source = FeatureDataset::from_instances(vec![
            Instance::new("s0").with_features(vec![0.0, 0.0]).with_label(0),
            Instance::new("s1").with_features(vec![0.1, 0.2]).with_label(0),
            Instance::new("s2").with_features(vec![0.3, 0.1]).with_label(0),
            Instance::new("s3").with_features(vec![0.2, 0.4]).with_label(0),
            Instance::new("s4").with_features(vec![5.0, 5.0]).with_label(1),
            Instance::new("s5").with_features(vec![5.1, 5.2]).with_label(1),
        ])
        .unwrap();
        let (_, target) = drift_pair(4);
        match align_semisupervised(&source, &target, &SemiSupervisedOptions::default()) {
            Err(SsaError::InsufficientClassSamples { class, count, side, needed }) => {
                assert_eq!(class, 1);
                assert_eq!(count, 2);
                assert_eq!(side, "source");
                assert_eq!(needed, 3);
            }
            other => panic!("expected InsufficientClassSamples, got {other:?}"),
        }
    }

    #[test]
    fn missing_seed_is_reported() {
        let (source, target) = drift_pair(3);
        let stripped: Vec<Instance> = target
            .instances()
            .iter()
            .map(|i| {
                let mut inst = i.clone();
                if inst.label == Some(1) {
                    inst.label = None;
                }
                inst
            })
            .collect();
        let target = FeatureDataset::from_instances(stripped).unwrap();
        match align_semisupervised(&source, &target, &SemiSupervisedOptions::default()) {
            Err(SsaError::MissingClassSeed(class)) => assert_eq!(class, 1),
            other => panic!("expected MissingClassSeed, got {other:?}"),
        }
    }

    #[test]
    fn alignment_beats_raw_features_on_drift() {
        // Single-seed version of the drift acceptance criterion.
        let mut gains = Vec::new();
        for seed in 0..3 {
            let sample = drift_sequence(&DriftConfig {
                steps: 2,
                seed: 100 + seed,
                ..DriftConfig::default()
            });
            let source = &sample.steps[0];
            let target = &sample.steps[1];
            let aligned =
                align_semisupervised(source, target, &SemiSupervisedOptions::default()).unwrap();

            let truth: std::collections::BTreeMap<&str, usize> = sample
                .final_truth
                .iter()
                .map(|(id, l)| (id.as_str(), *l))
                .collect();
            let eval_idx: Vec<usize> = target
                .instances()
                .iter()
                .enumerate()
                .filter(|(_, inst)| truth.contains_key(inst.id.as_str()))
                .map(|(i, _)| i)
                .collect();

            // Raw 1-NN from source features.
            let src_mat = feature_matrix(source).unwrap();
            let src_labels: Vec<usize> =
                source.instances().iter().map(|i| i.label.unwrap()).collect();
            let tgt_mat = feature_matrix(target).unwrap();
            let raw_pred = nn1_classify(&src_mat, &src_labels, &tgt_mat).unwrap();

            // Aligned 1-NN.
            let aligned_pred =
                nn1_classify(&aligned.source_coords, &src_labels, &aligned.target_coords)
                    .unwrap();

            let accuracy = |pred: &[usize]| {
                let correct = eval_idx
                    .iter()
                    .filter(|&&i| pred[i] == truth[target.instances()[i].id.as_str()])
                    .count();
                correct as f64 / eval_idx.len() as f64
            };
            gains.push(accuracy(&aligned_pred) - accuracy(&raw_pred));
        }
        let mean_gain = gains.iter().sum::<f64>() / gains.len() as f64;
        assert!(mean_gain >= 0.10, "mean accuracy gain {mean_gain}");
    }

    #[test]
    fn labels_never_change() {
        let (source, target) = drift_pair(5);
        let aligned =
            align_semisupervised(&source, &target, &SemiSupervisedOptions::default()).unwrap();
        for (inst, &pseudo) in target.instances().iter().zip(&aligned.target_pseudo_labels) {
            if let Some(given) = inst.label {
                assert_eq!(given, pseudo);
            }
        }
    }

    #[test]
    fn same_seed_same_alignment() {
        let (source, target) = drift_pair(6);
        let opts = SemiSupervisedOptions {
            use_clusters: true,
            ..SemiSupervisedOptions::default()
        };
        let a = align_semisupervised(&source, &target, &opts).unwrap();
        let b = align_semisupervised(&source, &target, &opts).unwrap();
        assert_eq!(a.source_coords.values(), b.source_coords.values());
        assert_eq!(a.target_coords.values(), b.target_coords.values());
        assert_eq!(a.target_pseudo_labels, b.target_pseudo_labels);
    }

    #[test]
    fn unsupervised_alignment_beats_raw_under_global_shift() {
        // Two classes along the x axis in 3-D; the target drifts by a large
        // translation plus a 30-degree in-plane rotation. Raw 1-NN collapses
        // onto the nearest source cluster, while the centred and aligned
        // projections recover the structure. 20 seeds.
        let mut wins = 0;
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
            let normal = |rng: &mut ChaCha8Rng| {
                let u1: f64 = rng.gen::<f64>().max(1e-300);
                let u2: f64 = rng.gen::<f64>();
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            };
            let angle = 30f64.to_radians();
            let mut src_rows = Vec::new();
            let mut tgt_rows = Vec::new();
            let mut labels = Vec::new();
            for class in 0..2usize {
                let cx = if class == 0 { -3.0 } else { 3.0 };
                for _ in 0..60 {
                    src_rows.push(vec![
                        cx + 0.5 * normal(&mut rng),
                        0.5 * normal(&mut rng),
                        0.5 * normal(&mut rng),
                    ]);
                    let (x, y) = (cx + 0.5 * normal(&mut rng), 0.5 * normal(&mut rng));
                    tgt_rows.push(vec![
                        20.0 + x * angle.cos() - y * angle.sin(),
                        20.0 + x * angle.sin() + y * angle.cos(),
                        0.5 * normal(&mut rng),
                    ]);
                    labels.push(class);
                }
            }
            let source = Matrix::from_rows(&src_rows).unwrap();
            let target = Matrix::from_rows(&tgt_rows).unwrap();
            let c_s = pca_fit(&source, 2).unwrap();
            let c_t = pca_fit(&target, 2).unwrap();
            let map = align_unsupervised(&c_s, &c_t).unwrap();
            let (aligned_src, aligned_tgt) = project_aligned(&source, &target, &map).unwrap();

            let accuracy = |reference: &Matrix, queries: &Matrix| {
                let predicted = nn1_classify(reference, &labels, queries).unwrap();
                predicted.iter().zip(&labels).filter(|(p, l)| p == l).count() as f64
                    / labels.len() as f64
            };
            let raw = accuracy(&source, &target);
            let aligned = accuracy(&aligned_src, &aligned_tgt);
            if aligned > raw {
                wins += 1;
            }
        }
        assert_eq!(wins, 20, "aligned beat raw in only {wins}/20 seeds");
    }

    #[test]
    fn clusters_refine_but_do_not_break_alignment() {
        let (source, target) = drift_pair(7);
        let opts = SemiSupervisedOptions {
            use_clusters: true,
            k_clusters: 5,
            ..SemiSupervisedOptions::default()
        };
        let aligned = align_semisupervised(&source, &target, &opts).unwrap();
        assert!(aligned.target_clusters.is_some());
        let per_class = aligned.alignment.per_class.as_ref().unwrap();
        // The two label-level alignments always exist.
        assert!(per_class.contains_key(&ClassKey::plain(0)));
        assert!(per_class.contains_key(&ClassKey::plain(1)));
        // All coordinates stay finite.
        assert!(aligned.source_coords.values().iter().all(|v| v.is_finite()));
        assert!(aligned.target_coords.values().iter().all(|v| v.is_finite()));
    }
}
