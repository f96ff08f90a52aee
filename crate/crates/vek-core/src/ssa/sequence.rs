use super::{align_semisupervised_raw, Result, SemiSupervisedOptions, SsaError};
use crate::dataio::FeatureDataset;
use crate::numerics::Matrix;

/// One space in the alignment tree, for reporting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceSummary {
    pub name: String,
    pub instances: usize,
}

/// The root space of an aligned sequence.
///
/// An instance can reach the root through more than one path (adjacent
/// pairs overlap), so ids may repeat; each row carries the step it came
/// from and whether its label was given in the input or pseudo-assigned.
#[derive(Debug, Clone)]
pub struct SequenceAlignment {
    /// Tree shape, one entry per level starting at the input steps.
    pub levels: Vec<Vec<SpaceSummary>>,
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
    pub original_label: Vec<bool>,
    pub origin_step: Vec<usize>,
    pub coords: Matrix,
}

#[derive(Clone)]
struct Space {
    name: String,
    coords: Matrix,
    ids: Vec<String>,
    labels: Vec<Option<usize>>,
    original_label: Vec<bool>,
    origin_step: Vec<usize>,
}

impl Space {
    fn summary(&self) -> SpaceSummary {
        SpaceSummary {
            name: self.name.clone(),
            instances: self.ids.len(),
        }
    }
}

fn join_seed(base: u64, level: usize, index: usize) -> u64 {
    // SplitMix-style mixing keeps join seeds decorrelated but reproducible.
    let mut z = base
        .wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(((level as u64) << 32) | (index as u64 + 1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Aligns a sequence of time-steps into a single root space.
///
/// Adjacent steps (t1,t2),(t2,t3),… are first aligned into joint spaces;
/// the joint spaces are then joined pairwise — (first,second),(third,fourth)
/// and so on, promoting the last space unchanged when a level has an odd
/// count — until a single root space remains. Every join is a
/// semi-supervised alignment of the earlier space onto the later one, using
/// the labels propagated from the level below.
///
/// Every step must be fully labelled except the last, which needs at least
/// one labelled seed per class.
pub fn align_sequence(
    steps: &[FeatureDataset],
    options: &SemiSupervisedOptions,
) -> Result<SequenceAlignment> {
    if steps.len() < 2 {
        return Err(SsaError::TooFewSteps(steps.len()));
    }

    let mut spaces: Vec<Space> = Vec::with_capacity(steps.len());
    for (step, ds) in steps.iter().enumerate() {
        let rows: Vec<Vec<f64>> = ds
            .instances()
            .iter()
            .map(|i| {
                i.features
                    .clone()
                    .ok_or_else(|| SsaError::MissingFeatures(i.id.clone()))
            })
            .collect::<Result<_>>()?;
        let labels: Vec<Option<usize>> = ds.instances().iter().map(|i| i.label).collect();
        if step + 1 < steps.len() {
            if let Some(pos) = labels.iter().position(Option::is_none) {
                return Err(SsaError::UnlabelledSource(
                    ds.instances()[pos].id.clone(),
                ));
            }
        }
        spaces.push(Space {
            name: format!("t{step}"),
            coords: Matrix::from_rows(&rows)?,
            ids: ds.instances().iter().map(|i| i.id.clone()).collect(),
            original_label: labels.iter().map(Option::is_some).collect(),
            labels,
            origin_step: vec![step; ds.len()],
        });
    }

    let mut levels = vec![spaces.iter().map(Space::summary).collect::<Vec<_>>()];

    // Base level: overlapping adjacent pairs, so every step is aligned with
    // both of its neighbours.
    let mut joined: Vec<Space> = Vec::with_capacity(spaces.len() - 1);
    for i in 0..spaces.len() - 1 {
        joined.push(join(
            &spaces[i],
            &spaces[i + 1],
            options,
            join_seed(options.seed, 1, i),
        )?);
    }
    let mut spaces = joined;
    levels.push(spaces.iter().map(Space::summary).collect());

    // Deeper levels: disjoint pairs, promoting an unpaired trailing space.
    let mut level = 1;
    while spaces.len() > 1 {
        level += 1;
        let mut next = Vec::with_capacity(spaces.len() / 2 + 1);
        let mut iter = spaces.chunks(2);
        for (i, chunk) in iter.by_ref().enumerate() {
            match chunk {
                [left, right] => {
                    next.push(join(left, right, options, join_seed(options.seed, level, i))?)
                }
                [last] => next.push(last.clone()),
                _ => unreachable!(),
            }
        }
        spaces = next;
        levels.push(spaces.iter().map(Space::summary).collect());
    }

    let root = spaces.pop().expect("loop leaves exactly one space");
    let labels = root
        .labels
        .iter()
        .map(|l| l.expect("all root labels resolved by pseudo-labelling"))
        .collect();
    Ok(SequenceAlignment {
        levels,
        ids: root.ids,
        labels,
        original_label: root.original_label,
        origin_step: root.origin_step,
        coords: root.coords,
    })
}

/// Aligns `left` onto `right` and stacks both into the joint space.
fn join(left: &Space, right: &Space, options: &SemiSupervisedOptions, seed: u64) -> Result<Space> {
    let source_labels: Vec<usize> = left
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| SsaError::UnlabelledSource(left.ids[i].clone())))
        .collect::<Result<_>>()?;

    let aligned = align_semisupervised_raw(
        &left.coords,
        &source_labels,
        &right.coords,
        &right.labels,
        &SemiSupervisedOptions {
            seed,
            ..options.clone()
        },
    )?;

    let d = options.d;
    let total = left.ids.len() + right.ids.len();
    let mut coords = Matrix::zeros(total, d);
    for (i, row) in aligned.source_coords.iter_rows().enumerate() {
        for (j, v) in row.iter().enumerate() {
            coords.set(i, j, *v);
        }
    }
    for (i, row) in aligned.target_coords.iter_rows().enumerate() {
        for (j, v) in row.iter().enumerate() {
            coords.set(left.ids.len() + i, j, *v);
        }
    }

    let mut ids = left.ids.clone();
    ids.extend(right.ids.iter().cloned());
    let mut labels: Vec<Option<usize>> = left.labels.clone();
    labels.extend(aligned.target_pseudo_labels.iter().map(|&l| Some(l)));
    let mut original_label = left.original_label.clone();
    original_label.extend(right.original_label.iter().copied());
    let mut origin_step = left.origin_step.clone();
    origin_step.extend(right.origin_step.iter().copied());

    Ok(Space {
        name: format!("({}+{})", left.name, right.name),
        coords,
        ids,
        labels,
        original_label,
        origin_step,
    })
}
