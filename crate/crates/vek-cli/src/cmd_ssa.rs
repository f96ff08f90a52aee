use std::collections::BTreeMap;
use std::time::Instant;

use serde_json::json;

use vek_core::dataio::{load_dataset, FeatureDataset, Schema};
use vek_core::numerics::{nn1_classify, Matrix};
use vek_core::ssa::{align_semisupervised, align_sequence, SemiSupervisedOptions};

use crate::args::{resolve_seed, ArgSet};
use crate::{report, CliError};

fn options(args: &mut ArgSet, seed: u64) -> Result<SemiSupervisedOptions, CliError> {
    let defaults = SemiSupervisedOptions::default();
    Ok(SemiSupervisedOptions {
        d: args.parsed("--d", defaults.d)?,
        use_clusters: args.switch("--use-clusters"),
        k_clusters: args.parsed("--k", defaults.k_clusters)?,
        seed,
    })
}

/// Loads `--truth` as a dataset and returns its id -> label map.
fn load_truth(path: &str) -> Result<BTreeMap<String, usize>, CliError> {
    let ds = load_dataset(path, Schema::ExpectsFeatures)?;
    Ok(ds
        .instances()
        .iter()
        .filter_map(|i| i.label.map(|l| (i.id.clone(), l)))
        .collect())
}

fn accuracy(
    predictions: &BTreeMap<String, usize>,
    truth: &BTreeMap<String, usize>,
) -> Option<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for (id, label) in truth {
        if let Some(pred) = predictions.get(id) {
            total += 1;
            correct += usize::from(pred == label);
        }
    }
    (total > 0).then(|| correct as f64 / total as f64)
}

pub fn align(raw: &[String]) -> Result<(), CliError> {
    let started = Instant::now();
    let mut args = ArgSet::parse(raw, &["--use-clusters"])?;
    let source_path = args.require("--source")?;
    let target_path = args.require("--target")?;
    let out = args.require("--out")?;
    let seed = resolve_seed(&mut args)?;
    let opts = options(&mut args, seed)?;
    let truth_path = args.take("--truth")?;
    args.finish()?;

    let source = load_dataset(&source_path, Schema::ExpectsFeatures)?;
    let target = load_dataset(&target_path, Schema::ExpectsFeatures)?;
    let aligned = align_semisupervised(&source, &target, &opts)?;

    // 1-NN classifier over aligned source rows plus labelled target seeds.
    let mut train_rows: Vec<Vec<f64>> = aligned
        .source_coords
        .iter_rows()
        .map(<[f64]>::to_vec)
        .collect();
    let mut train_labels: Vec<usize> = source
        .instances()
        .iter()
        .map(|i| i.label.expect("align_semisupervised requires labels"))
        .collect();
    for (i, inst) in target.instances().iter().enumerate() {
        if let Some(label) = inst.label {
            train_rows.push(aligned.target_coords.row(i).to_vec());
            train_labels.push(label);
        }
    }
    let predictions = predict_unlabelled(
        &train_rows,
        &train_labels,
        &aligned.target_coords,
        &target,
    )?;

    let (accuracy_aligned, accuracy_raw) = match &truth_path {
        Some(path) => {
            let truth = load_truth(path)?;
            let raw_predictions = raw_nn_predictions(&source, &target)?;
            (
                accuracy(&predictions, &truth),
                accuracy(&raw_predictions, &truth),
            )
        }
        None => (None, None),
    };

    let classes: Vec<String> = aligned
        .alignment
        .per_class
        .as_ref()
        .map(|m| {
            m.keys()
                .map(|k| match k.cluster {
                    Some(c) => format!("{}/{c}", k.label),
                    None => k.label.to_string(),
                })
                .collect()
        })
        .unwrap_or_default();

    report::write(
        &out,
        seed,
        json!({
            "command": "ssa align",
            "source": source_path,
            "target": target_path,
            "d": opts.d,
            "use_clusters": opts.use_clusters,
            "k_clusters": opts.k_clusters,
            "truth": truth_path,
        }),
        json!({
            "source_instances": source.len(),
            "target_instances": target.len(),
            "alignment_classes": classes,
            "predictions": predictions,
            "accuracy_aligned": accuracy_aligned,
            "accuracy_raw": accuracy_raw,
        }),
        started,
    )
}

fn predict_unlabelled(
    train_rows: &[Vec<f64>],
    train_labels: &[usize],
    target_coords: &Matrix,
    target: &FeatureDataset,
) -> Result<BTreeMap<String, usize>, CliError> {
    let mut query_rows = Vec::new();
    let mut query_ids = Vec::new();
    for (i, inst) in target.instances().iter().enumerate() {
        if inst.label.is_none() {
            query_rows.push(target_coords.row(i).to_vec());
            query_ids.push(inst.id.clone());
        }
    }
    if query_rows.is_empty() {
        return Ok(BTreeMap::new());
    }
    let predicted = nn1_classify(
        &Matrix::from_rows(train_rows)?,
        train_labels,
        &Matrix::from_rows(&query_rows)?,
    )?;
    Ok(query_ids.into_iter().zip(predicted).collect())
}

/// Raw-feature 1-NN baseline from the labelled source to the target.
fn raw_nn_predictions(
    source: &FeatureDataset,
    target: &FeatureDataset,
) -> Result<BTreeMap<String, usize>, CliError> {
    let src_rows: Vec<Vec<f64>> = source
        .instances()
        .iter()
        .map(|i| i.features.clone().expect("validated by loader"))
        .collect();
    let src_labels: Vec<usize> = source
        .instances()
        .iter()
        .map(|i| i.label.expect("source is fully labelled"))
        .collect();
    let mut query_rows = Vec::new();
    let mut query_ids = Vec::new();
    for inst in target.instances() {
        if inst.label.is_none() {
            query_rows.push(inst.features.clone().expect("validated by loader"));
            query_ids.push(inst.id.clone());
        }
    }
    if query_rows.is_empty() {
        return Ok(BTreeMap::new());
    }
    let predicted = nn1_classify(
        &Matrix::from_rows(&src_rows)?,
        &src_labels,
        &Matrix::from_rows(&query_rows)?,
    )?;
    Ok(query_ids.into_iter().zip(predicted).collect())
}

pub fn sequence(raw: &[String]) -> Result<(), CliError> {
    let started = Instant::now();
    let mut args = ArgSet::parse(raw, &["--use-clusters"])?;
    let input = args.require("--input")?;
    let out = args.require("--out")?;
    let seed = resolve_seed(&mut args)?;
    let opts = options(&mut args, seed)?;
    let truth_path = args.take("--truth")?;
    args.finish()?;

    let all = load_dataset(&input, Schema::ExpectsFeatures)?;
    let mut by_step: BTreeMap<i64, Vec<vek_core::dataio::Instance>> = BTreeMap::new();
    for inst in all.instances() {
        let step = inst.timestep.ok_or_else(|| {
            CliError::Run(format!("instance `{}` has no timestep", inst.id))
        })?;
        by_step.entry(step).or_default().push(inst.clone());
    }
    let steps: Vec<FeatureDataset> = by_step
        .into_values()
        .map(FeatureDataset::from_instances)
        .collect::<Result<_, _>>()?;
    let aligned = align_sequence(&steps, &opts)?;

    // Train on rows whose labels were given in the input; predict the rest.
    let mut train_rows = Vec::new();
    let mut train_labels = Vec::new();
    let mut query_rows = Vec::new();
    let mut query_ids = Vec::new();
    for i in 0..aligned.ids.len() {
        if aligned.original_label[i] {
            train_rows.push(aligned.coords.row(i).to_vec());
            train_labels.push(aligned.labels[i]);
        } else {
            query_rows.push(aligned.coords.row(i).to_vec());
            query_ids.push(aligned.ids[i].clone());
        }
    }
    let predictions: BTreeMap<String, usize> = if query_rows.is_empty() {
        BTreeMap::new()
    } else {
        let predicted = nn1_classify(
            &Matrix::from_rows(&train_rows)?,
            &train_labels,
            &Matrix::from_rows(&query_rows)?,
        )?;
        query_ids.into_iter().zip(predicted).collect()
    };

    let accuracy_value = match &truth_path {
        Some(path) => accuracy(&predictions, &load_truth(path)?),
        None => None,
    };

    let tree: Vec<Vec<serde_json::Value>> = aligned
        .levels
        .iter()
        .map(|level| {
            level
                .iter()
                .map(|s| json!({"name": s.name, "instances": s.instances}))
                .collect()
        })
        .collect();

    report::write(
        &out,
        seed,
        json!({
            "command": "ssa sequence",
            "input": input,
            "d": opts.d,
            "use_clusters": opts.use_clusters,
            "k_clusters": opts.k_clusters,
            "truth": truth_path,
        }),
        json!({
            "steps": steps.len(),
            "tree": tree,
            "root_rows": aligned.ids.len(),
            "predictions": predictions,
            "accuracy": accuracy_value,
        }),
        started,
    )
}
