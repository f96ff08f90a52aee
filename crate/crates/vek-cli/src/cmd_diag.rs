use std::time::Instant;

use serde_json::json;

use vek_core::dataio::{
    load_activations, load_confidences, load_dataset, load_rationales, load_saliency, Schema,
};
use vek_core::numerics::TrainConfig;
use vek_core::xdiag::{
    confidence_indication, dataset_consistency, faithfulness_auctp, human_agreement_map,
    rationale_consistency, BagOfTokensAdapter, ClassChoice, ModelExplanations, PerformanceMetric,
};

use crate::args::{parse_thresholds, resolve_seed, ArgSet};
use crate::{report, CliError};

pub fn map(raw: &[String]) -> Result<(), CliError> {
    let started = Instant::now();
    let mut args = ArgSet::parse(raw, &[])?;
    let input = args.require("--input")?;
    let saliency_path = args.require("--saliency")?;
    let rationales_path = args.require("--rationales")?;
    let out = args.require("--out")?;
    let seed = resolve_seed(&mut args)?;
    args.finish()?;

    let dataset = load_dataset(&input, Schema::ExpectsTokens)?;
    let saliency = load_saliency(&saliency_path, &dataset)?;
    let rationales = load_rationales(&rationales_path, &dataset)?;
    let outcome = human_agreement_map(&dataset, &saliency, &rationales)?;

    report::write(
        &out,
        seed,
        json!({
            "command": "diag map",
            "input": input,
            "saliency": saliency_path,
            "rationales": rationales_path,
        }),
        json!({
            "map": outcome.map,
            "instances": outcome.instances,
            "skipped_no_positives": outcome.skipped_no_positives,
        }),
        started,
    )
}

pub fn confidence(raw: &[String]) -> Result<(), CliError> {
    let started = Instant::now();
    let mut args = ArgSet::parse(raw, &["--upsample"])?;
    let input = args.require("--input")?;
    let saliency_path = args.require("--saliency")?;
    let confidences_path = args.require("--confidences")?;
    let out = args.require("--out")?;
    let folds: usize = args.parsed("--folds", 5)?;
    let upsample = args.switch("--upsample");
    let seed = resolve_seed(&mut args)?;
    let classes: Option<usize> = args.take("--classes")?.map(|r| r.parse()).transpose()
        .map_err(|e| CliError::Usage(format!("invalid value for `--classes`: {e}")))?;
    args.finish()?;

    let dataset = load_dataset(&input, Schema::ExpectsTokens)?;
    let saliency = load_saliency(&saliency_path, &dataset)?;
    let confidences = load_confidences(&confidences_path, &dataset)?;
    let num_classes = classes.unwrap_or_else(|| {
        saliency
            .iter()
            .map(|((_, class), _)| class + 1)
            .max()
            .unwrap_or(2)
    });
    let outcome =
        confidence_indication(&saliency, &confidences, num_classes, folds, upsample, seed)?;

    report::write(
        &out,
        seed,
        json!({
            "command": "diag confidence",
            "input": input,
            "saliency": saliency_path,
            "confidences": confidences_path,
            "folds": folds,
            "upsample": upsample,
            "classes": num_classes,
        }),
        json!({
            "mae": outcome.mae,
            "max_error": outcome.max_error,
            "fold_maes": outcome.fold_maes,
        }),
        started,
    )
}

pub fn faithfulness(raw: &[String]) -> Result<(), CliError> {
    let started = Instant::now();
    let mut args = ArgSet::parse(raw, &["--use-gold-class"])?;
    let input = args.require("--input")?;
    let saliency_path = args.require("--saliency")?;
    let out = args.require("--out")?;
    let metric: PerformanceMetric = args
        .take("--metric")?
        .unwrap_or_else(|| "macro_f1".into())
        .parse()
        .map_err(|e| CliError::Usage(format!("invalid value for `--metric`: {e}")))?;
    let thresholds = match args.take("--thresholds")? {
        Some(raw) => parse_thresholds(&raw)?,
        None => (0..=10).map(|i| i * 10).collect(),
    };
    let class_choice = if args.switch("--use-gold-class") {
        ClassChoice::Gold
    } else {
        ClassChoice::Predicted
    };
    let seed = resolve_seed(&mut args)?;
    let train = TrainConfig {
        learning_rate: args.parsed("--lr", TrainConfig::default().learning_rate)?,
        epochs: args.parsed("--epochs", TrainConfig::default().epochs)?,
        l2: args.parsed("--l2", TrainConfig::default().l2)?,
        seed,
    };
    args.finish()?;

    let dataset = load_dataset(&input, Schema::ExpectsTokens)?;
    let saliency = load_saliency(&saliency_path, &dataset)?;
    // The reference model is trained on the dataset's own labels.
    let adapter = BagOfTokensAdapter::train(&dataset, &train)?;
    let outcome =
        faithfulness_auctp(&adapter, &dataset, &saliency, metric, &thresholds, class_choice)?;

    report::write(
        &out,
        seed,
        json!({
            "command": "diag faithfulness",
            "input": input,
            "saliency": saliency_path,
            "metric": match metric {
                PerformanceMetric::MacroF1 => "macro_f1",
                PerformanceMetric::Accuracy => "accuracy",
            },
            "thresholds": thresholds,
            "use_gold_class": class_choice == ClassChoice::Gold,
            "learning_rate": train.learning_rate,
            "epochs": train.epochs,
            "l2": train.l2,
        }),
        json!({
            "auctp": outcome.auctp,
            "base_performance": outcome.base_performance,
            "points": outcome.points,
        }),
        started,
    )
}

pub fn rationale(raw: &[String]) -> Result<(), CliError> {
    let started = Instant::now();
    let mut args = ArgSet::parse(raw, &[])?;
    let input = args.require("--input")?;
    let saliency_paths = args.take_all("--saliency");
    let model_names = args.take_all("--model");
    let activations_path = args.require("--activations")?;
    let out = args.require("--out")?;
    let seed = resolve_seed(&mut args)?;
    args.finish()?;

    if saliency_paths.len() < 2 {
        return Err(CliError::Usage(
            "`--saliency` must be given at least twice (one file per model)".into(),
        ));
    }
    if model_names.len() != saliency_paths.len() {
        return Err(CliError::Usage(format!(
            "`--model` must be given once per `--saliency` ({} saliency files, {} model names)",
            saliency_paths.len(),
            model_names.len()
        )));
    }

    let dataset = load_dataset(&input, Schema::ExpectsTokens)?;
    let activations = load_activations(&activations_path, &dataset)?;

    let mut models = Vec::new();
    for (name, path) in model_names.iter().zip(&saliency_paths) {
        let tensor = load_saliency(path, &dataset)?;
        let mut explanations = ModelExplanations {
            name: name.clone(),
            ..ModelExplanations::default()
        };
        for inst in dataset.instances() {
            let label = inst
                .label
                .ok_or_else(|| CliError::Run(format!("instance `{}` has no gold label", inst.id)))?;
            let act = activations.get(name, &inst.id).ok_or_else(|| {
                CliError::Run(format!(
                    "no activation summary for model `{name}`, instance `{}`",
                    inst.id
                ))
            })?;
            let sal = tensor.get(&inst.id, label).ok_or_else(|| {
                CliError::Run(format!(
                    "no saliency scores for instance `{}` at class {label} in `{path}`",
                    inst.id
                ))
            })?;
            explanations.activations.insert(inst.id.clone(), act.to_vec());
            explanations.saliency.insert(inst.id.clone(), sal.to_vec());
        }
        models.push(explanations);
    }

    let ids: Vec<String> = dataset.instances().iter().map(|i| i.id.clone()).collect();
    let outcome = rationale_consistency(&models, &ids)?;

    report::write(
        &out,
        seed,
        json!({
            "command": "diag rationale",
            "input": input,
            "saliency": saliency_paths,
            "models": model_names,
            "activations": activations_path,
        }),
        json!({
            "rho": outcome.rho,
            "pairs": outcome.pairs,
            "points": outcome.points,
        }),
        started,
    )
}

pub fn dataset(raw: &[String]) -> Result<(), CliError> {
    let started = Instant::now();
    let mut args = ArgSet::parse(raw, &[])?;
    let input = args.require("--input")?;
    let saliency_path = args.require("--saliency")?;
    let activations_path = args.require("--activations")?;
    let out = args.require("--out")?;
    let n_overlap: usize = args.parsed("--n-overlap", 2000)?;
    let n_random: usize = args.parsed("--n-random", 2000)?;
    let model = args.take("--model")?;
    let seed = resolve_seed(&mut args)?;
    args.finish()?;

    let ds = load_dataset(&input, Schema::ExpectsTokens)?;
    let saliency = load_saliency(&saliency_path, &ds)?;
    let table = load_activations(&activations_path, &ds)?;
    let model_name = match model {
        Some(name) => name,
        None => {
            let models = table.models();
            if models.len() != 1 {
                return Err(CliError::Usage(format!(
                    "activations file has {} models; pick one with `--model`",
                    models.len()
                )));
            }
            models.into_iter().next().expect("length checked")
        }
    };
    let activations: std::collections::BTreeMap<String, Vec<f64>> = table
        .iter()
        .filter(|((m, _), _)| *m == model_name)
        .map(|((_, id), v)| (id.clone(), v.clone()))
        .collect();
    let outcome = dataset_consistency(&ds, &activations, &saliency, n_overlap, n_random, seed)?;

    report::write(
        &out,
        seed,
        json!({
            "command": "diag dataset",
            "input": input,
            "saliency": saliency_path,
            "activations": activations_path,
            "model": model_name,
            "n_overlap": n_overlap,
            "n_random": n_random,
        }),
        json!({
            "rho": outcome.rho,
            "pairs": outcome.pairs,
        }),
        started,
    )
}
