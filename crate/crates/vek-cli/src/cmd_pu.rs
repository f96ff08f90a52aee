use std::time::Instant;

use serde_json::json;

use vek_core::dataio::{load_dataset, Schema};
use vek_core::numerics::TrainConfig;
use vek_core::pu::{fit_pu_pipeline, PuMode, PuWeightTable};

use crate::args::{resolve_seed, ArgSet};
use crate::{report, CliError};

fn train_config(args: &mut ArgSet, seed: u64) -> Result<TrainConfig, CliError> {
    let defaults = TrainConfig::default();
    Ok(TrainConfig {
        learning_rate: args.parsed("--lr", defaults.learning_rate)?,
        epochs: args.parsed("--epochs", defaults.epochs)?,
        l2: args.parsed("--l2", defaults.l2)?,
        seed,
    })
}

fn table_rows(table: &PuWeightTable) -> Vec<serde_json::Value> {
    table
        .rows
        .iter()
        .map(|r| json!({"id": r.id, "p_s": r.p_s, "w": r.w, "converted": r.converted}))
        .collect()
}

pub fn fit(raw: &[String]) -> Result<(), CliError> {
    let started = Instant::now();
    let mut args = ArgSet::parse(raw, &[])?;
    let input = args.require("--input")?;
    let out = args.require("--out")?;
    let mode: PuMode = args
        .require("--mode")?
        .parse()
        .map_err(|e| CliError::Usage(format!("invalid value for `--mode`: {e}")))?;
    let seed = resolve_seed(&mut args)?;
    let config = train_config(&mut args, seed)?;
    let weights_out = args.take("--weights-out")?;
    args.finish()?;

    let dataset = load_dataset(&input, Schema::ExpectsFeatures)?;
    let (model, table) = fit_pu_pipeline(&dataset, mode, &config)?;

    if let Some(path) = &weights_out {
        let mut text = String::new();
        for row in table_rows(&table) {
            text.push_str(&row.to_string());
            text.push('\n');
        }
        std::fs::write(path, text)?;
    }

    let mode_name = match mode {
        PuMode::Pn => "pn",
        PuMode::Pu => "pu",
        PuMode::Puc => "puc",
    };
    let train_accuracy = {
        // Fraction of instances whose predicted class matches the PU flag
        // (labelled -> positive); descriptive only.
        let mut correct = 0usize;
        for inst in dataset.instances() {
            let features = inst.features.as_ref().expect("validated by loader");
            let predicted = model.predict_class(features)?;
            let flag_class = usize::from(
                inst.pu_flag == Some(vek_core::dataio::PuFlag::Labelled),
            );
            correct += usize::from(predicted == flag_class);
        }
        correct as f64 / dataset.len().max(1) as f64
    };
    report::write(
        &out,
        seed,
        json!({
            "command": "pu fit",
            "input": input,
            "mode": mode_name,
            "learning_rate": config.learning_rate,
            "epochs": config.epochs,
            "l2": config.l2,
            "weights_out": weights_out,
        }),
        json!({
            "instances": dataset.len(),
            "c_estimate": table.c_estimate,
            "prior_estimate": table.prior_estimate,
            "converted": table.converted_count(),
            "unlabelled": table.rows.len(),
            "agreement_with_pu_flags": train_accuracy,
        }),
        started,
    )
}

pub fn convert(raw: &[String]) -> Result<(), CliError> {
    let started = Instant::now();
    let mut args = ArgSet::parse(raw, &[])?;
    let input = args.require("--input")?;
    let out = args.require("--out")?;
    let seed = resolve_seed(&mut args)?;
    let config = train_config(&mut args, seed)?;
    args.finish()?;

    let dataset = load_dataset(&input, Schema::ExpectsFeatures)?;
    let (_, table) = fit_pu_pipeline(&dataset, PuMode::Puc, &config)?;
    let converted_ids: Vec<&str> = table
        .rows
        .iter()
        .filter(|r| r.converted)
        .map(|r| r.id.as_str())
        .collect();

    report::write(
        &out,
        seed,
        json!({
            "command": "pu convert",
            "input": input,
            "learning_rate": config.learning_rate,
            "epochs": config.epochs,
            "l2": config.l2,
        }),
        json!({
            "instances": dataset.len(),
            "c_estimate": table.c_estimate,
            "prior_estimate": table.prior_estimate,
            "converted": table.converted_count(),
            "converted_ids": converted_ids,
            "weights": table_rows(&table),
        }),
        started,
    )
}
