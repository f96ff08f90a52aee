use serde_json::json;

use vek_core::dataio::{write_dataset, FeatureDataset, Instance};
use vek_core::synth::{drift_sequence, scar_mixture, DriftConfig, ScarConfig};

use crate::args::{resolve_seed, ArgSet};
use crate::CliError;

pub fn scar(raw: &[String]) -> Result<(), CliError> {
    let mut args = ArgSet::parse(raw, &[])?;
    let out = args.require("--out")?;
    let seed = resolve_seed(&mut args)?;
    let defaults = ScarConfig::default();
    let config = ScarConfig {
        n: args.parsed("--n", defaults.n)?,
        prior: args.parsed("--prior", defaults.prior)?,
        label_frequency: args.parsed("--label-frequency", defaults.label_frequency)?,
        separation: args.parsed("--separation", defaults.separation)?,
        noise: args.parsed("--noise", defaults.noise)?,
        seed,
    };
    args.finish()?;

    let dataset = scar_mixture(&config);
    write_dataset(&dataset, &out)?;
    eprintln!(
        "{}",
        json!({"written": out, "instances": dataset.len(), "seed": seed})
    );
    Ok(())
}

pub fn drift(raw: &[String]) -> Result<(), CliError> {
    let mut args = ArgSet::parse(raw, &[])?;
    let out = args.require("--out")?;
    let truth_out = args.take("--truth-out")?;
    let seed = resolve_seed(&mut args)?;
    let defaults = DriftConfig::default();
    let config = DriftConfig {
        steps: args.parsed("--steps", defaults.steps)?,
        per_class: args.parsed("--per-class", defaults.per_class)?,
        rotation_degrees: args.parsed("--rotation", defaults.rotation_degrees)?,
        seeds_per_class: args.parsed("--seeds-per-class", defaults.seeds_per_class)?,
        noise: args.parsed("--noise", defaults.noise)?,
        seed,
    };
    args.finish()?;

    let sample = drift_sequence(&config);
    let mut instances: Vec<Instance> = Vec::new();
    for step in &sample.steps {
        instances.extend(step.instances().iter().cloned());
    }
    let combined = FeatureDataset::from_instances(instances)?;
    write_dataset(&combined, &out)?;

    if let Some(path) = &truth_out {
        // Withheld final-step labels, reusing the dataset line format.
        let truth: std::collections::BTreeMap<&str, usize> = sample
            .final_truth
            .iter()
            .map(|(id, l)| (id.as_str(), *l))
            .collect();
        let last = sample.steps.last().expect("steps is non-empty");
        let rows: Vec<Instance> = last
            .instances()
            .iter()
            .filter_map(|inst| {
                truth.get(inst.id.as_str()).map(|&label| {
                    let mut full = inst.clone();
                    full.label = Some(label);
                    full
                })
            })
            .collect();
        let truth_ds = FeatureDataset::from_instances(rows)?;
        write_dataset(&truth_ds, path)?;
    }

    eprintln!(
        "{}",
        json!({
            "written": out,
            "truth_out": truth_out,
            "steps": config.steps,
            "instances": combined.len(),
            "seed": seed,
        })
    );
    Ok(())
}
