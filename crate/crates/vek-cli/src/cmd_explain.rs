use std::time::Instant;

use serde::Deserialize;
use serde_json::json;

use vek_core::dataio::load_explain_corpus;
use vek_core::explain::{
    evaluate_explanations, greedy_oracle, lead_k, rouge_l, rouge_n, tokenize,
};

use crate::args::{resolve_seed, ArgSet};
use crate::{report, CliError};

pub fn oracle(raw: &[String]) -> Result<(), CliError> {
    let started = Instant::now();
    let mut args = ArgSet::parse(raw, &["--force-k"])?;
    let input = args.require("--input")?;
    let out = args.require("--out")?;
    let k: usize = args.parsed("--k", 4)?;
    let force_k = args.switch("--force-k");
    let method = args.take("--method")?.unwrap_or_else(|| "greedy".into());
    let selections_out = args.take("--selections-out")?;
    let seed = resolve_seed(&mut args)?;
    args.finish()?;

    let corpus = load_explain_corpus(&input)?;
    let mut selections = Vec::with_capacity(corpus.len());
    let mut predictions = Vec::with_capacity(corpus.len());
    let mut gold = Vec::with_capacity(corpus.len());
    for doc in &corpus {
        let selection = match method.as_str() {
            "greedy" => greedy_oracle(&doc.sentences, &doc.justification, k, force_k)?,
            "lead" => lead_k(&doc.sentences, k)?,
            other => {
                return Err(CliError::Usage(format!(
                    "invalid value for `--method`: expected greedy or lead, got `{other}`"
                )))
            }
        };
        let text: Vec<&str> = selection
            .indices
            .iter()
            .map(|&i| doc.sentences[i].as_str())
            .collect();
        predictions.push((doc.id.clone(), text.join(" ")));
        gold.push((doc.id.clone(), doc.justification.clone()));
        selections.push((doc.id.clone(), selection));
    }
    let summary = evaluate_explanations(&predictions, &gold)?;

    if let Some(path) = &selections_out {
        let mut text = String::new();
        for (id, selection) in &selections {
            let line = json!({"id": id, "indices": selection.indices});
            text.push_str(&line.to_string());
            text.push('\n');
        }
        std::fs::write(path, text)?;
    }

    let per_instance: Vec<serde_json::Value> = selections
        .iter()
        .map(|(id, s)| {
            json!({
                "id": id,
                "indices": s.indices,
                "gain_trace": s.gain_trace,
            })
        })
        .collect();

    report::write(
        &out,
        seed,
        json!({
            "command": "explain oracle",
            "input": input,
            "k": k,
            "force_k": force_k,
            "method": method,
            "selections_out": selections_out,
        }),
        json!({
            "instances": summary.instances,
            "rouge_1": summary.rouge_1,
            "rouge_2": summary.rouge_2,
            "rouge_l": summary.rouge_l,
            "selections": per_instance,
        }),
        started,
    )
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairLine {
    id: String,
    candidate: String,
    reference: String,
}

pub fn rouge(raw: &[String]) -> Result<(), CliError> {
    let started = Instant::now();
    let mut args = ArgSet::parse(raw, &[])?;
    let input = args.require("--input")?;
    let out = args.require("--out")?;
    let seed = resolve_seed(&mut args)?;
    args.finish()?;

    let text = std::fs::read_to_string(&input)?;
    let mut per_instance = Vec::new();
    let mut predictions = Vec::new();
    let mut gold = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let pair: PairLine = serde_json::from_str(line)
            .map_err(|e| CliError::Run(format!("{input}:{}: {e}", i + 1)))?;
        let cand = tokenize(&pair.candidate);
        let refr = tokenize(&pair.reference);
        per_instance.push(json!({
            "id": pair.id,
            "rouge_1": rouge_n(&cand, &refr, 1),
            "rouge_2": rouge_n(&cand, &refr, 2),
            "rouge_l": rouge_l(&cand, &refr),
        }));
        predictions.push((pair.id.clone(), pair.candidate));
        gold.push((pair.id, pair.reference));
    }
    let summary = evaluate_explanations(&predictions, &gold)?;

    report::write(
        &out,
        seed,
        json!({"command": "explain rouge", "input": input}),
        json!({
            "instances": summary.instances,
            "mean_rouge_1": summary.rouge_1,
            "mean_rouge_2": summary.rouge_2,
            "mean_rouge_l": summary.rouge_l,
            "per_instance": per_instance,
        }),
        started,
    )
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SelectionLine {
    id: String,
    #[serde(default)]
    indices: Option<Vec<usize>>,
    #[serde(default)]
    text: Option<String>,
}

pub fn eval(raw: &[String]) -> Result<(), CliError> {
    let started = Instant::now();
    let mut args = ArgSet::parse(raw, &[])?;
    let input = args.require("--input")?;
    let selections_path = args.require("--selections")?;
    let out = args.require("--out")?;
    let seed = resolve_seed(&mut args)?;
    args.finish()?;

    let corpus = load_explain_corpus(&input)?;
    let by_id: std::collections::BTreeMap<&str, &vek_core::dataio::ExplainInstance> =
        corpus.iter().map(|d| (d.id.as_str(), d)).collect();

    let text = std::fs::read_to_string(&selections_path)?;
    let mut predictions = Vec::new();
    let mut gold = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let sel: SelectionLine = serde_json::from_str(line)
            .map_err(|e| CliError::Run(format!("{selections_path}:{}: {e}", i + 1)))?;
        let doc = by_id.get(sel.id.as_str()).ok_or_else(|| {
            CliError::Run(format!(
                "{selections_path}:{}: unknown instance id `{}`",
                i + 1,
                sel.id
            ))
        })?;
        let predicted_text = match (&sel.indices, &sel.text) {
            (Some(indices), _) => {
                let mut parts = Vec::with_capacity(indices.len());
                for &idx in indices {
                    let sentence = doc.sentences.get(idx).ok_or_else(|| {
                        CliError::Run(format!(
                            "{selections_path}:{}: sentence index {idx} out of range for `{}`",
                            i + 1,
                            sel.id
                        ))
                    })?;
                    parts.push(sentence.as_str());
                }
                parts.join(" ")
            }
            (None, Some(text)) => text.clone(),
            (None, None) => {
                return Err(CliError::Run(format!(
                    "{selections_path}:{}: line needs either `indices` or `text`",
                    i + 1
                )))
            }
        };
        predictions.push((sel.id.clone(), predicted_text));
        gold.push((sel.id, doc.justification.clone()));
    }
    let summary = evaluate_explanations(&predictions, &gold)?;

    report::write(
        &out,
        seed,
        json!({
            "command": "explain eval",
            "input": input,
            "selections": selections_path,
        }),
        json!({
            "instances": summary.instances,
            "rouge_1": summary.rouge_1,
            "rouge_2": summary.rouge_2,
            "rouge_l": summary.rouge_l,
        }),
        started,
    )
}
