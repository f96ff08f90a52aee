use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::{parse_line, write_jsonl, FeatureDataset};
use super::{DataError, Result};

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text.lines().map(str::to_string).collect())
}

fn token_count(dataset: &FeatureDataset, id: &str) -> Result<usize> {
    let inst = dataset
        .get(id)
        .ok_or_else(|| DataError::UnknownInstance { id: id.to_string() })?;
    inst.tokens
        .as_ref()
        .map(Vec::len)
        .ok_or_else(|| DataError::UnknownInstance {
            id: format!("{id} (instance has no tokens)"),
        })
}

/// Per-(instance, class) token-level saliency scores.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SaliencyTensor {
    entries: BTreeMap<(String, usize), Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SaliencyLine {
    id: String,
    class: usize,
    scores: Vec<f64>,
}

impl SaliencyTensor {
    pub fn insert(&mut self, id: impl Into<String>, class: usize, scores: Vec<f64>) {
        self.entries.insert((id.into(), class), scores);
    }

    pub fn get(&self, id: &str, class: usize) -> Option<&[f64]> {
        self.entries
            .get(&(id.to_string(), class))
            .map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, usize), &Vec<f64>)> {
        self.entries.iter()
    }
}

/// Loads `{"id", "class", "scores"}` lines cross-validated against the
/// dataset's instances and token counts.
pub fn load_saliency(path: impl AsRef<Path>, dataset: &FeatureDataset) -> Result<SaliencyTensor> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut tensor = SaliencyTensor::default();
    for (i, raw) in read_lines(path)?.iter().enumerate() {
        let line: SaliencyLine = parse_line(raw, &display, i + 1)?;
        let expected = token_count(dataset, &line.id)?;
        if line.scores.len() != expected {
            return Err(DataError::LengthMismatch {
                id: line.id,
                expected,
                got: line.scores.len(),
            });
        }
        if line.scores.iter().any(|s| !s.is_finite()) {
            return Err(DataError::Schema {
                path: display,
                line: i + 1,
                field: "scores".into(),
                message: "non-finite saliency score".into(),
            });
        }
        tensor.insert(line.id, line.class, line.scores);
    }
    Ok(tensor)
}

pub fn write_saliency(tensor: &SaliencyTensor, path: impl AsRef<Path>) -> Result<()> {
    let lines: Vec<SaliencyLine> = tensor
        .iter()
        .map(|((id, class), scores)| SaliencyLine {
            id: id.clone(),
            class: *class,
            scores: scores.clone(),
        })
        .collect();
    write_jsonl(&lines, path.as_ref())
}

/// Binary gold rationale masks per instance id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RationaleSet {
    masks: BTreeMap<String, Vec<u8>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RationaleLine {
    id: String,
    mask: Vec<u8>,
}

impl RationaleSet {
    pub fn insert(&mut self, id: impl Into<String>, mask: Vec<u8>) {
        self.masks.insert(id.into(), mask);
    }

    pub fn get(&self, id: &str) -> Option<&[u8]> {
        self.masks.get(id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<u8>)> {
        self.masks.iter()
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }
}

/// Loads `{"id", "mask"}` lines; masks are 0/1 and must match token counts.
pub fn load_rationales(path: impl AsRef<Path>, dataset: &FeatureDataset) -> Result<RationaleSet> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut set = RationaleSet::default();
    for (i, raw) in read_lines(path)?.iter().enumerate() {
        let line: RationaleLine = parse_line(raw, &display, i + 1)?;
        let expected = token_count(dataset, &line.id)?;
        if line.mask.len() != expected {
            return Err(DataError::LengthMismatch {
                id: line.id,
                expected,
                got: line.mask.len(),
            });
        }
        if line.mask.iter().any(|&m| m > 1) {
            return Err(DataError::Schema {
                path: display,
                line: i + 1,
                field: "mask".into(),
                message: "mask values must be 0 or 1".into(),
            });
        }
        set.insert(line.id, line.mask);
    }
    Ok(set)
}

pub fn write_rationales(set: &RationaleSet, path: impl AsRef<Path>) -> Result<()> {
    let lines: Vec<RationaleLine> = set
        .iter()
        .map(|(id, mask)| RationaleLine {
            id: id.clone(),
            mask: mask.clone(),
        })
        .collect();
    write_jsonl(&lines, path.as_ref())
}

/// Model confidence for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Confidence {
    pub id: String,
    pub predicted_class: usize,
    pub confidence: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_distribution: Option<Vec<f64>>,
}

/// Confidence rows keyed by instance id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfidenceTable {
    rows: BTreeMap<String, Confidence>,
}

impl ConfidenceTable {
    pub fn insert(&mut self, row: Confidence) {
        self.rows.insert(row.id.clone(), row);
    }

    pub fn get(&self, id: &str) -> Option<&Confidence> {
        self.rows.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Confidence)> {
        self.rows.iter()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Loads `{"id", "predicted_class", "confidence"}` lines. When a full
/// distribution is present, the confidence must equal its maximum.
pub fn load_confidences(
    path: impl AsRef<Path>,
    dataset: &FeatureDataset,
) -> Result<ConfidenceTable> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut table = ConfidenceTable::default();
    for (i, raw) in read_lines(path)?.iter().enumerate() {
        let row: Confidence = parse_line(raw, &display, i + 1)?;
        if !dataset.contains(&row.id) {
            return Err(DataError::UnknownInstance { id: row.id });
        }
        if !(0.0..=1.0).contains(&row.confidence) {
            return Err(DataError::Schema {
                path: display,
                line: i + 1,
                field: "confidence".into(),
                message: format!("confidence {} outside [0, 1]", row.confidence),
            });
        }
        if let Some(dist) = &row.full_distribution {
            let max = dist.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if (max - row.confidence).abs() > 1e-9 {
                return Err(DataError::Schema {
                    path: display,
                    line: i + 1,
                    field: "confidence".into(),
                    message: format!(
                        "confidence {} does not match distribution max {max}",
                        row.confidence
                    ),
                });
            }
        }
        table.insert(row);
    }
    Ok(table)
}

pub fn write_confidences(table: &ConfidenceTable, path: impl AsRef<Path>) -> Result<()> {
    let lines: Vec<Confidence> = table.iter().map(|(_, c)| c.clone()).collect();
    write_jsonl(&lines, path.as_ref())
}

/// Activation summaries keyed by (model id, instance id); the vector length
/// is fixed per model id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActivationTable {
    rows: BTreeMap<(String, String), Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActivationLine {
    model: String,
    id: String,
    activation: Vec<f64>,
}

impl ActivationTable {
    pub fn insert(&mut self, model: impl Into<String>, id: impl Into<String>, v: Vec<f64>) {
        self.rows.insert((model.into(), id.into()), v);
    }

    pub fn get(&self, model: &str, id: &str) -> Option<&[f64]> {
        self.rows
            .get(&(model.to_string(), id.to_string()))
            .map(Vec::as_slice)
    }

    pub fn models(&self) -> Vec<String> {
        let mut ms: Vec<String> = self.rows.keys().map(|(m, _)| m.clone()).collect();
        ms.dedup();
        ms
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, String), &Vec<f64>)> {
        self.rows.iter()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Loads `{"model", "id", "activation"}` lines with a fixed activation
/// length per model id.
pub fn load_activations(
    path: impl AsRef<Path>,
    dataset: &FeatureDataset,
) -> Result<ActivationTable> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut table = ActivationTable::default();
    let mut lengths: BTreeMap<String, usize> = BTreeMap::new();
    for (i, raw) in read_lines(path)?.iter().enumerate() {
        let line: ActivationLine = parse_line(raw, &display, i + 1)?;
        if !dataset.contains(&line.id) {
            return Err(DataError::UnknownInstance { id: line.id });
        }
        if let Some(&expected) = lengths.get(&line.model) {
            if line.activation.len() != expected {
                return Err(DataError::LengthMismatch {
                    id: format!("{}/{}", line.model, line.id),
                    expected,
                    got: line.activation.len(),
                });
            }
        } else {
            lengths.insert(line.model.clone(), line.activation.len());
        }
        table.insert(line.model, line.id, line.activation);
    }
    Ok(table)
}

pub fn write_activations(table: &ActivationTable, path: impl AsRef<Path>) -> Result<()> {
    let lines: Vec<ActivationLine> = table
        .iter()
        .map(|((model, id), activation)| ActivationLine {
            model: model.clone(),
            id: id.clone(),
            activation: activation.clone(),
        })
        .collect();
    write_jsonl(&lines, path.as_ref())
}
