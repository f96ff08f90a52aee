use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, Result};
use crate::numerics::Matrix;

/// Whether the labelled part of a PU dataset marks an instance as labelled
/// or unlabelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PuFlag {
    Labelled,
    Unlabelled,
}

/// One dataset instance. Either `features` or `tokens` (or both) must be
/// present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pu_flag: Option<PuFlag>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestep: Option<i64>,
}

impl Instance {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            tokens: None,
            features: None,
            label: None,
            pu_flag: None,
            domain: None,
            timestep: None,
        }
    }

    pub fn with_features(mut self, features: Vec<f64>) -> Self {
        self.features = Some(features);
        self
    }

    pub fn with_tokens(mut self, tokens: Vec<String>) -> Self {
        self.tokens = Some(tokens);
        self
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_pu_flag(mut self, flag: PuFlag) -> Self {
        self.pu_flag = Some(flag);
        self
    }

    pub fn with_timestep(mut self, timestep: i64) -> Self {
        self.timestep = Some(timestep);
        self
    }
}

/// What the loader requires of each instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    ExpectsFeatures,
    ExpectsTokens,
    Both,
}

/// A validated, immutable collection of instances with unique ids.
#[derive(Debug, Clone, Default)]
pub struct FeatureDataset {
    instances: Vec<Instance>,
    index: BTreeMap<String, usize>,
}

impl FeatureDataset {
    /// Validates and indexes a set of instances (ids unique, feature vectors
    /// of equal length, labels and values finite).
    pub fn from_instances(instances: Vec<Instance>) -> Result<Self> {
        let mut ds = FeatureDataset {
            instances: Vec::new(),
            index: BTreeMap::new(),
        };
        for (i, inst) in instances.into_iter().enumerate() {
            ds.push_validated(inst, "<memory>", i + 1, Schema::Both, &mut None)?;
        }
        Ok(ds)
    }

    fn push_validated(
        &mut self,
        inst: Instance,
        path: &str,
        line: usize,
        schema: Schema,
        feature_len: &mut Option<usize>,
    ) -> Result<()> {
        let schema_err = |field: &str, message: String| DataError::Schema {
            path: path.to_string(),
            line,
            field: field.to_string(),
            message,
        };
        match schema {
            Schema::ExpectsFeatures if inst.features.is_none() => {
                return Err(schema_err("features", "missing feature vector".into()))
            }
            Schema::ExpectsTokens if inst.tokens.is_none() => {
                return Err(schema_err("tokens", "missing token list".into()))
            }
            _ => {}
        }
        if inst.features.is_none() && inst.tokens.is_none() {
            return Err(schema_err(
                "features",
                "instance has neither features nor tokens".into(),
            ));
        }
        if let Some(f) = &inst.features {
            if f.iter().any(|v| !v.is_finite()) {
                return Err(schema_err("features", "non-finite feature value".into()));
            }
            let fl = feature_len.or_else(|| {
                self.instances
                    .iter()
                    .find_map(|i| i.features.as_ref().map(Vec::len))
            });
            match fl {
                Some(expected) if expected != f.len() => {
                    return Err(schema_err(
                        "features",
                        format!("feature vector of length {}, expected {expected}", f.len()),
                    ))
                }
                None => *feature_len = Some(f.len()),
                _ => {}
            }
        }
        if self.index.contains_key(&inst.id) {
            return Err(DataError::DuplicateId {
                path: path.to_string(),
                line,
                id: inst.id,
            });
        }
        self.index.insert(inst.id.clone(), self.instances.len());
        self.instances.push(inst);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn get(&self, id: &str) -> Option<&Instance> {
        self.index.get(id).map(|&i| &self.instances[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Number of classes implied by the labels (max label + 1).
    pub fn num_classes(&self) -> usize {
        self.instances
            .iter()
            .filter_map(|i| i.label)
            .max()
            .map_or(0, |m| m + 1)
    }

    /// Stacks the feature vectors of all instances into a matrix, in order.
    pub fn feature_matrix(&self) -> Result<Matrix> {
        let rows: Vec<Vec<f64>> = self
            .instances
            .iter()
            .map(|i| {
                i.features.clone().ok_or(DataError::LengthMismatch {
                    id: i.id.clone(),
                    expected: 1,
                    got: 0,
                })
            })
            .collect::<Result<_>>()?;
        Matrix::from_rows(&rows).map_err(|e| DataError::Schema {
            path: "<memory>".into(),
            line: 0,
            field: "features".into(),
            message: e.to_string(),
        })
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text.lines().map(str::to_string).collect())
}

pub(super) fn parse_line<T: for<'de> Deserialize<'de>>(
    raw: &str,
    path: &str,
    line: usize,
) -> Result<T> {
    serde_json::from_str(raw).map_err(|e| {
        if e.is_syntax() || e.is_eof() {
            DataError::Parse {
                path: path.to_string(),
                line,
                message: e.to_string(),
            }
        } else {
            DataError::Schema {
                path: path.to_string(),
                line,
                field: "<line>".into(),
                message: e.to_string(),
            }
        }
    })
}

/// Loads a JSON Lines dataset, one instance object per line. Blank lines are
/// not allowed; every error names the offending line.
pub fn load_dataset(path: impl AsRef<Path>, schema: Schema) -> Result<FeatureDataset> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut ds = FeatureDataset::default();
    let mut feature_len = None;
    for (i, raw) in read_lines(path)?.iter().enumerate() {
        let inst: Instance = parse_line(raw, &display, i + 1)?;
        ds.push_validated(inst, &display, i + 1, schema, &mut feature_len)?;
    }
    Ok(ds)
}

/// Serializes one value per line in canonical form: sorted keys, absent
/// optional fields omitted, shortest round-trip numbers.
pub(super) fn write_jsonl<T: Serialize>(values: &[T], path: &Path) -> Result<()> {
    let mut out = String::new();
    for v in values {
        let value = serde_json::to_value(v).map_err(|e| DataError::Schema {
            path: path.display().to_string(),
            line: 0,
            field: "<serialize>".into(),
            message: e.to_string(),
        })?;
        out.push_str(&value.to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes a dataset back to disk in canonical JSON Lines form.
pub fn write_dataset(dataset: &FeatureDataset, path: impl AsRef<Path>) -> Result<()> {
    write_jsonl(dataset.instances(), path.as_ref())
}

/// One pre-segmented document for the extractive-explanation utilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainInstance {
    pub id: String,
    pub sentences: Vec<String>,
    pub justification: String,
}

/// Loads `{"id", "sentences", "justification"}` lines; ids must be unique.
pub fn load_explain_corpus(path: impl AsRef<Path>) -> Result<Vec<ExplainInstance>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (i, raw) in read_lines(path)?.iter().enumerate() {
        let inst: ExplainInstance = parse_line(raw, &display, i + 1)?;
        if seen.insert(inst.id.clone(), ()).is_some() {
            return Err(DataError::DuplicateId {
                path: display,
                line: i + 1,
                id: inst.id,
            });
        }
        out.push(inst);
    }
    Ok(out)
}

pub fn write_explain_corpus(corpus: &[ExplainInstance], path: impl AsRef<Path>) -> Result<()> {
    write_jsonl(corpus, path.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("vek-dataio-tests");
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let path = tmp("empty.jsonl");
        fs::write(&path, "").unwrap();
        let ds = load_dataset(&path, Schema::Both).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn wrong_feature_length_names_line() {
        let path = tmp("ragged.jsonl");
        fs::write(
            &path,
            "{\"id\":\"a\",\"features\":[1.0,2.0]}\n{\"id\":\"b\",\"features\":[1.0]}\n",
        )
        .unwrap();
        match load_dataset(&path, Schema::ExpectsFeatures) {
            Err(DataError::Schema { line, field, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(field, "features");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_names_line() {
        let path = tmp("dup.jsonl");
        fs::write(
            &path,
            "{\"id\":\"a\",\"features\":[1.0]}\n{\"id\":\"a\",\"features\":[2.0]}\n",
        )
        .unwrap();
        match load_dataset(&path, Schema::Both) {
            Err(DataError::DuplicateId { line, id, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(id, "a");
            }
            other => panic!("expected duplicate id, got {other:?}"),
        }
    }

    #[test]
    fn bad_json_is_parse_error_with_line() {
        let path = tmp("badjson.jsonl");
        fs::write(&path, "{\"id\":\"a\",\"features\":[1.0]}\n{not json\n").unwrap();
        match load_dataset(&path, Schema::Both) {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        let path = tmp("unknown.jsonl");
        fs::write(&path, "{\"id\":\"a\",\"features\":[1.0],\"surprise\":1}\n").unwrap();
        assert!(matches!(
            load_dataset(&path, Schema::Both),
            Err(DataError::Schema { line: 1, .. })
        ));
    }

    #[test]
    fn fixture_round_trips_byte_identically() {
        // Keys sorted in the fixture, matching canonical output order.
        let fixture = concat!(
            "{\"features\":[0.1,0.2],\"id\":\"a1\",\"label\":1,\"pu_flag\":\"unlabelled\",\"tokens\":[\"the\",\"cat\"]}\n",
            "{\"domain\":\"pomt\",\"features\":[1.5,-2.0],\"id\":\"a2\",\"timestep\":2014}\n",
            "{\"id\":\"a3\",\"tokens\":[\"x\"]}\n",
        );
        let path = tmp("roundtrip.jsonl");
        fs::write(&path, fixture).unwrap();
        let ds = load_dataset(&path, Schema::Both).unwrap();
        let out = tmp("roundtrip_out.jsonl");
        write_dataset(&ds, &out).unwrap();
        assert_eq!(fs::read_to_string(&out).unwrap(), fixture);
        // And load(write(x)) == x.
        let ds2 = load_dataset(&out, Schema::Both).unwrap();
        assert_eq!(ds.instances(), ds2.instances());
    }

    #[test]
    fn explain_corpus_round_trip() {
        let corpus = vec![ExplainInstance {
            id: "c1".into(),
            sentences: vec!["First sentence.".into(), "Second one.".into()],
            justification: "A short justification.".into(),
        }];
        let path = tmp("corpus.jsonl");
        write_explain_corpus(&corpus, &path).unwrap();
        assert_eq!(load_explain_corpus(&path).unwrap(), corpus);
    }
}
