//! Supervised learners over mixed numeric / nominal / binary features.
//!
//! Both learners produce a probability for AGT; HGT is its complement.
//! Feature vectors are dense `f64` slices aligned to a [`FeatureSchema`]:
//! binary attributes hold 0 or 1, nominal attributes hold the level index.

mod bayes;
mod forest;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bayes::{fit_nb, NaiveBayes, NbConfig};
pub use forest::{
    fit_rf, grow_tree, DecisionTree, ForestConfig, MaxFeatures, Node, RandomForest, SplitTest,
};

use crate::tweetio::Label;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AttributeKind {
    Numeric,
    Nominal { levels: Vec<String> },
    Binary,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    #[serde(flatten)]
    pub kind: AttributeKind,
}

impl Attribute {
    pub fn numeric(name: impl Into<String>) -> Self {
        Attribute {
            name: name.into(),
            kind: AttributeKind::Numeric,
        }
    }
    pub fn binary(name: impl Into<String>) -> Self {
        Attribute {
            name: name.into(),
            kind: AttributeKind::Binary,
        }
    }
    pub fn nominal(name: impl Into<String>, levels: &[&str]) -> Self {
        Attribute {
            name: name.into(),
            kind: AttributeKind::Nominal {
                levels: levels.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    /// Number of discrete values, or `None` for numeric attributes.
    pub fn cardinality(&self) -> Option<usize> {
        match &self.kind {
            AttributeKind::Numeric => None,
            AttributeKind::Binary => Some(2),
            AttributeKind::Nominal { levels } => Some(levels.len()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub attributes: Vec<Attribute>,
}

impl FeatureSchema {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self, LearnError> {
        let mut names = HashSet::new();
        for a in &attributes {
            if !names.insert(a.name.as_str()) {
                return Err(LearnError::Schema(format!(
                    "duplicate attribute name {:?}",
                    a.name
                )));
            }
            if let AttributeKind::Nominal { levels } = &a.kind {
                let distinct: HashSet<&String> = levels.iter().collect();
                if levels.is_empty() || distinct.len() != levels.len() {
                    return Err(LearnError::Schema(format!(
                        "attribute {:?} needs distinct, non-empty levels",
                        a.name
                    )));
                }
            }
        }
        Ok(FeatureSchema { attributes })
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.attributes.iter().map(|a| a.name.as_str()).collect()
    }

    /// Checks length, finiteness and discrete value ranges.
    pub fn check(&self, values: &[f64]) -> Result<(), LearnError> {
        if values.len() != self.attributes.len() {
            return Err(LearnError::Mismatch(format!(
                "vector has {} values, schema has {} attributes",
                values.len(),
                self.attributes.len()
            )));
        }
        for (a, &v) in self.attributes.iter().zip(values) {
            if !v.is_finite() {
                return Err(LearnError::Mismatch(format!(
                    "attribute {:?} is not finite",
                    a.name
                )));
            }
            if let Some(card) = a.cardinality() {
                if v < 0.0 || v.fract() != 0.0 || v as usize >= card {
                    return Err(LearnError::Mismatch(format!(
                        "attribute {:?} value {v} outside its {card} levels",
                        a.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Values aligned to a schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(v: Vec<f64>) -> Self {
        FeatureVector(v)
    }
}

/// Labeled training rows aligned to one schema.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub rows: Vec<FeatureVector>,
    pub labels: Vec<Label>,
}

impl Dataset {
    pub fn new(schema: FeatureSchema) -> Self {
        Dataset {
            schema,
            rows: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, row: impl Into<FeatureVector>, label: Label) -> Result<(), LearnError> {
        let row = row.into();
        self.schema.check(&row.0)?;
        self.rows.push(row);
        self.labels.push(label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0; 2];
        for l in &self.labels {
            c[l.index()] += 1;
        }
        c
    }

    /// Restriction to a subset of attribute positions.
    pub fn project(&self, attrs: &[usize]) -> Dataset {
        let schema = FeatureSchema {
            attributes: attrs
                .iter()
                .map(|&i| self.schema.attributes[i].clone())
                .collect(),
        };
        let rows = self
            .rows
            .iter()
            .map(|r| FeatureVector(attrs.iter().map(|&i| r.0[i]).collect()))
            .collect();
        Dataset {
            schema,
            rows,
            labels: self.labels.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("training error: {0}")]
    Training(String),
    #[error("prediction error: {0}")]
    Mismatch(String),
    #[error("model file error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Nb,
    #[default]
    Rf,
}

impl std::fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LearnerKind::Nb => "nb",
            LearnerKind::Rf => "rf",
        })
    }
}

impl std::str::FromStr for LearnerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "nb" | "naive-bayes" => Ok(LearnerKind::Nb),
            "rf" | "random-forest" => Ok(LearnerKind::Rf),
            other => Err(format!("unknown learner {other:?} (expected nb or rf)")),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "lowercase")]
pub enum Learner {
    Nb(NaiveBayes),
    Rf(RandomForest),
}

const MODEL_MAGIC: &str = "agt-model";
const MODEL_VERSION: u32 = 1;

/// A fitted learner together with the schema it was trained on.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format: String,
    pub version: u32,
    pub schema: FeatureSchema,
    pub seed: Option<u64>,
    /// Free-form key/value pairs carried with the model file.
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
    pub model: Learner,
}

impl TrainedModel {
    fn wrap(schema: FeatureSchema, seed: Option<u64>, model: Learner) -> Self {
        TrainedModel {
            format: MODEL_MAGIC.into(),
            version: MODEL_VERSION,
            schema,
            seed,
            metadata: BTreeMap::new(),
            model,
        }
    }

    pub fn kind(&self) -> LearnerKind {
        match self.model {
            Learner::Nb(_) => LearnerKind::Nb,
            Learner::Rf(_) => LearnerKind::Rf,
        }
    }

    /// Probability of AGT for `x`.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, LearnError> {
        self.schema.check(x)?;
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        match &self.model {
            Learner::Nb(nb) => nb.proba_agt(x),
            Learner::Rf(rf) => rf.proba_agt(x),
        }
    }

    pub fn classify(&self, x: &[f64], threshold: f64) -> Result<Label, LearnError> {
        Ok(label_for(self.predict_proba(x)?, threshold))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self, LearnError> {
        let m: TrainedModel =
            serde_json::from_str(s).map_err(|e| LearnError::Format(e.to_string()))?;
        if m.format != MODEL_MAGIC {
            return Err(LearnError::Format(format!(
                "not a model file (format {:?})",
                m.format
            )));
        }
        if m.version != MODEL_VERSION {
            return Err(LearnError::Format(format!(
                "unsupported model version {}",
                m.version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LearnError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LearnError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// AGT iff `proba > threshold` (strict).
pub fn label_for(proba: f64, threshold: f64) -> Label {
    if proba > threshold {
        Label::Agt
    } else {
        Label::Hgt
    }
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Fits the requested learner.
pub fn fit(
    kind: LearnerKind,
    data: &Dataset,
    nb: &NbConfig,
    rf: &ForestConfig,
) -> Result<TrainedModel, LearnError> {
    match kind {
        LearnerKind::Nb => fit_nb(data, nb),
        LearnerKind::Rf => fit_rf(data, rf),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_is_strict() {
        assert_eq!(label_for(0.51, 0.5), Label::Agt);
        assert_eq!(label_for(0.5, 0.5), Label::Hgt);
        assert_eq!(label_for(0.49, 0.5), Label::Hgt);
    }

    #[test]
    fn schema_rejects_duplicates() {
        assert!(FeatureSchema::new(vec![Attribute::numeric("a"), Attribute::binary("a")]).is_err());
        assert!(FeatureSchema::new(vec![Attribute::nominal("d", &["x", "x"])]).is_err());
    }

    #[test]
    fn checks_vectors() {
        let s = FeatureSchema::new(vec![
            Attribute::numeric("n"),
            Attribute::binary("b"),
            Attribute::nominal("d", &["x", "y", "z"]),
        ])
        .unwrap();
        assert!(s.check(&[1.5, 1.0, 2.0]).is_ok());
        assert!(s.check(&[1.5, 2.0, 2.0]).is_err());
        assert!(s.check(&[1.5, 0.0, 3.0]).is_err());
        assert!(s.check(&[f64::NAN, 0.0, 0.0]).is_err());
        assert!(s.check(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let schema =
            FeatureSchema::new(vec![Attribute::binary("b"), Attribute::numeric("n")]).unwrap();
        let mut d = Dataset::new(schema);
        d.push(vec![1.0, 3.0], Label::Agt).unwrap();
        d.push(vec![0.0, 1.0], Label::Hgt).unwrap();
        d.push(vec![1.0, 2.5], Label::Agt).unwrap();
        for kind in [LearnerKind::Nb, LearnerKind::Rf] {
            let m = fit(
                kind,
                &d,
                &NbConfig::default(),
                &ForestConfig {
                    n_trees: 5,
                    ..Default::default()
                },
            )
            .unwrap();
            let back = TrainedModel::from_json(&m.to_json()).unwrap();
            assert_eq!(back.kind(), kind);
            for r in &d.rows {
                assert_eq!(
                    m.predict_proba(&r.0).unwrap(),
                    back.predict_proba(&r.0).unwrap()
                );
            }
        }
        assert!(TrainedModel::from_json(r#"{"format":"x"}"#).is_err());
    }

    #[test]
    fn predict_rejects_mismatched_vector() {
        let schema = FeatureSchema::new(vec![Attribute::binary("b")]).unwrap();
        let mut d = Dataset::new(schema);
        d.push(vec![1.0], Label::Agt).unwrap();
        d.push(vec![0.0], Label::Hgt).unwrap();
        let m = fit_nb(&d, &NbConfig::default()).unwrap();
        assert!(matches!(
            m.predict_proba(&[1.0, 0.0]),
            Err(LearnError::Mismatch(_))
        ));
    }
}
