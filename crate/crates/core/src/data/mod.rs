//! Labeled feature datasets: schema, instances, ingestion and fold assignment.
//!
//! Every action is a fixed-length vector of numeric features. The label is
//! binary: `1` marks a norm violation (the positive class whose probability
//! the classifier estimates) and `0` marks regular behavior.

mod arff;
mod csv_io;
pub(crate) mod folds;
mod synth;

use std::collections::HashSet;
use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use arff::{parse_arff, to_arff};
pub use csv_io::{parse_csv, parse_unlabeled_csv, schema_from_csv_header, to_csv};
pub use folds::{stratified_kfold, FoldAssignment};
pub use synth::{synth_generate, SynthConfig};

/// Encoded label of the violation class.
pub const VIOLATION: u8 = 1;
/// Encoded label of the regular class.
pub const REGULAR: u8 = 0;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("malformed header at line {line}: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("attribute `{name}` is not numeric")]
    NonNumericFeature { name: String },
    #[error("line {line}: unknown class value `{value}`")]
    UnknownClassValue { line: usize, value: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    ArityMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: missing value in column `{column}`")]
    MissingValue { line: usize, column: String },
    #[error("line {line}: `{cell}` in column `{column}` is not a number")]
    NonNumericCell {
        line: usize,
        column: String,
        cell: String,
    },
    #[error("line {line}: non-finite value in column `{column}`")]
    NonFiniteValue { line: usize, column: String },
    #[error("header mismatch: {0}")]
    HeaderMismatch(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("instance {index}: {reason}")]
    SchemaViolation { index: usize, reason: String },
    #[error("too few instances: {0}")]
    TooFewInstances(String),
    #[error("bad synthetic config: {0}")]
    BadConfig(String),
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub kind: FeatureKind,
}

/// The two class tags as they appear in data files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelValues {
    pub violation: String,
    pub regular: String,
}

impl LabelValues {
    pub fn new(violation: impl Into<String>, regular: impl Into<String>) -> Self {
        Self {
            violation: violation.into(),
            regular: regular.into(),
        }
    }

    /// Encode a class tag, `None` if it is neither tag.
    pub fn encode(&self, tag: &str) -> Option<u8> {
        if tag == self.violation {
            Some(VIOLATION)
        } else if tag == self.regular {
            Some(REGULAR)
        } else {
            None
        }
    }

    pub fn decode(&self, y: u8) -> &str {
        if y == VIOLATION {
            &self.violation
        } else {
            &self.regular
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureDef>,
    pub label_name: String,
    pub label_values: LabelValues,
}

impl FeatureSchema {
    pub fn new(
        names: impl IntoIterator<Item = impl Into<String>>,
        label_name: impl Into<String>,
        label_values: LabelValues,
    ) -> Result<Self, DataError> {
        let schema = Self {
            features: names
                .into_iter()
                .map(|n| FeatureDef {
                    name: n.into(),
                    kind: FeatureKind::Numeric,
                })
                .collect(),
            label_name: label_name.into(),
            label_values,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let mut seen = HashSet::new();
        for f in &self.features {
            if f.name.trim().is_empty() {
                return Err(DataError::InvalidSchema("empty feature name".into()));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(DataError::InvalidSchema(format!(
                    "duplicate feature `{}`",
                    f.name
                )));
            }
        }
        if self.label_name.trim().is_empty() {
            return Err(DataError::InvalidSchema("empty label name".into()));
        }
        let lv = &self.label_values;
        if lv.violation.is_empty() || lv.regular.is_empty() || lv.violation == lv.regular {
            return Err(DataError::InvalidSchema(
                "label values must be two distinct non-empty tags".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn name(&self, index: usize) -> &str {
        &self.features[index].name
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    /// Check that `x` can be fed to a model bound to this schema.
    pub fn check(&self, x: &FeatureVector) -> Result<(), String> {
        if x.len() != self.len() {
            return Err(format!(
                "expected {} features, found {}",
                self.len(),
                x.len()
            ));
        }
        if let Some(j) = x.iter().position(|v| !v.is_finite()) {
            return Err(format!("feature `{}` is not finite", self.name(j)));
        }
        Ok(())
    }
}

/// One action's feature values in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }
}

impl Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub x: FeatureVector,
    pub y: u8,
}

impl LabeledInstance {
    pub fn new(x: impl Into<FeatureVector>, y: u8) -> Self {
        Self { x: x.into(), y }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: FeatureSchema,
    instances: Vec<LabeledInstance>,
}

/// Class counts of a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassStats {
    pub n_violation: usize,
    pub n_regular: usize,
    /// `n_violation / total`, `0.0` for an empty dataset.
    pub ratio: f64,
}

impl Dataset {
    /// Build a dataset, rejecting instances that do not conform to `schema`.
    pub fn new(schema: FeatureSchema, instances: Vec<LabeledInstance>) -> Result<Self, DataError> {
        schema.validate()?;
        for (index, inst) in instances.iter().enumerate() {
            schema
                .check(&inst.x)
                .map_err(|reason| DataError::SchemaViolation { index, reason })?;
            if inst.y > 1 {
                return Err(DataError::SchemaViolation {
                    index,
                    reason: format!("label {} is not 0 or 1", inst.y),
                });
            }
        }
        Ok(Self { schema, instances })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn instances(&self) -> &[LabeledInstance] {
        &self.instances
    }

    pub fn into_instances(self) -> Vec<LabeledInstance> {
        self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn class_stats(&self) -> ClassStats {
        class_stats(self)
    }

    pub fn has_both_classes(&self) -> bool {
        let s = self.class_stats();
        s.n_violation > 0 && s.n_regular > 0
    }

    /// New dataset holding the instances at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            instances: indices.iter().map(|&i| self.instances[i].clone()).collect(),
        }
    }
}

pub fn class_stats(ds: &Dataset) -> ClassStats {
    let n_violation = ds.instances.iter().filter(|i| i.y == VIOLATION).count();
    let n_regular = ds.len() - n_violation;
    let ratio = if ds.is_empty() {
        0.0
    } else {
        n_violation as f64 / ds.len() as f64
    };
    ClassStats {
        n_violation,
        n_regular,
        ratio,
    }
}

fn parse_number(cell: &str, line: usize, column: &str) -> Result<f64, DataError> {
    let cell = cell.trim();
    if cell == "?" {
        return Err(DataError::MissingValue {
            line,
            column: column.to_string(),
        });
    }
    let v: f64 = cell.parse().map_err(|_| DataError::NonNumericCell {
        line,
        column: column.to_string(),
        cell: cell.to_string(),
    })?;
    if !v.is_finite() {
        return Err(DataError::NonFiniteValue {
            line,
            column: column.to_string(),
        });
    }
    Ok(v)
}
