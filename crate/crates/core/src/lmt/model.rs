use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{sigmoid, LmtError, LogisticLeafModel, TrainParams};
use crate::data::{FeatureSchema, FeatureVector};

pub const MODEL_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split(SplitNode),
    Leaf(LogisticLeafModel),
}

/// Threshold test on one feature. `model` is the logistic model fitted at
/// this node before splitting; it becomes the leaf if the node is pruned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitNode {
    pub feature: usize,
    pub threshold: f64,
    pub model: LogisticLeafModel,
    pub left: Box<Node>,
    pub right: Box<Node>,
}

impl Node {
    pub fn n_leaves(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::Split(s) => s.left.n_leaves() + s.right.n_leaves(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::Split(s) => 1 + s.left.n_nodes() + s.right.n_nodes(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Split(s) => 1 + s.left.depth().max(s.right.depth()),
        }
    }

    /// The logistic model used if prediction stopped at this node.
    pub fn model(&self) -> &LogisticLeafModel {
        match self {
            Node::Leaf(m) => m,
            Node::Split(s) => &s.model,
        }
    }

    pub fn leaves(&self) -> Vec<&LogisticLeafModel> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a LogisticLeafModel>) {
        match self {
            Node::Leaf(m) => out.push(m),
            Node::Split(s) => {
                s.left.collect_leaves(out);
                s.right.collect_leaves(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub boost_iters: usize,
    pub seed: u64,
    pub params: TrainParams,
    pub n_instances: usize,
    pub pruned: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmtModel {
    pub schema: FeatureSchema,
    pub root: Node,
    pub training_meta: TrainingMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub feature: usize,
    pub threshold: f64,
    pub direction: Direction,
}

/// The route an input took from the root to its leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafTrace<'m> {
    pub path: Vec<PathStep>,
    pub leaf: &'m LogisticLeafModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<'m> {
    pub probability: f64,
    /// Log-odds at the reached leaf, before clamping.
    pub logit: f64,
    pub trace: LeafTrace<'m>,
}

impl LmtModel {
    pub fn n_leaves(&self) -> usize {
        self.root.n_leaves()
    }

    pub fn n_nodes(&self) -> usize {
        self.root.n_nodes()
    }

    pub fn predict<'m>(&'m self, x: &FeatureVector) -> Result<Prediction<'m>, LmtError> {
        predict_proba(self, x)
    }

    /// Descend to the leaf for `x` without schema checks.
    pub(crate) fn route<'m>(&'m self, x: &[f64]) -> LeafTrace<'m> {
        let mut path = Vec::new();
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf(leaf) => return LeafTrace { path, leaf },
                Node::Split(s) => {
                    let direction = if x[s.feature] < s.threshold {
                        Direction::Left
                    } else {
                        Direction::Right
                    };
                    path.push(PathStep {
                        feature: s.feature,
                        threshold: s.threshold,
                        direction,
                    });
                    node = match direction {
                        Direction::Left => &s.left,
                        Direction::Right => &s.right,
                    };
                }
            }
        }
    }
}

/// Probability of the violation class for `x` and the route taken: go left
/// while `x[feature] < threshold`, then apply the leaf's logistic model.
pub fn predict_proba<'m>(model: &'m LmtModel, x: &FeatureVector) -> Result<Prediction<'m>, LmtError> {
    model.schema.check(x).map_err(LmtError::SchemaMismatch)?;
    let trace = model.route(x);
    let logit = trace.leaf.logit(x);
    Ok(Prediction {
        probability: sigmoid(logit),
        logit,
        trace,
    })
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u64,
    schema: FeatureSchema,
    tree: Node,
    training_meta: TrainingMeta,
}

pub fn serialize_model(model: &LmtModel) -> String {
    let file = ModelFile {
        version: MODEL_FORMAT_VERSION,
        schema: model.schema.clone(),
        tree: model.root.clone(),
        training_meta: model.training_meta.clone(),
    };
    serde_json::to_string_pretty(&file).expect("model is serializable")
}

pub fn deserialize_model(text: &str) -> Result<LmtModel, LmtError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| LmtError::CorruptModel(e.to_string()))?;
    let version = value
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| LmtError::CorruptModel("missing `version`".into()))?;
    if version != MODEL_FORMAT_VERSION {
        return Err(LmtError::SchemaVersionMismatch {
            found: version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| LmtError::CorruptModel(e.to_string()))?;
    file.schema
        .validate()
        .map_err(|e| LmtError::CorruptModel(e.to_string()))?;
    let model = LmtModel {
        schema: file.schema,
        root: file.tree,
        training_meta: file.training_meta,
    };
    validate_tree(&model.root, model.schema.len(), &mut BTreeMap::new())?;
    Ok(model)
}

/// Check indices, finiteness and that every path is satisfiable: along a
/// path each feature's admissible region `[lo, hi)` must stay non-empty on
/// both sides of every threshold.
fn validate_tree(node: &Node, d: usize, bounds: &mut BTreeMap<usize, (f64, f64)>) -> Result<(), LmtError> {
    let check_model = |m: &LogisticLeafModel| {
        if !m.is_finite() {
            return Err(LmtError::CorruptModel("non-finite coefficient".into()));
        }
        if let Some((&j, _)) = m.coeffs.iter().find(|(&j, _)| j >= d) {
            return Err(LmtError::CorruptModel(format!("coefficient for unknown feature {j}")));
        }
        Ok(())
    };
    match node {
        Node::Leaf(m) => check_model(m),
        Node::Split(s) => {
            check_model(&s.model)?;
            if s.feature >= d || !s.threshold.is_finite() {
                return Err(LmtError::CorruptModel(format!(
                    "split on feature {} at {}",
                    s.feature, s.threshold
                )));
            }
            let (lo, hi) = bounds.get(&s.feature).copied().unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
            if !(lo < s.threshold && s.threshold < hi) {
                return Err(LmtError::CorruptModel(format!(
                    "unsatisfiable path: threshold {} outside [{lo}, {hi})",
                    s.threshold
                )));
            }
            bounds.insert(s.feature, (lo, s.threshold));
            validate_tree(&s.left, d, bounds)?;
            bounds.insert(s.feature, (s.threshold, hi));
            validate_tree(&s.right, d, bounds)?;
            bounds.insert(s.feature, (lo, hi));
            Ok(())
        }
    }
}
