//! Logistic model trees.
//!
//! A binary tree of numeric threshold splits whose leaves each hold a linear
//! logistic model. The leaf model is fitted by LogitBoost with single-feature
//! least-squares base learners, so it always aggregates into one intercept
//! plus one coefficient per feature:
//!
//! ```text
//! ln(p / (1 - p)) = b0 + sum_j b_j * x_j,      p = e^F / (1 + e^F)
//! ```
//!
//! Children are warm-started from their parent's fitted log-odds, so the
//! model stored at a leaf reproduces the prediction on its own.

mod boost;
mod grow;
mod leaf;
mod metrics;
mod model;
mod prune;
mod split;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;

pub use boost::{fit_logitboost, select_iters_by_cv};
pub use grow::grow_tree;
pub use leaf::LogisticLeafModel;
pub use metrics::{evaluate, ConfusionMatrix, CvMetrics, Metrics, ProbabilisticClassifier};
pub use model::{
    deserialize_model, predict_proba, serialize_model, Direction, LeafTrace, LmtModel, Node, PathStep,
    Prediction, SplitNode, TrainingMeta, MODEL_FORMAT_VERSION,
};
pub use prune::prune_tree;
pub use split::{select_split, Split};

/// Lower bound on LogitBoost instance weights `p(1 - p)`.
pub const WEIGHT_FLOOR: f64 = 1e-10;
/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-12;
/// Default decision threshold: `p >= 0.5` is a violation.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum LmtError {
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("all instance weights fell below the floor")]
    DegenerateWeights,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("corrupt model: {0}")]
    CorruptModel(String),
    #[error("model format version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: u64, expected: u64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Logistic function, evaluated without overflow and clamped away from 0
/// and 1.
pub fn sigmoid(f: f64) -> f64 {
    sigmoid_unclamped(f).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

pub(crate) fn sigmoid_unclamped(f: f64) -> f64 {
    if f >= 0.0 {
        1.0 / (1.0 + (-f).exp())
    } else {
        let e = f.exp();
        e / (1.0 + e)
    }
}

/// `ln(p / (1 - p))`.
pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

/// Grow a tree on `ds` and, when `params.prune` is set, prune it.
pub fn train(ds: &crate::data::Dataset, params: &TrainParams) -> Result<LmtModel, LmtError> {
    let grown = grow_tree(ds, params)?;
    if params.prune {
        prune_tree(&grown, ds, params)
    } else {
        Ok(grown)
    }
}

/// Negative log-likelihood of one label under log-odds `f`.
pub(crate) fn log_loss(f: f64, y: u8) -> f64 {
    // ln(1 + e^f) - y f
    let softplus = f.max(0.0) + (-f.abs()).exp().ln_1p();
    softplus - if y == 1 { f } else { 0.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    /// Upper bound on LogitBoost rounds considered by the cross-validated
    /// iteration search.
    pub max_boost_iters: usize,
    pub cv_folds_for_iters: usize,
    /// Stop the iteration search once this many rounds pass without a new
    /// best cross-validated error.
    pub heuristic_stop: usize,
    /// Nodes smaller than this are not split.
    pub min_split: usize,
    pub max_depth: usize,
    pub z_max: f64,
    pub prune: bool,
    pub prune_folds: usize,
    /// Weight applied to violation instances; 1.0 trains on the data as-is.
    pub class_weight: f64,
    /// Re-run the iteration search at every node instead of reusing the
    /// root's count.
    pub retune_iters_per_node: bool,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            max_boost_iters: 200,
            cv_folds_for_iters: 5,
            heuristic_stop: 50,
            min_split: 15,
            max_depth: 10,
            z_max: 3.0,
            prune: true,
            prune_folds: 5,
            class_weight: 1.0,
            retune_iters_per_node: false,
            seed: 0,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<(), LmtError> {
        let bad = |m: &str| Err(LmtError::InvalidParams(m.to_string()));
        if self.max_boost_iters == 0 {
            return bad("max_boost_iters must be positive");
        }
        if self.cv_folds_for_iters < 2 || self.prune_folds < 2 {
            return bad("fold counts must be at least 2");
        }
        if self.heuristic_stop == 0 || self.min_split == 0 || self.max_depth == 0 {
            return bad("heuristic_stop, min_split and max_depth must be positive");
        }
        if !(self.z_max > 0.0 && self.z_max.is_finite()) {
            return bad("z_max must be positive and finite");
        }
        if !(self.class_weight > 0.0 && self.class_weight.is_finite()) {
            return bad("class_weight must be positive and finite");
        }
        Ok(())
    }
}
