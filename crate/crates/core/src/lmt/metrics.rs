use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{predict_proba, LmtError, LmtModel};
use crate::data::{Dataset, FeatureVector, FoldAssignment, VIOLATION};

/// Anything that scores the violation probability of a feature vector.
pub trait ProbabilisticClassifier: Send + Sync {
    fn probability(&self, x: &FeatureVector) -> Result<f64, LmtError>;
}

impl ProbabilisticClassifier for LmtModel {
    fn probability(&self, x: &FeatureVector) -> Result<f64, LmtError> {
        Ok(predict_proba(self, x)?.probability)
    }
}

/// Binary confusion counts with violation as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_violation: usize,
    pub false_violation: usize,
    pub true_regular: usize,
    pub false_regular: usize,
}

impl ConfusionMatrix {
    pub fn record(&mut self, actual: u8, predicted: u8) {
        match (actual == VIOLATION, predicted == VIOLATION) {
            (true, true) => self.true_violation += 1,
            (false, true) => self.false_violation += 1,
            (false, false) => self.true_regular += 1,
            (true, false) => self.false_regular += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.true_violation + self.false_violation + self.true_regular + self.false_regular
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        self.true_violation += other.true_violation;
        self.false_violation += other.false_violation;
        self.true_regular += other.true_regular;
        self.false_regular += other.false_regular;
    }
}

/// Accuracy and per-class precision/recall, derived from a confusion matrix.
/// A ratio with an empty denominator is reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub violation_precision: f64,
    pub violation_recall: f64,
    pub regular_precision: f64,
    pub regular_recall: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_confusion(c: ConfusionMatrix) -> Self {
        Self {
            confusion: c,
            accuracy: ratio(c.true_violation + c.true_regular, c.total()),
            violation_precision: ratio(c.true_violation, c.true_violation + c.false_violation),
            violation_recall: ratio(c.true_violation, c.true_violation + c.false_regular),
            regular_precision: ratio(c.true_regular, c.true_regular + c.false_regular),
            regular_recall: ratio(c.true_regular, c.true_regular + c.false_violation),
        }
    }

    /// Score `model` on `ds` with decision `p >= threshold` ⇒ violation.
    pub fn score<M: ProbabilisticClassifier + ?Sized>(
        model: &M,
        ds: &Dataset,
        threshold: f64,
    ) -> Result<Self, LmtError> {
        let mut c = ConfusionMatrix::default();
        for inst in ds.instances() {
            let p = model.probability(&inst.x)?;
            c.record(inst.y, u8::from(p >= threshold));
        }
        Ok(Self::from_confusion(c))
    }
}

/// Cross-validation result: the pooled confusion over all held-out folds
/// plus each fold's own metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvMetrics {
    pub pooled: Metrics,
    pub folds: Vec<Metrics>,
}

impl CvMetrics {
    /// Unweighted mean of the per-fold metrics (confusion summed).
    pub fn fold_average(&self) -> Metrics {
        let n = self.folds.len().max(1) as f64;
        let mean = |f: fn(&Metrics) -> f64| self.folds.iter().map(f).sum::<f64>() / n;
        Metrics {
            confusion: self.pooled.confusion,
            accuracy: mean(|m| m.accuracy),
            violation_precision: mean(|m| m.violation_precision),
            violation_recall: mean(|m| m.violation_recall),
            regular_precision: mean(|m| m.regular_precision),
            regular_recall: mean(|m| m.regular_recall),
        }
    }
}

/// Train on each fold's complement with `factory`, score the held-out fold
/// and pool the confusion matrices. Folds may train in parallel; results
/// are combined in fold order.
pub fn evaluate<M, F>(factory: F, ds: &Dataset, folds: &FoldAssignment, threshold: f64) -> Result<CvMetrics, LmtError>
where
    M: ProbabilisticClassifier,
    F: Fn(&Dataset) -> Result<M, LmtError> + Sync,
{
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(LmtError::InvalidParams(format!("threshold {threshold} not in (0, 1)")));
    }
    if folds.fold_of().len() != ds.len() {
        return Err(LmtError::InvalidParams("fold assignment does not match dataset".into()));
    }
    let folds_metrics: Vec<Metrics> = (0..folds.k())
        .into_par_iter()
        .map(|fold| {
            let train = ds.subset(&folds.train_indices(fold));
            let test = ds.subset(&folds.test_indices(fold));
            let model = factory(&train)?;
            Metrics::score(&model, &test, threshold)
        })
        .collect::<Result<_, _>>()?;
    let mut pooled = ConfusionMatrix::default();
    for m in &folds_metrics {
        pooled.merge(&m.confusion);
    }
    Ok(CvMetrics {
        pooled: Metrics::from_confusion(pooled),
        folds: folds_metrics,
    })
}
