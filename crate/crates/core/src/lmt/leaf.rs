use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::sigmoid;

/// Linear logistic model: `F(x) = intercept + sum_j coeffs[j] * x_j`.
/// A feature absent from `coeffs` has coefficient zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LogisticLeafModel {
    pub intercept: f64,
    pub coeffs: BTreeMap<usize, f64>,
}

impl LogisticLeafModel {
    pub fn new(intercept: f64, coeffs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        Self {
            intercept,
            coeffs: coeffs.into_iter().collect(),
        }
    }

    /// Log-odds of the violation class.
    pub fn logit(&self, x: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .fold(self.intercept, |acc, (&j, &b)| acc + b * x[j])
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    pub fn coeff(&self, feature: usize) -> f64 {
        self.coeffs.get(&feature).copied().unwrap_or(0.0)
    }

    pub(crate) fn add_term(&mut self, intercept: f64, feature: Option<usize>, slope: f64) {
        self.intercept += intercept;
        if let Some(j) = feature {
            if slope != 0.0 {
                *self.coeffs.entry(j).or_insert(0.0) += slope;
            }
        }
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.intercept.is_finite() && self.coeffs.values().all(|c| c.is_finite())
    }
}
