use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, FeatureSchema, LabelValues, LabeledInstance};
use crate::lmt::sigmoid;

/// Parameters of a synthetic logistic dataset: features uniform on `[0, 1]`,
/// labels Bernoulli with log-odds `intercept + true_coeffs · x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub d: usize,
    pub true_coeffs: Vec<f64>,
    pub intercept: f64,
    /// Expected positive rate the coefficients were tuned for. Informational;
    /// the labels are drawn from the logistic model alone.
    pub positive_rate: f64,
}

pub fn synth_generate(cfg: &SynthConfig, seed: u64) -> Result<Dataset, DataError> {
    if cfg.d != cfg.true_coeffs.len() {
        return Err(DataError::BadConfig(format!(
            "d = {} but {} coefficients given",
            cfg.d,
            cfg.true_coeffs.len()
        )));
    }
    if cfg.n < 10 {
        return Err(DataError::BadConfig(format!("n = {} is below 10", cfg.n)));
    }
    if !cfg.intercept.is_finite() || cfg.true_coeffs.iter().any(|c| !c.is_finite()) {
        return Err(DataError::BadConfig("coefficients must be finite".into()));
    }
    if !(0.0..=1.0).contains(&cfg.positive_rate) {
        return Err(DataError::BadConfig("positive_rate must lie in [0, 1]".into()));
    }
    let schema = FeatureSchema::new(
        (0..cfg.d).map(|j| format!("x{j}")),
        "class",
        LabelValues::new("violation", "regular"),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances = (0..cfg.n)
        .map(|_| {
            let x: Vec<f64> = (0..cfg.d).map(|_| rng.gen::<f64>()).collect();
            let logit = cfg.intercept + x.iter().zip(&cfg.true_coeffs).map(|(a, b)| a * b).sum::<f64>();
            let y = u8::from(rng.gen::<f64>() < sigmoid(logit));
            LabeledInstance::new(x, y)
        })
        .collect();
    Dataset::new(schema, instances)
}
