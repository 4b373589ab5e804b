//! LogitBoost with simple regression base learners.
//!
//! Each round computes Newton working responses on the logit scale,
//! `z = (y - p) / (p (1 - p))` clamped to `±z_max`, with weights `p (1 - p)`,
//! fits `a + b x_j` by weighted least squares for every feature `j` and adds
//! the best-fitting one to the model. A round whose full step would raise
//! the training log-loss is halved until it does not; if no step size helps
//! the fit has converged and boosting stops.

use rayon::prelude::*;

use super::{log_loss, sigmoid, LmtError, LogisticLeafModel, TrainParams, WEIGHT_FLOOR};
use crate::data::folds::stratified_kfold_labels;
use crate::data::{Dataset, LabeledInstance, VIOLATION};

const MAX_HALVINGS: usize = 30;

/// Training rows borrowed from a dataset together with labels and
/// per-instance class weights.
#[derive(Clone)]
pub(crate) struct Problem<'a> {
    pub rows: Vec<&'a [f64]>,
    pub y: Vec<u8>,
    pub weight: Vec<f64>,
    pub d: usize,
}

impl<'a> Problem<'a> {
    pub fn new(instances: &'a [LabeledInstance], d: usize, class_weight: f64) -> Self {
        Self {
            rows: instances.iter().map(|i| &i.x[..]).collect(),
            y: instances.iter().map(|i| i.y).collect(),
            weight: instances
                .iter()
                .map(|i| if i.y == VIOLATION { class_weight } else { 1.0 })
                .collect(),
            d,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn subset(&self, idx: &[usize]) -> Problem<'a> {
        Problem {
            rows: idx.iter().map(|&i| self.rows[i]).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            weight: idx.iter().map(|&i| self.weight[i]).collect(),
            d: self.d,
        }
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.y.iter().filter(|&&y| y == VIOLATION).count();
        (pos, self.len() - pos)
    }

    pub fn loss(&self, f: &[f64]) -> f64 {
        f.iter()
            .zip(&self.y)
            .zip(&self.weight)
            .map(|((&f, &y), &w)| w * log_loss(f, y))
            .sum()
    }
}

/// One fitted base learner, already scaled by its step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Term {
    pub intercept: f64,
    pub feature: Option<usize>,
    pub slope: f64,
}

impl Term {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.feature {
            Some(j) => self.intercept + self.slope * x[j],
            None => self.intercept,
        }
    }
}

pub(crate) struct Booster<'p, 'a> {
    prob: &'p Problem<'a>,
    f: Vec<f64>,
    model: LogisticLeafModel,
    z_max: f64,
    loss: f64,
    converged: bool,
}

impl<'p, 'a> Booster<'p, 'a> {
    pub fn new(prob: &'p Problem<'a>, init_f: Option<Vec<f64>>, base: LogisticLeafModel, z_max: f64) -> Self {
        let f = init_f.unwrap_or_else(|| vec![0.0; prob.len()]);
        debug_assert_eq!(f.len(), prob.len());
        let loss = prob.loss(&f);
        Self {
            prob,
            f,
            model: base,
            z_max,
            loss,
            converged: false,
        }
    }

    pub fn into_parts(self) -> (LogisticLeafModel, Vec<f64>) {
        (self.model, self.f)
    }

    #[cfg(test)]
    pub fn loss(&self) -> f64 {
        self.loss
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Run one boosting round. `Ok(None)` once no step lowers the loss.
    pub fn step(&mut self) -> Result<Option<Term>, LmtError> {
        if self.converged {
            return Ok(None);
        }
        let (term, clamped) = self.fit_base_learner(self.z_max)?;
        if let Some(step) = term.and_then(|t| self.line_search(t)) {
            return Ok(Some(step));
        }
        // The clamped fit can point uphill once many responses hit the
        // bound; the unclamped fit is a Newton step along one feature.
        if clamped {
            if let Some(step) = self.fit_base_learner(f64::INFINITY)?.0.and_then(|t| self.line_search(t)) {
                return Ok(Some(step));
            }
        }
        self.converged = true;
        Ok(None)
    }

    /// Apply the largest of `term`, `term / 2`, `term / 4`, ... that does not
    /// raise the loss.
    fn line_search(&mut self, term: Term) -> Option<Term> {
        let mut scale = 1.0;
        for _ in 0..MAX_HALVINGS {
            let candidate: Vec<f64> = self
                .f
                .iter()
                .zip(&self.prob.rows)
                .map(|(&f, x)| f + scale * term.eval(x))
                .collect();
            let loss = self.prob.loss(&candidate);
            if loss <= self.loss {
                let scaled = Term {
                    intercept: scale * term.intercept,
                    feature: term.feature,
                    slope: scale * term.slope,
                };
                self.model.add_term(scaled.intercept, scaled.feature, scaled.slope);
                self.f = candidate;
                self.loss = loss;
                return Some(scaled);
            }
            scale *= 0.5;
        }
        None
    }

    /// Weighted least-squares fit of the working response on each feature;
    /// returns the fit with the smallest weighted SSE (lowest index on ties)
    /// and whether any response was clamped.
    fn fit_base_learner(&self, z_max: f64) -> Result<(Option<Term>, bool), LmtError> {
        let n = self.prob.len();
        let d = self.prob.d;
        let mut w = Vec::with_capacity(n);
        let mut z = Vec::with_capacity(n);
        let mut informative = false;
        let mut clamped = false;
        for i in 0..n {
            let p = sigmoid(self.f[i]);
            let var = p * (1.0 - p);
            informative |= var >= WEIGHT_FLOOR;
            let var = var.max(WEIGHT_FLOOR);
            let target = if self.prob.y[i] == VIOLATION { 1.0 } else { 0.0 };
            let raw = (target - p) / var;
            clamped |= raw.abs() > z_max;
            z.push(raw.clamp(-z_max, z_max));
            w.push(self.prob.weight[i] * var);
        }
        if !informative {
            return Err(LmtError::DegenerateWeights);
        }

        let mut sw = 0.0;
        let mut swz = 0.0;
        let mut swx = vec![0.0; d];
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for (i, x) in self.prob.rows.iter().enumerate() {
            sw += w[i];
            swz += w[i] * z[i];
            for j in 0..d {
                swx[j] += w[i] * x[j];
                lo[j] = lo[j].min(x[j]);
                hi[j] = hi[j].max(x[j]);
            }
        }
        let z_mean = swz / sw;
        let x_mean: Vec<f64> = swx.iter().map(|s| s / sw).collect();

        let mut czz = 0.0;
        let mut cxx = vec![0.0; d];
        let mut cxz = vec![0.0; d];
        for (i, x) in self.prob.rows.iter().enumerate() {
            let dz = z[i] - z_mean;
            czz += w[i] * dz * dz;
            for j in 0..d {
                let dx = x[j] - x_mean[j];
                cxx[j] += w[i] * dx * dx;
                cxz[j] += w[i] * dx * dz;
            }
        }

        let mut best: Option<(f64, usize, f64)> = None;
        for j in 0..d {
            if lo[j] == hi[j] || cxx[j] <= 0.0 {
                continue;
            }
            let slope = cxz[j] / cxx[j];
            let sse = czz - slope * cxz[j];
            if best.is_none_or(|(b, _, _)| sse < b) {
                best = Some((sse, j, slope));
            }
        }
        let term = match best {
            Some((_, j, slope)) => Term {
                intercept: z_mean - slope * x_mean[j],
                feature: Some(j),
                slope,
            },
            None => Term {
                intercept: z_mean,
                feature: None,
                slope: 0.0,
            },
        };
        if term.intercept == 0.0 && term.slope == 0.0 {
            return Ok((None, clamped));
        }
        Ok((Some(term), clamped))
    }
}

/// Run up to `iters` rounds from `init_f`, accumulating into `base`.
/// Weights collapsing below the floor after at least one round ends the
/// fit early; collapse before the first round is an error.
pub(crate) fn boost_rounds(
    prob: &Problem<'_>,
    init_f: Option<Vec<f64>>,
    base: LogisticLeafModel,
    iters: usize,
    z_max: f64,
) -> Result<(LogisticLeafModel, Vec<f64>), LmtError> {
    let mut booster = Booster::new(prob, init_f, base, z_max);
    for round in 0..iters {
        match booster.step() {
            Ok(Some(_)) => {}
            Ok(None) => break,
            Err(LmtError::DegenerateWeights) if round > 0 => break,
            Err(e) => return Err(e),
        }
    }
    Ok(booster.into_parts())
}

/// Fit a linear logistic model to `instances` with `iters` LogitBoost
/// rounds, starting from per-instance log-odds `init_f` (zero if absent).
pub fn fit_logitboost(
    instances: &[LabeledInstance],
    init_f: Option<&[f64]>,
    iters: usize,
    z_max: f64,
) -> Result<LogisticLeafModel, LmtError> {
    if instances.len() < 2 {
        return Err(LmtError::EmptyInput(format!(
            "need at least 2 instances, got {}",
            instances.len()
        )));
    }
    let d = instances[0].x.len();
    if instances.iter().any(|i| i.x.len() != d) {
        return Err(LmtError::SchemaMismatch("instances differ in length".into()));
    }
    if let Some(f) = init_f {
        if f.len() != instances.len() {
            return Err(LmtError::SchemaMismatch(format!(
                "{} offsets for {} instances",
                f.len(),
                instances.len()
            )));
        }
    }
    if !(z_max > 0.0) {
        return Err(LmtError::InvalidParams("z_max must be positive".into()));
    }
    let prob = Problem::new(instances, d, 1.0);
    let (model, _) = boost_rounds(&prob, init_f.map(<[f64]>::to_vec), LogisticLeafModel::default(), iters, z_max)?;
    Ok(model)
}

/// Choose the number of boosting rounds by cross-validated
/// misclassification error at the root.
pub fn select_iters_by_cv(ds: &Dataset, params: &TrainParams) -> Result<usize, LmtError> {
    params.validate()?;
    let prob = Problem::new(ds.instances(), ds.n_features(), params.class_weight);
    let (pos, neg) = prob.class_counts();
    if pos == 0 || neg == 0 {
        return Err(LmtError::EmptyInput("iteration search needs both classes".into()));
    }
    cv_iterations(&prob, None, &LogisticLeafModel::default(), params)
}

struct FoldRun<'p, 'a> {
    booster: Booster<'p, 'a>,
    val: Problem<'a>,
    val_f: Vec<f64>,
}

impl FoldRun<'_, '_> {
    fn advance(&mut self) -> Result<usize, LmtError> {
        match self.booster.step() {
            Ok(Some(term)) => {
                for (f, x) in self.val_f.iter_mut().zip(&self.val.rows) {
                    *f += term.eval(x);
                }
            }
            Ok(None) | Err(LmtError::DegenerateWeights) => {}
            Err(e) => return Err(e),
        }
        Ok(self
            .val_f
            .iter()
            .zip(&self.val.y)
            .filter(|(&f, &y)| u8::from(f >= 0.0) != y)
            .count())
    }
}

/// Lock-step cross-validation over boosting rounds. Returns the round count
/// with the lowest pooled validation error (smallest on ties), in
/// `1..=max_boost_iters`. Needs at least two instances of each class; the
/// fold count is reduced to the minority class size when necessary.
pub(crate) fn cv_iterations(
    prob: &Problem<'_>,
    init_f: Option<&[f64]>,
    base: &LogisticLeafModel,
    params: &TrainParams,
) -> Result<usize, LmtError> {
    let (pos, neg) = prob.class_counts();
    let k = params.cv_folds_for_iters.min(pos).min(neg);
    if k < 2 {
        return Err(LmtError::EmptyInput(
            "iteration search needs two instances of each class".into(),
        ));
    }
    let folds = stratified_kfold_labels(&prob.y, k, params.seed)?;
    let parts: Vec<(Problem<'_>, Option<Vec<f64>>, Problem<'_>, Vec<f64>)> = (0..k)
        .map(|fold| {
            let train_idx = folds.train_indices(fold);
            let test_idx = folds.test_indices(fold);
            let pick = |idx: &[usize]| init_f.map(|f| idx.iter().map(|&i| f[i]).collect::<Vec<_>>());
            (
                prob.subset(&train_idx),
                pick(&train_idx),
                prob.subset(&test_idx),
                pick(&test_idx).unwrap_or_else(|| vec![0.0; test_idx.len()]),
            )
        })
        .collect();
    let mut runs: Vec<FoldRun<'_, '_>> = parts
        .iter()
        .map(|(train, train_f, val, val_f)| FoldRun {
            booster: Booster::new(train, train_f.clone(), base.clone(), params.z_max),
            val: val.clone(),
            val_f: val_f.clone(),
        })
        .collect();

    let mut best = (usize::MAX, 1);
    for iter in 1..=params.max_boost_iters {
        let errors: Vec<usize> = runs
            .par_iter_mut()
            .map(FoldRun::advance)
            .collect::<Result<_, _>>()?;
        let total: usize = errors.iter().sum();
        if total < best.0 {
            best = (total, iter);
        }
        if iter - best.1 >= params.heuristic_stop || runs.iter().all(|r| r.booster.converged()) {
            break;
        }
    }
    Ok(best.1)
}
