//! Cost-complexity pruning.
//!
//! Every internal node keeps the logistic model it had before splitting, so
//! collapsing a subtree just turns that node back into a leaf. The nested
//! subtree sequence is found by weakest-link pruning on training
//! misclassifications; the subtree is then chosen by cross-validation with
//! the one-standard-error rule.

use rayon::prelude::*;

use super::boost::Problem;
use super::grow::grow_with_iters;
use super::model::{LmtModel, Node, SplitNode};
use super::{LmtError, LogisticLeafModel, TrainParams};
use crate::data::folds::stratified_kfold_labels;
use crate::data::Dataset;

/// Slack when comparing costs built from integer error counts.
const COST_EPS: f64 = 1e-9;

struct FlatNode<'m> {
    model: &'m LogisticLeafModel,
    split: Option<(usize, f64, usize, usize)>,
}

/// Pre-order arena view of a tree.
struct Flat<'m> {
    nodes: Vec<FlatNode<'m>>,
}

impl<'m> Flat<'m> {
    fn new(root: &'m Node) -> Self {
        let mut flat = Flat { nodes: Vec::new() };
        flat.push(root);
        flat
    }

    fn push(&mut self, node: &'m Node) -> usize {
        let id = self.nodes.len();
        match node {
            Node::Leaf(m) => self.nodes.push(FlatNode { model: m, split: None }),
            Node::Split(s) => {
                self.nodes.push(FlatNode {
                    model: &s.model,
                    split: None,
                });
                let l = self.push(&s.left);
                let r = self.push(&s.right);
                self.nodes[id].split = Some((s.feature, s.threshold, l, r));
            }
        }
        id
    }

    /// Misclassifications of each node's own model on the instances that
    /// reach it.
    fn node_errors(&self, rows: &[&[f64]], y: &[u8]) -> Vec<f64> {
        let mut errors = vec![0.0; self.nodes.len()];
        for (x, &label) in rows.iter().zip(y) {
            let mut id = 0;
            loop {
                let node = &self.nodes[id];
                if u8::from(node.model.logit(x) >= 0.0) != label {
                    errors[id] += 1.0;
                }
                match node.split {
                    Some((j, t, l, r)) => id = if x[j] < t { l } else { r },
                    None => break,
                }
            }
        }
        errors
    }

    /// Smallest subtree minimising `errors + alpha * leaves`; `true` marks
    /// nodes that become leaves.
    fn prune_at(&self, errors: &[f64], alpha: f64) -> Vec<bool> {
        let mut collapsed = vec![false; self.nodes.len()];
        self.cost(0, errors, alpha, &mut collapsed);
        collapsed
    }

    fn cost(&self, id: usize, errors: &[f64], alpha: f64, collapsed: &mut [bool]) -> f64 {
        let as_leaf = errors[id] + alpha;
        match self.nodes[id].split {
            None => as_leaf,
            Some((_, _, l, r)) => {
                let keep = self.cost(l, errors, alpha, collapsed) + self.cost(r, errors, alpha, collapsed);
                if as_leaf <= keep + COST_EPS {
                    collapsed[id] = true;
                    as_leaf
                } else {
                    keep
                }
            }
        }
    }

    /// (leaf error sum, leaf count) of the active subtree under `id`.
    fn subtree_stats(&self, id: usize, errors: &[f64], collapsed: &[bool]) -> (f64, usize) {
        match self.nodes[id].split {
            Some((_, _, l, r)) if !collapsed[id] => {
                let (el, nl) = self.subtree_stats(l, errors, collapsed);
                let (er, nr) = self.subtree_stats(r, errors, collapsed);
                (el + er, nl + nr)
            }
            _ => (errors[id], 1),
        }
    }

    fn is_active_internal(&self, id: usize, collapsed: &[bool]) -> bool {
        self.nodes[id].split.is_some() && !collapsed[id] && self.ancestors_open(id, collapsed)
    }

    fn ancestors_open(&self, target: usize, collapsed: &[bool]) -> bool {
        let mut id = 0;
        while id != target {
            if collapsed[id] {
                return false;
            }
            match self.nodes[id].split {
                // Pre-order layout: the right subtree starts at `r`.
                Some((_, _, l, r)) => id = if target < r { l } else { r },
                None => return false,
            }
        }
        true
    }

    /// Breakpoints `0 = a_0 < a_1 < ...` of the weakest-link sequence; the
    /// last one collapses the root.
    fn alpha_sequence(&self, errors: &[f64]) -> Vec<f64> {
        let mut alphas = vec![0.0];
        let mut collapsed = self.prune_at(errors, 0.0);
        while !collapsed[0] {
            let weakest = (0..self.nodes.len())
                .filter(|&id| self.is_active_internal(id, &collapsed))
                .map(|id| {
                    let (sub_err, leaves) = self.subtree_stats(id, errors, &collapsed);
                    (errors[id] - sub_err) / (leaves - 1) as f64
                })
                .fold(f64::INFINITY, f64::min);
            let alpha = weakest.max(*alphas.last().expect("non-empty"));
            alphas.push(alpha);
            collapsed = self.prune_at(errors, alpha);
        }
        alphas
    }

    fn rebuild(&self, node: &Node, collapsed: &[bool]) -> Node {
        let mut next = 0;
        self.rebuild_from(node, collapsed, &mut next)
    }

    fn rebuild_from(&self, node: &Node, collapsed: &[bool], next: &mut usize) -> Node {
        let id = *next;
        *next += 1;
        match node {
            Node::Leaf(m) => Node::Leaf(m.clone()),
            Node::Split(s) => {
                if collapsed[id] {
                    *next += s.left.n_nodes() + s.right.n_nodes();
                    return Node::Leaf(s.model.clone());
                }
                let left = self.rebuild_from(&s.left, collapsed, next);
                let right = self.rebuild_from(&s.right, collapsed, next);
                Node::Split(SplitNode {
                    feature: s.feature,
                    threshold: s.threshold,
                    model: s.model.clone(),
                    left: Box::new(left),
                    right: Box::new(right),
                })
            }
        }
    }

    fn count_errors(&self, collapsed: &[bool], rows: &[&[f64]], y: &[u8]) -> usize {
        rows.iter()
            .zip(y)
            .filter(|(x, &label)| {
                let mut id = 0;
                loop {
                    let node = &self.nodes[id];
                    match node.split {
                        Some((j, t, l, r)) if !collapsed[id] => id = if x[j] < t { l } else { r },
                        _ => return u8::from(node.model.logit(x) >= 0.0) != label,
                    }
                }
            })
            .count()
    }
}

/// Prune `model` by cost-complexity with the one-standard-error rule. `ds`
/// must be the training data; cross-validation regrows trees on its folds
/// with the model's boosting round count.
pub fn prune_tree(model: &LmtModel, ds: &Dataset, params: &TrainParams) -> Result<LmtModel, LmtError> {
    params.validate()?;
    if ds.schema() != &model.schema {
        return Err(LmtError::SchemaMismatch("dataset schema differs from the model's".into()));
    }
    let mut pruned = model.clone();
    pruned.training_meta.pruned = true;
    if matches!(model.root, Node::Leaf(_)) {
        return Ok(pruned);
    }

    let prob = Problem::new(ds.instances(), ds.n_features(), params.class_weight);
    let flat = Flat::new(&model.root);
    let errors = flat.node_errors(&prob.rows, &prob.y);
    let alphas = flat.alpha_sequence(&errors);

    let (pos, neg) = prob.class_counts();
    let k = params.prune_folds.min(pos).min(neg);
    let chosen = if alphas.len() > 1 && k >= 2 {
        let cv_errors = cv_errors_per_alpha(&prob, &alphas, k, model.training_meta.boost_iters, params)?;
        one_se_choice(&cv_errors, prob.len())
    } else {
        0
    };
    let collapsed = flat.prune_at(&errors, alphas[chosen]);
    pruned.root = flat.rebuild(&model.root, &collapsed);
    Ok(pruned)
}

/// Pooled validation errors of fold-grown trees pruned at the geometric
/// midpoints of consecutive breakpoints.
fn cv_errors_per_alpha(
    prob: &Problem<'_>,
    alphas: &[f64],
    k: usize,
    iters: usize,
    params: &TrainParams,
) -> Result<Vec<usize>, LmtError> {
    let probes: Vec<f64> = (0..alphas.len())
        .map(|i| match alphas.get(i + 1) {
            Some(next) => (alphas[i] * next).sqrt(),
            None => f64::INFINITY,
        })
        .collect();
    let folds = stratified_kfold_labels(&prob.y, k, params.seed)?;
    let per_fold: Vec<Vec<usize>> = (0..k)
        .into_par_iter()
        .map(|fold| {
            let train = prob.subset(&folds.train_indices(fold));
            let test = prob.subset(&folds.test_indices(fold));
            let root = grow_with_iters(&train, iters, params)?;
            let flat = Flat::new(&root);
            let errors = flat.node_errors(&train.rows, &train.y);
            Ok(probes
                .iter()
                .map(|&beta| flat.count_errors(&flat.prune_at(&errors, beta), &test.rows, &test.y))
                .collect())
        })
        .collect::<Result<_, LmtError>>()?;
    Ok((0..probes.len()).map(|i| per_fold.iter().map(|f| f[i]).sum()).collect())
}

/// Index of the most-pruned subtree whose error rate is within one standard
/// error of the minimum.
fn one_se_choice(errors: &[usize], n: usize) -> usize {
    let rate = |e: usize| e as f64 / n as f64;
    let best = (0..errors.len()).min_by_key(|&i| errors[i]).expect("non-empty");
    let r = rate(errors[best]);
    let limit = r + (r * (1.0 - r) / n as f64).sqrt();
    (0..errors.len())
        .rev()
        .find(|&i| rate(errors[i]) <= limit + COST_EPS)
        .unwrap_or(best)
}
