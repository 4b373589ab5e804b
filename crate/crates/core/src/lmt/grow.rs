use super::boost::{boost_rounds, cv_iterations, Problem};
use super::model::{LmtModel, Node, SplitNode, TrainingMeta};
use super::split::select_split_rows;
use super::{LmtError, LogisticLeafModel, TrainParams};
use crate::data::Dataset;

/// Grow an unpruned logistic model tree.
///
/// The root model gets the cross-validated number of boosting rounds. Nodes
/// with at least `min_split` instances above `max_depth` are split on the
/// best entropy-gain threshold; each child continues boosting from its
/// parent's log-odds on its own instances for the same number of rounds.
pub fn grow_tree(ds: &Dataset, params: &TrainParams) -> Result<LmtModel, LmtError> {
    params.validate()?;
    if ds.len() < 2 {
        return Err(LmtError::EmptyInput(format!("need at least 2 instances, got {}", ds.len())));
    }
    let prob = Problem::new(ds.instances(), ds.n_features(), params.class_weight);
    let iters = root_iterations(&prob, params)?;
    let root = grow_with_iters(&prob, iters, params)?;
    Ok(LmtModel {
        schema: ds.schema().clone(),
        root,
        training_meta: TrainingMeta {
            boost_iters: iters,
            seed: params.seed,
            params: params.clone(),
            n_instances: ds.len(),
            pruned: false,
        },
    })
}

/// Cross-validated round count, or a single round when a class has fewer
/// than two instances and cross-validation is impossible.
pub(crate) fn root_iterations(prob: &Problem<'_>, params: &TrainParams) -> Result<usize, LmtError> {
    let (pos, neg) = prob.class_counts();
    if pos < 2 || neg < 2 {
        return Ok(1);
    }
    cv_iterations(prob, None, &LogisticLeafModel::default(), params)
}

pub(crate) fn grow_with_iters(prob: &Problem<'_>, iters: usize, params: &TrainParams) -> Result<Node, LmtError> {
    let (model, f) = boost_rounds(prob, None, LogisticLeafModel::default(), iters, params.z_max)?;
    build(prob, f, model, 0, iters, params)
}

fn build(
    prob: &Problem<'_>,
    f: Vec<f64>,
    model: LogisticLeafModel,
    depth: usize,
    iters: usize,
    params: &TrainParams,
) -> Result<Node, LmtError> {
    if prob.len() < params.min_split || depth >= params.max_depth {
        return Ok(Node::Leaf(model));
    }
    let features: Vec<usize> = (0..prob.d).collect();
    let Some(split) = select_split_rows(&prob.rows, &prob.y, &features) else {
        return Ok(Node::Leaf(model));
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
        (0..prob.len()).partition(|&i| prob.rows[i][split.feature] < split.threshold);

    let child = |idx: &[usize]| -> Result<Node, LmtError> {
        let sub = prob.subset(idx);
        let sub_f: Vec<f64> = idx.iter().map(|&i| f[i]).collect();
        let it = if params.retune_iters_per_node {
            cv_iterations(&sub, Some(&sub_f), &model, params).unwrap_or(iters)
        } else {
            iters
        };
        let (child_model, child_f) = if sub.len() >= 2 {
            match boost_rounds(&sub, Some(sub_f.clone()), model.clone(), it, params.z_max) {
                Ok(fit) => fit,
                // Already saturated by the parent: nothing left to fit.
                Err(LmtError::DegenerateWeights) => (model.clone(), sub_f),
                Err(e) => return Err(e),
            }
        } else {
            (model.clone(), sub_f)
        };
        build(&sub, child_f, child_model, depth + 1, it, params)
    };
    let (left, right) = rayon::join(|| child(&left_idx), || child(&right_idx));
    Ok(Node::Split(SplitNode {
        feature: split.feature,
        threshold: split.threshold,
        model,
        left: Box::new(left?),
        right: Box::new(right?),
    }))
}
