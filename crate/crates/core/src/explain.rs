//! Explanations for detected violations.
//!
//! The leaf that scored an input yields one contribution per feature with a
//! nonzero coefficient (`coeff * value`). The positive contributions are
//! split by 2-means; the higher group is reported as the relevant features
//! together with the part of the taxonomy that covers them.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{split_two_groups, ClusterConfig};
use crate::data::{Dataset, FeatureSchema, FeatureVector};
use crate::lmt::{predict_proba, Direction, LmtError, LmtModel, LogisticLeafModel, DEFAULT_THRESHOLD};
use crate::taxonomy::{Taxonomy, TaxonomyError};

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error(transparent)]
    Model(#[from] LmtError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error("probability {probability} is below the violation threshold {threshold}")]
    NotAViolation { probability: f64, threshold: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub feature: String,
    pub coeff: f64,
    pub value: f64,
    /// `coeff * value`.
    pub product: f64,
}

/// One contribution per feature with a nonzero leaf coefficient, in schema
/// order.
pub fn contributions(
    leaf: &LogisticLeafModel,
    x: &FeatureVector,
    schema: &FeatureSchema,
) -> Result<Vec<Contribution>, LmtError> {
    schema.check(x).map_err(LmtError::SchemaMismatch)?;
    leaf.coeffs
        .iter()
        .filter(|(_, &c)| c != 0.0)
        .map(|(&j, &coeff)| {
            if j >= schema.len() {
                return Err(LmtError::SchemaMismatch(format!("coefficient for unknown feature {j}")));
            }
            Ok(Contribution {
                feature: schema.name(j).to_string(),
                coeff,
                value: x[j],
                product: coeff * x[j],
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFlag {
    /// No contribution was positive; nothing is marked relevant.
    NoPositiveContributions,
    /// Exactly one positive contribution; it is relevant without clustering.
    SinglePositiveContribution,
    /// All positive contributions were equal; all are relevant.
    EqualContributions,
}

/// Positive contributions split into the relevant group and the rest, both
/// in descending product order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relevance {
    pub relevant: Vec<Contribution>,
    pub rest: Vec<Contribution>,
    pub flag: Option<ReportFlag>,
}

fn by_product_desc(v: &mut [Contribution]) {
    v.sort_by(|a, b| b.product.total_cmp(&a.product).then_with(|| a.feature.cmp(&b.feature)));
}

pub fn relevant_features(contribs: &[Contribution], cfg: &ClusterConfig) -> Relevance {
    let mut positive: Vec<Contribution> = contribs.iter().filter(|c| c.product > 0.0).cloned().collect();
    by_product_desc(&mut positive);
    match positive.len() {
        0 => Relevance {
            relevant: Vec::new(),
            rest: Vec::new(),
            flag: Some(ReportFlag::NoPositiveContributions),
        },
        1 => Relevance {
            relevant: positive,
            rest: Vec::new(),
            flag: Some(ReportFlag::SinglePositiveContribution),
        },
        _ => {
            let values: Vec<(usize, f64)> = positive.iter().map(|c| c.product).enumerate().collect();
            let groups = split_two_groups(&values, cfg).expect("at least two finite products");
            let pick = |ids: &[usize]| {
                let mut out: Vec<Contribution> = ids.iter().map(|&i| positive[i].clone()).collect();
                by_product_desc(&mut out);
                out
            };
            Relevance {
                relevant: pick(&groups.high),
                rest: pick(&groups.low),
                flag: groups.degenerate.then_some(ReportFlag::EqualContributions),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainedStep {
    pub feature: String,
    pub threshold: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub probability: f64,
    pub logit: f64,
    pub intercept: f64,
    /// Splits taken from the root to the scoring leaf.
    pub path: Vec<ExplainedStep>,
    /// Every nonzero-coefficient contribution, in schema order.
    pub contributions: Vec<Contribution>,
    pub relevant: Vec<Contribution>,
    pub other_positive: Vec<Contribution>,
    /// Contributions that lowered the probability.
    pub negative: Vec<Contribution>,
    pub taxonomy_fragment: Taxonomy,
    pub descriptions: BTreeMap<String, String>,
    pub flags: Vec<ReportFlag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    pub cluster: ClusterConfig,
    pub threshold: f64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            cluster: ClusterConfig::default(),
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// Explain a violation. Fails with `NotAViolation` if `x` scores below the
/// threshold.
pub fn build_report(
    model: &LmtModel,
    x: &FeatureVector,
    taxonomy: &Taxonomy,
    cfg: &ExplainConfig,
) -> Result<ExplanationReport, ExplainError> {
    let pred = predict_proba(model, x)?;
    if pred.probability < cfg.threshold {
        return Err(ExplainError::NotAViolation {
            probability: pred.probability,
            threshold: cfg.threshold,
        });
    }
    let contribs = contributions(pred.trace.leaf, x, &model.schema)?;
    let rel = relevant_features(&contribs, &cfg.cluster);
    let fragment = taxonomy.subtree(rel.relevant.iter().map(|c| c.feature.as_str()))?;
    let all_descriptions = taxonomy.descriptions();
    let descriptions = rel
        .relevant
        .iter()
        .filter_map(|c| all_descriptions.get(&c.feature).map(|d| (c.feature.clone(), d.clone())))
        .collect();
    let mut negative: Vec<Contribution> = contribs.iter().filter(|c| c.product < 0.0).cloned().collect();
    negative.sort_by(|a, b| a.product.total_cmp(&b.product).then_with(|| a.feature.cmp(&b.feature)));
    let path = pred
        .trace
        .path
        .iter()
        .map(|s| ExplainedStep {
            feature: model.schema.name(s.feature).to_string(),
            threshold: s.threshold,
            direction: s.direction,
        })
        .collect();
    Ok(ExplanationReport {
        probability: pred.probability,
        logit: pred.logit,
        intercept: pred.trace.leaf.intercept,
        path,
        contributions: contribs,
        relevant: rel.relevant,
        other_positive: rel.rest,
        negative,
        taxonomy_fragment: fragment,
        descriptions,
        flags: rel.flag.into_iter().collect(),
    })
}

impl ExplanationReport {
    /// Plain-text rendering for terminals and logs.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "violation probability: {:.4}", self.probability);
        let _ = writeln!(out, "most relevant features:");
        for c in &self.relevant {
            let desc = self.descriptions.get(&c.feature).map_or("", String::as_str);
            let _ = writeln!(out, "  * {:<28} {:>12.8}  {}", c.feature, c.product, desc);
        }
        for c in &self.other_positive {
            let _ = writeln!(out, "    {:<28} {:>12.8}", c.feature, c.product);
        }
        if !self.negative.is_empty() {
            let _ = writeln!(out, "lowering the probability:");
            for c in &self.negative {
                let _ = writeln!(out, "    {:<28} {:>12.8}", c.feature, c.product);
            }
        }
        for f in &self.flags {
            let _ = writeln!(out, "note: {}", serde_json::to_string(f).unwrap_or_default().trim_matches('"'));
        }
        let _ = writeln!(out, "taxonomy:");
        for line in self.taxonomy_fragment.render_text().lines() {
            let _ = writeln!(out, "  {line}");
        }
        out
    }
}

/// For every instance scored as a violation, count each relevant feature.
/// Every schema feature appears in the result, including those never
/// relevant.
pub fn relevance_histogram(
    model: &LmtModel,
    ds: &Dataset,
    threshold: f64,
    cfg: &ClusterConfig,
) -> Result<BTreeMap<String, usize>, LmtError> {
    if ds.schema() != &model.schema {
        return Err(LmtError::SchemaMismatch("dataset schema differs from the model's".into()));
    }
    let per_instance: Vec<Vec<String>> = ds
        .instances()
        .par_iter()
        .map(|inst| {
            let pred = predict_proba(model, &inst.x)?;
            if pred.probability < threshold {
                return Ok(Vec::new());
            }
            let contribs = contributions(pred.trace.leaf, &inst.x, &model.schema)?;
            Ok(relevant_features(&contribs, cfg)
                .relevant
                .into_iter()
                .map(|c| c.feature)
                .collect())
        })
        .collect::<Result<_, LmtError>>()?;
    let mut counts: BTreeMap<String, usize> = model.schema.names().map(|n| (n.to_string(), 0)).collect();
    for f in per_instance.into_iter().flatten() {
        *counts.entry(f).or_insert(0) += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{LabelValues, LabeledInstance};
    use crate::lmt::{Node, TrainParams, TrainingMeta};
    use crate::taxonomy::load_taxonomy;
    use crate::wikipedia;

    fn single_leaf(schema: FeatureSchema, leaf: LogisticLeafModel) -> LmtModel {
        LmtModel {
            schema,
            root: Node::Leaf(leaf),
            training_meta: TrainingMeta {
                boost_iters: 1,
                seed: 0,
                params: TrainParams::default(),
                n_instances: 0,
                pruned: false,
            },
        }
    }

    fn c(feature: &str, product: f64) -> Contribution {
        Contribution {
            feature: feature.into(),
            coeff: product,
            value: 1.0,
            product,
        }
    }

    #[test]
    fn contribution_products() {
        let schema = wikipedia::schema();
        let j = schema.index_of("WT_NO_DELAY").unwrap();
        let leaf = LogisticLeafModel::new(0.3, [(j, 1.48)]);
        let mut x = FeatureVector::zeros(schema.len());
        x.0[j] = 0.731452;
        let cs = contributions(&leaf, &x, &schema).unwrap();
        assert_eq!(cs.len(), 1);
        assert!((cs[0].product - 1.08254896).abs() < 1e-12);

        let zero = contributions(&leaf, &FeatureVector::zeros(schema.len()), &schema).unwrap();
        assert_eq!(zero[0].product, 0.0);
        assert!(contributions(&leaf, &FeatureVector::zeros(3), &schema).is_err());
    }

    #[test]
    fn relevance_edge_cases() {
        let cfg = ClusterConfig::default();
        let none = relevant_features(&[c("a", -1.0), c("b", -0.5)], &cfg);
        assert!(none.relevant.is_empty() && none.rest.is_empty());
        assert_eq!(none.flag, Some(ReportFlag::NoPositiveContributions));

        let one = relevant_features(&[c("a", -1.0), c("b", 0.5)], &cfg);
        assert_eq!(one.relevant, vec![c("b", 0.5)]);
        assert_eq!(one.flag, Some(ReportFlag::SinglePositiveContribution));

        let eq = relevant_features(&[c("a", 0.5), c("b", 0.5)], &cfg);
        assert_eq!(eq.relevant.len(), 2);
        assert_eq!(eq.flag, Some(ReportFlag::EqualContributions));
    }

    #[test]
    fn worked_example_report() {
        let (leaf, x) = wikipedia::example_leaf_and_input();
        let model = single_leaf(wikipedia::schema(), leaf);
        let tax = wikipedia::taxonomy();
        let r = build_report(&model, &x, &tax, &ExplainConfig::default()).unwrap();
        let rel: Vec<&str> = r.relevant.iter().map(|c| c.feature.as_str()).collect();
        assert_eq!(rel, wikipedia::EXAMPLE_RELEVANT);
        assert_eq!(r.other_positive.len(), 4);
        let mut leaves = r.taxonomy_fragment.features();
        leaves.sort_unstable();
        let mut want = wikipedia::EXAMPLE_RELEVANT.to_vec();
        want.sort_unstable();
        assert_eq!(leaves, want);
        let sum: f64 = r.contributions.iter().map(|c| c.product).sum();
        assert!((r.intercept + sum - r.logit).abs() < 1e-9);

        let back: ExplanationReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(r.render_text().contains("* WT_NO_DELAY"));
    }

    #[test]
    fn zero_leaf_is_flagged_not_failed() {
        let schema = wikipedia::schema();
        let model = single_leaf(schema.clone(), LogisticLeafModel::default());
        let r = build_report(
            &model,
            &FeatureVector::zeros(schema.len()),
            &wikipedia::taxonomy(),
            &ExplainConfig::default(),
        )
        .unwrap();
        assert_eq!(r.probability, 0.5);
        assert!(r.relevant.is_empty());
        assert!(r.taxonomy_fragment.root.children.is_empty());
        assert_eq!(r.flags, vec![ReportFlag::NoPositiveContributions]);
    }

    #[test]
    fn regular_prediction_is_rejected() {
        let schema = wikipedia::schema();
        let model = single_leaf(schema.clone(), LogisticLeafModel::new(-3.0, []));
        let err = build_report(
            &model,
            &FeatureVector::zeros(schema.len()),
            &wikipedia::taxonomy(),
            &ExplainConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, ExplainError::NotAViolation { .. }));
    }

    #[test]
    fn histogram_counts() {
        let schema = FeatureSchema::new(["a", "b"], "class", LabelValues::new("v", "r")).unwrap();
        let tax = load_taxonomy(
            r#"{"norm":"n","root":{"name":"r","children":[
                {"name":"a","feature":"a"},{"name":"b","feature":"b"}]}}"#,
        )
        .unwrap();
        assert!(tax.validate_against(&schema).is_empty());
        let model = single_leaf(schema.clone(), LogisticLeafModel::new(-1.0, [(0, 2.0), (1, 0.1)]));
        let inst = vec![
            LabeledInstance::new(vec![1.0, 1.0], 1),
            LabeledInstance::new(vec![0.0, 1.0], 0),
            LabeledInstance::new(vec![2.0, 0.0], 1),
        ];
        let ds = Dataset::new(schema, inst).unwrap();
        let h = relevance_histogram(&model, &ds, 0.5, &ClusterConfig::default()).unwrap();
        assert_eq!(h["a"], 2);
        assert_eq!(h["b"], 0);

        let none = relevance_histogram(&model, &ds, 0.99, &ClusterConfig::default()).unwrap();
        assert!(none.values().all(|&v| v == 0));
        assert_eq!(none.len(), 2);
    }
}
