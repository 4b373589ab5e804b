//! Generators and brute-force oracles shared by the test suites.
#![allow(dead_code)]

use fnvd_core::data::{FeatureSchema, FeatureVector, LabelValues, LabeledInstance};
use fnvd_core::lmt::{LmtModel, LogisticLeafModel, Node, SplitNode, TrainParams, TrainingMeta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn schema(d: usize) -> FeatureSchema {
    FeatureSchema::new((0..d).map(|j| format!("f{j}")), "class", LabelValues::new("violation", "regular")).unwrap()
}

/// Maximum-likelihood logistic fit `p = 1 / (1 + exp(-(a + b x)))` by damped
/// Newton iterations on the 2x2 Hessian.
pub fn newton_mle(xs: &[f64], ys: &[u8]) -> (f64, f64) {
    let nll = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(ys)
            .map(|(&x, &y)| {
                let f = a + b * x;
                let log1pexp = if f > 0.0 { f + (-f).exp().ln_1p() } else { f.exp().ln_1p() };
                log1pexp - f64::from(y) * f
            })
            .sum()
    };
    let (mut a, mut b) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(ys) {
            let p = 1.0 / (1.0 + (-(a + b * x)).exp());
            let r = f64::from(y) - p;
            let w = p * (1.0 - p);
            ga += r;
            gb += r * x;
            haa += w;
            hab += w * x;
            hbb += w * x * x;
        }
        let det = haa * hbb - hab * hab;
        let da = (hbb * ga - hab * gb) / det;
        let db = (haa * gb - hab * ga) / det;
        let before = nll(a, b);
        let mut t = 1.0;
        while nll(a + t * da, b + t * db) > before && t > 1e-10 {
            t *= 0.5;
        }
        a += t * da;
        b += t * db;
        if (t * da).abs().max((t * db).abs()) < 1e-13 {
            break;
        }
    }
    (a, b)
}

pub fn one_feature_dataset(seed: u64, n: usize) -> (Vec<LabeledInstance>, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b0: f64 = rng.gen_range(-1.5..1.0);
    let b1: f64 = rng.gen_range(0.5..3.0) * if rng.gen() { 1.0 } else { -1.0 };
    let inst = (0..n)
        .map(|_| {
            let x: f64 = rng.gen_range(-2.0..2.0);
            let p = 1.0 / (1.0 + (-(b0 + b1 * x)).exp());
            LabeledInstance::new(vec![x], u8::from(rng.gen::<f64>() < p))
        })
        .collect();
    (inst, b0, b1)
}

/// Smallest sse over every split of the sorted values into a prefix and a
/// suffix. Means and sums run over the points in input order.
pub fn contiguous_optimum(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = f64::INFINITY;
    for cut in 1..sorted.len() {
        let boundary = sorted[cut - 1];
        if boundary == sorted[cut] {
            continue;
        }
        let low = |v: f64| v <= boundary;
        let mean = |want_low: bool| {
            let (s, c) = values
                .iter()
                .filter(|&&v| low(v) == want_low)
                .fold((0.0, 0usize), |(s, c), &v| (s + v, c + 1));
            s / c as f64
        };
        let (ml, mh) = (mean(true), mean(false));
        let sse: f64 = values
            .iter()
            .map(|&v| {
                let m = if low(v) { ml } else { mh };
                (v - m) * (v - m)
            })
            .sum();
        best = best.min(sse);
    }
    best
}

pub fn random_leaf(rng: &mut ChaCha8Rng, d: usize) -> LogisticLeafModel {
    let mut coeffs = Vec::new();
    for j in 0..d {
        if rng.gen_bool(0.7) {
            coeffs.push((j, rng.gen_range(-2.0..2.0)));
        }
    }
    LogisticLeafModel::new(rng.gen_range(-1.0..1.0), coeffs)
}

/// Random tree whose thresholds stay inside the region reaching each node.
pub fn random_node(rng: &mut ChaCha8Rng, d: usize, depth: usize, bounds: &mut Vec<(f64, f64)>) -> Node {
    if depth == 0 || rng.gen_bool(0.3) {
        return Node::Leaf(random_leaf(rng, d));
    }
    let feature = rng.gen_range(0..d);
    let (lo, hi) = bounds[feature];
    let threshold = lo + (hi - lo) * rng.gen_range(0.2..0.8);
    let model = random_leaf(rng, d);
    bounds[feature] = (lo, threshold);
    let left = random_node(rng, d, depth - 1, bounds);
    bounds[feature] = (threshold, hi);
    let right = random_node(rng, d, depth - 1, bounds);
    bounds[feature] = (lo, hi);
    Node::Split(SplitNode {
        feature,
        threshold,
        model,
        left: Box::new(left),
        right: Box::new(right),
    })
}

pub fn random_model(seed: u64) -> LmtModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(1..=6);
    let root = random_node(&mut rng, d, 4, &mut vec![(-1.0, 1.0); d]);
    LmtModel {
        schema: schema(d),
        root,
        training_meta: TrainingMeta {
            boost_iters: rng.gen_range(1..200),
            seed,
            params: TrainParams::default(),
            n_instances: 0,
            pruned: false,
        },
    }
}

pub fn random_input(rng: &mut ChaCha8Rng, d: usize) -> FeatureVector {
    FeatureVector((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
}
