#![allow(dead_code)]

use fnvd_core::data::FeatureVector;
use fnvd_core::lmt::{logit, LmtModel, LogisticLeafModel, Node, SplitNode, TrainParams, TrainingMeta};
use fnvd_core::wikipedia;
use fnvd_service::{ActionSubmission, Service, ServiceConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn meta() -> TrainingMeta {
    TrainingMeta {
        boost_iters: 1,
        seed: 0,
        params: TrainParams::default(),
        n_instances: 0,
        pruned: false,
    }
}

/// The worked-example leaf shifted so that an all-zero input scores 0.1.
pub fn example_leaf() -> LogisticLeafModel {
    let (leaf, _) = wikipedia::example_leaf_and_input();
    LogisticLeafModel::new(logit(0.1), leaf.coeffs)
}

pub fn single_leaf_model() -> LmtModel {
    LmtModel {
        schema: wikipedia::schema(),
        root: Node::Leaf(example_leaf()),
        training_meta: meta(),
    }
}

/// Two leaves split on WT_NO_DELAY, so inputs take different routes.
pub fn split_model() -> LmtModel {
    let schema = wikipedia::schema();
    let j = schema.index_of("WT_NO_DELAY").unwrap();
    let left = example_leaf();
    let right = LogisticLeafModel::new(-1.0, left.coeffs.iter().map(|(&k, &b)| (k, 1.5 * b)));
    LmtModel {
        schema,
        root: Node::Split(SplitNode {
            feature: j,
            threshold: 0.5,
            model: left.clone(),
            left: Box::new(Node::Leaf(left)),
            right: Box::new(Node::Leaf(right)),
        }),
        training_meta: meta(),
    }
}

pub fn example_input() -> FeatureVector {
    wikipedia::example_leaf_and_input().1
}

pub fn benign_input() -> FeatureVector {
    FeatureVector::zeros(wikipedia::N_FEATURES)
}

pub fn submission(id: &str, features: FeatureVector) -> ActionSubmission {
    ActionSubmission {
        action_id: id.to_string(),
        actor_id: "actor".into(),
        features,
        raw_context: None,
    }
}

pub fn random_input(rng: &mut ChaCha8Rng) -> FeatureVector {
    FeatureVector((0..wikipedia::N_FEATURES).map(|_| rng.gen_range(0.0..1.0)).collect())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn open_service(dir: &std::path::Path, model: LmtModel, cfg: ServiceConfig) -> Service {
    let svc = Service::open(dir, wikipedia::taxonomy(), cfg).unwrap();
    svc.install_model(model, "test").unwrap();
    svc
}
