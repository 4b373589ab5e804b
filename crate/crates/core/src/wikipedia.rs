//! The Wikipedia `no vandalism` feature set: a 61-feature schema, its
//! taxonomy, and the worked "i like man!!" example.

use crate::data::{FeatureSchema, FeatureVector, LabelValues};
use crate::lmt::LogisticLeafModel;
use crate::taxonomy::{load_taxonomy, Taxonomy};

pub const TAXONOMY_JSON: &str = include_str!("../data/wikipedia_taxonomy.json");
pub const N_FEATURES: usize = 61;
pub const LABEL_NAME: &str = "class";

pub fn label_values() -> LabelValues {
    LabelValues::new("vandalism", "regular")
}

pub fn taxonomy() -> Taxonomy {
    load_taxonomy(TAXONOMY_JSON).expect("bundled taxonomy is valid")
}

/// Features in taxonomy order, followed by the class attribute.
pub fn schema() -> FeatureSchema {
    let tax = taxonomy();
    FeatureSchema::new(tax.features(), LABEL_NAME, label_values()).expect("bundled schema is valid")
}

/// Per-feature products of the worked example, highest first.
pub const EXAMPLE_PRODUCTS: [(&str, f64); 7] = [
    ("WT_NO_DELAY", 1.08254896),
    ("HIST_REP_COUNTRY", 0.899847),
    ("LANG_ALL_ALPHA", 0.7261543),
    ("HASH_REC_DIVERSITY", 0.15714292),
    ("WT_DELAYED", 0.12748878),
    ("LANG_ALL_CHAR_REP", 0.12),
    ("HIST_REP_ARTICLE", 0.093548),
];

/// Feature values reported for the example edit.
pub const EXAMPLE_VALUES: [(&str, f64); 3] = [
    ("LANG_ALL_ALPHA", 0.615385),
    ("WT_NO_DELAY", 0.731452),
    ("HIST_REP_COUNTRY", 0.155146),
];

pub const EXAMPLE_RELEVANT: [&str; 3] = ["WT_NO_DELAY", "HIST_REP_COUNTRY", "LANG_ALL_ALPHA"];

/// A leaf and input that reproduce the example's products. Where the value
/// is known the coefficient is product / value; for the other features the
/// value is 1 and the coefficient is the product. Every other feature is 0.
pub fn example_leaf_and_input() -> (LogisticLeafModel, FeatureVector) {
    let schema = schema();
    let mut x = FeatureVector::zeros(schema.len());
    let mut coeffs = Vec::new();
    for (name, product) in EXAMPLE_PRODUCTS {
        let j = schema.index_of(name).expect("example feature in schema");
        let value = EXAMPLE_VALUES
            .iter()
            .find(|(n, _)| *n == name)
            .map_or(1.0, |(_, v)| *v);
        x.0[j] = value;
        coeffs.push((j, product / value));
    }
    (LogisticLeafModel::new(0.0, coeffs), x)
}
