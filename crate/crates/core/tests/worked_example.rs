use fnvd_core::cluster::ClusterConfig;
use fnvd_core::data::{synth_generate, SynthConfig};
use fnvd_core::explain::{contributions, relevant_features};
use fnvd_core::lmt::{train, Metrics, TrainParams};
use fnvd_core::taxonomy::{load_taxonomy, Taxonomy, TaxonomyNode};
use fnvd_core::wikipedia;

/// Names, features and child order only.
fn shape(n: &TaxonomyNode) -> String {
    let kids: Vec<String> = n.children.iter().map(shape).collect();
    format!("{}|{:?}[{}]", n.name, n.feature, kids.join(","))
}

fn same_structure(a: &Taxonomy, b: &Taxonomy) -> bool {
    a.norm == b.norm && shape(&a.root) == shape(&b.root)
}

#[test]
fn example_products_and_relevant_set() {
    let (leaf, x) = wikipedia::example_leaf_and_input();
    let schema = wikipedia::schema();
    let contribs = contributions(&leaf, &x, &schema).unwrap();
    for (name, total) in wikipedia::EXAMPLE_PRODUCTS {
        let c = contribs.iter().find(|c| c.feature == name).unwrap();
        assert!((c.product - total).abs() <= 1e-8, "{name}: {} vs {total}", c.product);
    }
    let rel = relevant_features(&contribs, &ClusterConfig::default());
    let starred: Vec<&str> = rel.relevant.iter().map(|c| c.feature.as_str()).collect();
    assert_eq!(starred, wikipedia::EXAMPLE_RELEVANT);
}

#[test]
fn example_coefficients_are_product_over_value() {
    let (leaf, _) = wikipedia::example_leaf_and_input();
    let s = wikipedia::schema();
    let c = |n: &str| leaf.coeff(s.index_of(n).unwrap());
    assert!((c("WT_NO_DELAY") - 1.48).abs() < 5e-3);
    assert!((c("HIST_REP_COUNTRY") - 5.8).abs() < 5e-3);
    assert!((c("LANG_ALL_ALPHA") - 1.18).abs() < 5e-3);
}

#[test]
fn example_fragment_matches_golden() {
    let golden = load_taxonomy(include_str!("fixtures/example_fragment.json")).unwrap();
    let tax = wikipedia::taxonomy();
    let fragment = tax.subtree(wikipedia::EXAMPLE_RELEVANT).unwrap();
    assert!(same_structure(&fragment, &golden), "{}", fragment.render_text());
}

#[test]
fn subtree_is_monotone_and_exact() {
    let tax = wikipedia::taxonomy();
    let all = tax.features();
    let small = tax.subtree(all[..5].iter().copied()).unwrap();
    let large = tax.subtree(all[..20].iter().copied()).unwrap();
    assert_eq!(small.features(), all[..5].to_vec());
    let large_text = large.render_text();
    for line in small.render_text().lines() {
        assert!(large_text.contains(line.trim()), "{line}");
    }
    assert_eq!(tax.subtree(all.iter().copied()).unwrap(), tax);
}

#[test]
fn synthetic_imbalance_single_leaf_recovery() {
    let cfg = SynthConfig {
        n: 20_000,
        d: 3,
        true_coeffs: vec![16.0, 12.0, -8.0],
        intercept: -19.5,
        positive_rate: 0.074,
    };
    let ds = synth_generate(&cfg, 7).unwrap();
    let rate = ds.class_stats().ratio;
    assert!((rate - 0.074).abs() < 0.01, "{rate}");
    let model = train(&ds, &TrainParams::default()).unwrap();
    assert_eq!(model.n_leaves(), 1);
    let leaf = model.root.model();
    for (j, &truth) in cfg.true_coeffs.iter().enumerate() {
        let rel = (leaf.coeff(j) - truth).abs() / truth.abs();
        assert!(rel <= 0.10, "x{j}: {} vs {truth}", leaf.coeff(j));
    }
    let test = synth_generate(&cfg, 8).unwrap();
    let m = Metrics::score(&model, &test, 0.5).unwrap();
    assert!(m.violation_recall >= 0.5, "{}", m.violation_recall);
}
