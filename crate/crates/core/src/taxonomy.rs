//! Feature taxonomies attached to a norm.
//!
//! A taxonomy is a tree of named groups whose leaves are schema features.
//! Files are JSON:
//!
//! ```json
//! {"norm": "no vandalism", "version": 1,
//!  "root": {"name": "...", "description": "...", "children": [
//!     {"name": "COMM_LEN", "description": "...", "feature": "COMM_LEN"}]}}
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::FeatureSchema;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaxonomyError {
    #[error("malformed taxonomy: {0}")]
    Malformed(String),
    #[error("feature {0} appears in more than one leaf")]
    DuplicateFeature(String),
    #[error("node {0} has both children and a feature")]
    InternalNodeWithFeature(String),
    #[error("node {parent} has two children named {name}")]
    DuplicateSibling { parent: String, name: String },
    #[error("group {0} has no children")]
    EmptyGroup(String),
    #[error("feature {0} is not in the taxonomy")]
    UnknownFeature(String),
}

/// A mismatch between a taxonomy and a feature schema.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "feature", rename_all = "snake_case")]
pub enum TaxonomyIssue {
    /// In the schema but not in any leaf.
    MissingFeature(String),
    /// In a leaf but not in the schema.
    UnknownFeature(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyNode {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<TaxonomyNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comments: Option<String>,
}

impl TaxonomyNode {
    pub fn is_leaf(&self) -> bool {
        self.feature.is_some()
    }

    fn collect_features<'a>(&'a self, out: &mut Vec<&'a str>) {
        if let Some(f) = &self.feature {
            out.push(f);
        }
        for c in &self.children {
            c.collect_features(out);
        }
    }

    fn find_path<'a>(&'a self, feature: &str, path: &mut Vec<&'a TaxonomyNode>) -> bool {
        path.push(self);
        if self.feature.as_deref() == Some(feature) || self.children.iter().any(|c| c.find_path(feature, path)) {
            return true;
        }
        path.pop();
        false
    }

    /// Copy of this node keeping only branches that reach `keep`.
    fn prune_to(&self, keep: &BTreeSet<&str>) -> Option<TaxonomyNode> {
        if let Some(f) = &self.feature {
            return keep.contains(f.as_str()).then(|| self.clone());
        }
        let children: Vec<TaxonomyNode> = self.children.iter().filter_map(|c| c.prune_to(keep)).collect();
        (!children.is_empty()).then(|| TaxonomyNode {
            children,
            ..self.clone()
        })
    }

    fn count_nodes(&self) -> usize {
        1 + self.children.iter().map(TaxonomyNode::count_nodes).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub norm: String,
    #[serde(default = "default_version")]
    pub version: u32,
    pub root: TaxonomyNode,
}

fn default_version() -> u32 {
    1
}

pub fn load_taxonomy(text: &str) -> Result<Taxonomy, TaxonomyError> {
    let tax: Taxonomy = serde_json::from_str(text).map_err(|e| TaxonomyError::Malformed(e.to_string()))?;
    tax.validate()?;
    Ok(tax)
}

impl Taxonomy {
    /// Check structural invariants. The root may be empty; any other group
    /// needs at least one child.
    pub fn validate(&self) -> Result<(), TaxonomyError> {
        if self.root.feature.is_some() {
            return Err(TaxonomyError::Malformed("root must be a group".into()));
        }
        let mut seen = BTreeSet::new();
        check_node(&self.root, true, &mut seen)
    }

    /// Leaf features in depth-first order.
    pub fn features(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.root.collect_features(&mut out);
        out
    }

    pub fn n_nodes(&self) -> usize {
        self.root.count_nodes()
    }

    /// Nodes from the root down to the leaf holding `feature`.
    pub fn path_to(&self, feature: &str) -> Option<Vec<&TaxonomyNode>> {
        let mut path = Vec::new();
        self.root.find_path(feature, &mut path).then_some(path)
    }

    pub fn leaf(&self, feature: &str) -> Option<&TaxonomyNode> {
        self.path_to(feature).and_then(|p| p.last().copied())
    }

    /// Description of each leaf, keyed by feature.
    pub fn descriptions(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        for f in self.features() {
            if let Some(leaf) = self.leaf(f) {
                out.insert(f.to_string(), leaf.description.clone());
            }
        }
        out
    }

    /// Features missing from the taxonomy and taxonomy leaves missing from
    /// the schema. Empty iff the leaves cover the schema exactly.
    pub fn validate_against(&self, schema: &FeatureSchema) -> Vec<TaxonomyIssue> {
        let leaves: BTreeSet<&str> = self.features().into_iter().collect();
        let names: BTreeSet<&str> = schema.names().collect();
        let mut issues: Vec<TaxonomyIssue> = names
            .difference(&leaves)
            .map(|f| TaxonomyIssue::MissingFeature(f.to_string()))
            .collect();
        issues.extend(leaves.difference(&names).map(|f| TaxonomyIssue::UnknownFeature(f.to_string())));
        issues
    }

    /// The minimal subtree containing the root and every node on a path to
    /// one of `features`. Child order and descriptions are kept.
    pub fn subtree<'a, I>(&self, features: I) -> Result<Taxonomy, TaxonomyError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let known: BTreeSet<&str> = self.features().into_iter().collect();
        let mut keep = BTreeSet::new();
        for f in features {
            if !known.contains(f) {
                return Err(TaxonomyError::UnknownFeature(f.to_string()));
            }
            keep.insert(f);
        }
        let root = self.root.prune_to(&keep).unwrap_or_else(|| TaxonomyNode {
            children: Vec::new(),
            ..self.root.clone()
        });
        Ok(Taxonomy {
            norm: self.norm.clone(),
            version: self.version,
            root,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("taxonomy is serializable")
    }

    /// Indented outline, one node per line.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        render(&self.root, 0, &mut out);
        out
    }
}

fn render(node: &TaxonomyNode, depth: usize, out: &mut String) {
    out.push_str(&"  ".repeat(depth));
    out.push_str(&node.name);
    if node.is_leaf() && !node.description.is_empty() {
        out.push_str(": ");
        out.push_str(&node.description);
    }
    out.push('\n');
    for c in &node.children {
        render(c, depth + 1, out);
    }
}

fn check_node<'a>(node: &'a TaxonomyNode, is_root: bool, seen: &mut BTreeSet<&'a str>) -> Result<(), TaxonomyError> {
    if node.name.trim().is_empty() {
        return Err(TaxonomyError::Malformed("node with empty name".into()));
    }
    if let Some(f) = &node.feature {
        if !node.children.is_empty() {
            return Err(TaxonomyError::InternalNodeWithFeature(node.name.clone()));
        }
        if f.trim().is_empty() {
            return Err(TaxonomyError::Malformed(format!("leaf {} has an empty feature", node.name)));
        }
        if !seen.insert(f) {
            return Err(TaxonomyError::DuplicateFeature(f.clone()));
        }
        return Ok(());
    }
    if node.children.is_empty() && !is_root {
        return Err(TaxonomyError::EmptyGroup(node.name.clone()));
    }
    let mut names = BTreeSet::new();
    for c in &node.children {
        if !names.insert(c.name.as_str()) {
            return Err(TaxonomyError::DuplicateSibling {
                parent: node.name.clone(),
                name: c.name.clone(),
            });
        }
        check_node(c, false, seen)?;
    }
    Ok(())
}
