//! Norm violation detection with logistic model trees.
//!
//! - [`data`]: labeled feature datasets, ARFF/CSV ingestion, stratified folds.
//! - [`lmt`]: training, pruning, prediction and serialization of logistic
//!   model trees.
//! - [`cluster`]: Lloyd's k-means, used to split feature contributions into
//!   a most-relevant and a less-relevant group.
//! - [`taxonomy`]: the feature taxonomy attached to a norm.
//! - [`explain`]: contribution lists, relevance grouping and explanation
//!   reports for detected violations.
//! - [`wikipedia`]: the 61-feature vandalism schema and its taxonomy.

pub mod data;
pub mod lmt;
pub mod cluster;
pub mod explain;
pub mod taxonomy;
pub mod wikipedia;
