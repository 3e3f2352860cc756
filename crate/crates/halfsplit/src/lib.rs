//! halfsplit — multi-class linear classification via a cross-validated
//! class-bipartition tree.
//!
//! A binary "proximal" separator is solved in closed form from Gram
//! statistics that accumulate independently per data shard and merge by
//! addition, so training decomposes map-reduce style (see [`svm`] and
//! [`shard`]). The multi-class scheme arranges classes in a binary tree:
//! each node tries every balanced bipartition of its class set, keeps the
//! plane that scores best on held-out rows, and recurses until the leaves
//! are single classes (see [`tree`]). Prediction walks root to leaf,
//! touching at most ⌈log₂ n⌉ planes instead of the n(n−1)/2 of
//! one-vs-one; [`baselines`] provides one-vs-one and one-vs-rest on the
//! identical solver for comparison. [`data`] covers CSV/libsvm loading,
//! stratified splitting, standardization, and seeded synthetic clusters;
//! [`metrics`] the confusion counts and scores; [`model`] the JSON model
//! files.

pub mod baselines;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod shard;
pub mod svm;
pub mod tree;

pub use error::{Error, Result};

use std::time::Duration;

/// Labels plus the evaluation-count and wall-time accounting from a batch
/// prediction pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPrediction {
    pub labels: Vec<usize>,
    /// Total plane evaluations across the batch.
    pub planes_evaluated: u64,
    /// Compute time only; callers time their own I/O.
    pub elapsed: Duration,
}
