//! One-vs-one and one-vs-rest multi-class schemes built on the identical
//! proximal solver, so method comparisons isolate the structural cost:
//! n(n−1)/2 planes per prediction for one-vs-one, n for one-vs-rest,
//! ⌈log₂ n⌉ for the bipartition tree.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::shard::{run_training_job, shard_rows, LabeledView, ShardConfig};
use crate::svm::SvmPlane;
use crate::BatchPrediction;

/// One plane of a one-vs-one model; `positive < negative` and the
/// positive class is the +1 side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPlane {
    pub positive: usize,
    pub negative: usize,
    pub plane: SvmPlane,
}

/// n(n−1)/2 pairwise planes combined by majority vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvoModel {
    pub classes: Vec<usize>,
    pub feature_count: usize,
    pub planes: Vec<PairPlane>,
}

/// One plane of a one-vs-rest model; `class` is the +1 side against
/// everything else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPlane {
    pub class: usize,
    pub plane: SvmPlane,
}

/// n one-vs-rest planes combined by argmax decision value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvrModel {
    pub classes: Vec<usize>,
    pub feature_count: usize,
    pub planes: Vec<ClassPlane>,
}

fn check_classes(data: &Dataset) -> Result<()> {
    if data.class_count() < 2 {
        return Err(Error::InvalidInput(format!(
            "multi-class training needs at least 2 classes, got {}",
            data.class_count()
        )));
    }
    for (c, count) in data.class_row_counts().iter().enumerate() {
        if *count == 0 {
            return Err(Error::InvalidInput(format!(
                "class '{}' has no rows",
                data.class_names()[c]
            )));
        }
    }
    Ok(())
}

/// Train one plane per unordered class pair (i, j), i < j, on only those
/// two classes' rows, class i as +1.
pub fn train_ovo(data: &Dataset, mu: f64, shard: &ShardConfig) -> Result<OvoModel> {
    check_classes(data)?;
    let n = data.class_count();
    let all_rows: Vec<usize> = (0..data.len()).collect();
    let mut planes = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let view = LabeledView::from_sides(data, &all_rows, &[i], &[j])?;
            let plan = shard_rows(view.len(), shard.shards)?;
            let plane = run_training_job(&view, &plan, &shard.backend, mu)?;
            planes.push(PairPlane {
                positive: i,
                negative: j,
                plane,
            });
        }
    }
    Ok(OvoModel {
        classes: (0..n).collect(),
        feature_count: data.feature_count(),
        planes,
    })
}

impl OvoModel {
    pub fn plane_count(&self) -> usize {
        self.planes.len()
    }

    /// Majority vote over all pairwise planes. Vote ties break by the
    /// larger sum of |decision value| over the tied class's planes, then
    /// by the smaller class id.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.feature_count {
            return Err(Error::DimensionMismatch(format!(
                "model expects {} features, sample has {}",
                self.feature_count,
                x.len()
            )));
        }
        let n = self.classes.len();
        let mut votes = vec![0u32; n];
        let mut margin = vec![0.0f64; n];
        for pair in &self.planes {
            let value = pair.plane.decision_value(x)?;
            let winner = if value >= 0.0 { pair.positive } else { pair.negative };
            votes[winner] += 1;
            margin[pair.positive] += value.abs();
            margin[pair.negative] += value.abs();
        }
        let mut best = 0usize;
        for c in 1..n {
            if votes[c] > votes[best]
                || (votes[c] == votes[best] && margin[c] > margin[best])
            {
                best = c;
            }
        }
        Ok(self.classes[best])
    }

    pub fn predict_batch(&self, data: &Dataset) -> Result<BatchPrediction> {
        if data.feature_count() != self.feature_count {
            return Err(Error::DimensionMismatch(format!(
                "model expects {} features, dataset has {}",
                self.feature_count,
                data.feature_count()
            )));
        }
        let start = Instant::now();
        let mut labels = Vec::with_capacity(data.len());
        for i in 0..data.len() {
            labels.push(self.predict(data.row(i))?);
        }
        Ok(BatchPrediction {
            labels,
            planes_evaluated: (data.len() * self.planes.len()) as u64,
            elapsed: start.elapsed(),
        })
    }
}

/// Train one plane per class on the full dataset, that class as +1 and
/// every other class as -1.
pub fn train_ovr(data: &Dataset, mu: f64, shard: &ShardConfig) -> Result<OvrModel> {
    check_classes(data)?;
    let n = data.class_count();
    let all_rows: Vec<usize> = (0..data.len()).collect();
    let mut planes = Vec::with_capacity(n);
    for c in 0..n {
        let rest: Vec<usize> = (0..n).filter(|&k| k != c).collect();
        let view = LabeledView::from_sides(data, &all_rows, &[c], &rest)?;
        let plan = shard_rows(view.len(), shard.shards)?;
        let plane = run_training_job(&view, &plan, &shard.backend, mu)?;
        planes.push(ClassPlane { class: c, plane });
    }
    Ok(OvrModel {
        classes: (0..n).collect(),
        feature_count: data.feature_count(),
        planes,
    })
}

impl OvrModel {
    pub fn plane_count(&self) -> usize {
        self.planes.len()
    }

    /// Argmax of the per-class decision values; argmax is total, so a
    /// sample in nobody's halfspace still gets the least-negative class.
    /// Exact ties break to the smaller class id.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.feature_count {
            return Err(Error::DimensionMismatch(format!(
                "model expects {} features, sample has {}",
                self.feature_count,
                x.len()
            )));
        }
        let mut best_class = self.planes[0].class;
        let mut best_value = self.planes[0].plane.decision_value(x)?;
        for cp in &self.planes[1..] {
            let value = cp.plane.decision_value(x)?;
            if value > best_value {
                best_value = value;
                best_class = cp.class;
            }
        }
        Ok(best_class)
    }

    pub fn predict_batch(&self, data: &Dataset) -> Result<BatchPrediction> {
        if data.feature_count() != self.feature_count {
            return Err(Error::DimensionMismatch(format!(
                "model expects {} features, dataset has {}",
                self.feature_count,
                data.feature_count()
            )));
        }
        let start = Instant::now();
        let mut labels = Vec::with_capacity(data.len());
        for i in 0..data.len() {
            labels.push(self.predict(data.row(i))?);
        }
        Ok(BatchPrediction {
            labels,
            planes_evaluated: (data.len() * self.planes.len()) as u64,
            elapsed: start.elapsed(),
        })
    }
}
