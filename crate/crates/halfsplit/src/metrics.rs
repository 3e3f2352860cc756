//! Confusion counts and the metrics derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts from evaluating a binary plane against ±1 ground truth.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryConfusion {
    pub true_positives: u64,
    pub true_negatives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

impl BinaryConfusion {
    pub fn total(&self) -> u64 {
        self.true_positives + self.true_negatives + self.false_positives + self.false_negatives
    }

    /// Tally one (actual, predicted) pair of ±1 signs.
    pub fn record(&mut self, actual: i8, predicted: i8) {
        match (actual >= 0, predicted >= 0) {
            (true, true) => self.true_positives += 1,
            (false, false) => self.true_negatives += 1,
            (false, true) => self.false_positives += 1,
            (true, false) => self.false_negatives += 1,
        }
    }

    /// Sum counts from another confusion (the reducer step).
    pub fn absorb(&mut self, other: &BinaryConfusion) {
        self.true_positives += other.true_positives;
        self.true_negatives += other.true_negatives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
    }

    /// The same counts with the positive and negative roles swapped.
    pub fn flipped(&self) -> BinaryConfusion {
        BinaryConfusion {
            true_positives: self.true_negatives,
            true_negatives: self.true_positives,
            false_positives: self.false_negatives,
            false_negatives: self.false_positives,
        }
    }
}

/// `(tp + tn) / total`.
pub fn accuracy(c: &BinaryConfusion) -> Result<f64> {
    let total = c.total();
    if total == 0 {
        return Err(Error::UndefinedMetric(
            "accuracy of an empty confusion".into(),
        ));
    }
    Ok((c.true_positives + c.true_negatives) as f64 / total as f64)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall, and F1 for the positive side. Any 0/0 is defined as
/// 0, which keeps candidate selection total over degenerate planes.
pub fn precision_recall_f1(c: &BinaryConfusion) -> (f64, f64, f64) {
    let p = ratio(c.true_positives, c.true_positives + c.false_positives);
    let r = ratio(c.true_positives, c.true_positives + c.false_negatives);
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

/// Mean of the two per-side F1 scores, one with each side of the split
/// treated as positive. A class bipartition has no canonical positive
/// class, so the symmetric form scores both orientations; unlike raw
/// accuracy it collapses for a predictor that dumps everything on the
/// majority side.
pub fn f1_macro_from_split(c: &BinaryConfusion) -> f64 {
    let (_, _, f_pos) = precision_recall_f1(c);
    let (_, _, f_neg) = precision_recall_f1(&c.flipped());
    (f_pos + f_neg) / 2.0
}

/// `n×n` counts; entry (i, j) is rows of true class `i` predicted as `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MulticlassConfusion {
    classes: usize,
    counts: Vec<u64>,
}

impl MulticlassConfusion {
    pub fn new(classes: usize) -> Self {
        MulticlassConfusion {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_pairs<I>(classes: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut mc = MulticlassConfusion::new(classes);
        for (actual, predicted) in pairs {
            mc.record(actual, predicted)?;
        }
        Ok(mc)
    }

    pub fn record(&mut self, actual: usize, predicted: usize) -> Result<()> {
        if actual >= self.classes || predicted >= self.classes {
            return Err(Error::InvalidInput(format!(
                "class pair ({actual}, {predicted}) outside {} classes",
                self.classes
            )));
        }
        self.counts[actual * self.classes + predicted] += 1;
        Ok(())
    }

    pub fn class_count(&self) -> usize {
        self.classes
    }

    pub fn count(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.count(i, i)).sum()
    }

    /// Rows whose true class is `class`.
    pub fn row_sum(&self, class: usize) -> u64 {
        (0..self.classes).map(|j| self.count(class, j)).sum()
    }

    /// Rows predicted as `class`.
    pub fn col_sum(&self, class: usize) -> u64 {
        (0..self.classes).map(|i| self.count(i, class)).sum()
    }

    /// One-vs-rest precision/recall/F1 per class.
    pub fn per_class_prf(&self) -> Vec<(f64, f64, f64)> {
        (0..self.classes)
            .map(|c| {
                let tp = self.count(c, c);
                let binary = BinaryConfusion {
                    true_positives: tp,
                    false_positives: self.col_sum(c) - tp,
                    false_negatives: self.row_sum(c) - tp,
                    true_negatives: self.total() - self.col_sum(c) - self.row_sum(c) + tp,
                };
                precision_recall_f1(&binary)
            })
            .collect()
    }
}

/// trace / total.
pub fn multiclass_accuracy(mc: &MulticlassConfusion) -> Result<f64> {
    let total = mc.total();
    if total == 0 {
        return Err(Error::UndefinedMetric(
            "accuracy of an empty multi-class confusion".into(),
        ));
    }
    Ok(mc.trace() as f64 / total as f64)
}
