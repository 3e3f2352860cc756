//! The class-bipartition tree.
//!
//! Every internal node splits its class set into two near-equal halves.
//! Building a node enumerates all balanced bipartitions, trains one plane
//! per candidate on the training rows, scores each on held-out validation
//! rows, keeps the best, and recurses into both sides until the leaves
//! hold single classes. Prediction walks root to leaf and therefore costs
//! at most ⌈log₂ n⌉ plane evaluations, against n(n−1)/2 for one-vs-one.

use std::collections::BTreeSet;
use std::time::Instant;

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{stratified_split, Dataset, DatasetView};
use crate::error::{Error, Result};
use crate::metrics::{accuracy, f1_macro_from_split, BinaryConfusion};
use crate::shard::{run_confusion_job, run_training_job, shard_rows, LabeledView, ShardConfig};
use crate::svm::SvmPlane;
use crate::BatchPrediction;

/// An unordered split of class ids into two near-equal sides, stored
/// canonically: both sides sorted and the side holding the smallest class
/// id kept as `positive`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassPartition {
    positive: Vec<usize>,
    negative: Vec<usize>,
}

impl ClassPartition {
    /// Canonicalize and validate: sides must be nonempty, disjoint,
    /// duplicate-free, and differ in size by at most one.
    pub fn new(a: Vec<usize>, b: Vec<usize>) -> Result<Self> {
        let mut a = a;
        let mut b = b;
        a.sort_unstable();
        b.sort_unstable();
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidInput(
                "both sides of a partition must be nonempty".into(),
            ));
        }
        if a.windows(2).any(|w| w[0] == w[1]) || b.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(
                "a partition side contains a duplicate class id".into(),
            ));
        }
        if a.iter().any(|c| b.binary_search(c).is_ok()) {
            return Err(Error::InvalidInput(
                "partition sides are not disjoint".into(),
            ));
        }
        if a.len().abs_diff(b.len()) > 1 {
            return Err(Error::InvalidInput(format!(
                "partition sides of {} and {} classes are not balanced",
                a.len(),
                b.len()
            )));
        }
        if b[0] < a[0] {
            std::mem::swap(&mut a, &mut b);
        }
        Ok(ClassPartition {
            positive: a,
            negative: b,
        })
    }

    pub fn positive(&self) -> &[usize] {
        &self.positive
    }

    pub fn negative(&self) -> &[usize] {
        &self.negative
    }

    pub fn class_count(&self) -> usize {
        self.positive.len() + self.negative.len()
    }

    /// +1, -1, or None for a class id not in the partition.
    pub fn side_of(&self, class: usize) -> Option<i8> {
        if self.positive.binary_search(&class).is_ok() {
            Some(1)
        } else if self.negative.binary_search(&class).is_ok() {
            Some(-1)
        } else {
            None
        }
    }
}

/// Number of balanced bipartitions of `n` classes: `C(n, n/2) / 2` for
/// even `n` (each unordered pair would otherwise count twice), and
/// `C(n, ⌊n/2⌋)` for odd `n` (the sides differ in size, so each pair
/// already counts once). Saturates instead of overflowing.
pub fn bipartition_count(n: usize) -> u128 {
    if n < 2 {
        return 0;
    }
    let k = n / 2;
    let mut c: u128 = 1;
    for i in 0..k {
        let Some(next) = c.checked_mul((n - i) as u128) else {
            return u128::MAX;
        };
        c = next / (i as u128 + 1);
    }
    if n % 2 == 0 {
        c / 2
    } else {
        c
    }
}

/// All balanced bipartitions of `classes`, in lexicographic order of the
/// enumerated side. For even `n` the enumerated side is the one holding
/// the smallest class id (visiting each unordered pair once); for odd `n`
/// it is the ⌊n/2⌋-sized side.
pub fn enumerate_bipartitions(classes: &[usize]) -> Result<Vec<ClassPartition>> {
    let mut ids = classes.to_vec();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput("duplicate class id".into()));
    }
    let n = ids.len();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "bipartitions need at least 2 classes".into(),
        ));
    }
    let half = n / 2;
    let complement = |side: &[usize]| -> Vec<usize> {
        ids.iter()
            .copied()
            .filter(|c| side.binary_search(c).is_err())
            .collect()
    };
    let mut out = Vec::new();
    if n % 2 == 0 {
        for rest in ids[1..].iter().copied().combinations(half - 1) {
            let mut side = Vec::with_capacity(half);
            side.push(ids[0]);
            side.extend(rest);
            let other = complement(&side);
            out.push(ClassPartition::new(side, other)?);
        }
    } else {
        for side in ids.iter().copied().combinations(half) {
            let other = complement(&side);
            out.push(ClassPartition::new(side, other)?);
        }
    }
    Ok(out)
}

/// What the cross-validation stage optimizes when ranking candidate
/// splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    /// `(tp + tn) / total`, the default.
    Accuracy,
    /// Side-symmetric macro F1; preferable on heavily skewed data, where
    /// accuracy rewards dumping everything on the majority side.
    F1Macro,
}

impl SelectionMetric {
    pub fn score(&self, c: &BinaryConfusion) -> Result<f64> {
        match self {
            SelectionMetric::Accuracy => accuracy(c),
            SelectionMetric::F1Macro => Ok(f1_macro_from_split(c)),
        }
    }
}

/// Everything that shapes a tree build.
#[derive(Debug, Clone)]
pub struct BuildConfig {
    pub mu: f64,
    /// Fraction of each class held out once per build for scoring
    /// candidate splits.
    pub validation_fraction: f64,
    pub seed: u64,
    pub selection_metric: SelectionMetric,
    /// When set, nodes whose candidate count exceeds this evaluate a
    /// seeded uniform sample instead of the full enumeration, and the
    /// build is flagged non-exhaustive.
    pub max_candidates: Option<usize>,
    pub shard: ShardConfig,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            mu: 1.0,
            validation_fraction: 0.2,
            seed: 0,
            selection_metric: SelectionMetric::Accuracy,
            max_candidates: None,
            shard: ShardConfig::default(),
        }
    }
}

impl BuildConfig {
    fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() || self.mu <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "mu must be positive and finite, got {}",
                self.mu
            )));
        }
        if !self.validation_fraction.is_finite()
            || self.validation_fraction <= 0.0
            || self.validation_fraction >= 1.0
        {
            return Err(Error::InvalidParameter(format!(
                "validation fraction must be in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if self.max_candidates == Some(0) {
            return Err(Error::InvalidParameter(
                "max candidates must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn fingerprint(&self) -> ConfigFingerprint {
        ConfigFingerprint {
            mu: self.mu,
            seed: self.seed,
            metric: self.selection_metric,
            validation_fraction: self.validation_fraction,
        }
    }
}

/// The build settings a serialized tree records about itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFingerprint {
    pub mu: f64,
    pub seed: u64,
    pub metric: SelectionMetric,
    pub validation_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        class: usize,
    },
    Internal {
        plane: SvmPlane,
        partition: ClassPartition,
        /// Binary accuracy of `plane` on this node's validation rows,
        /// whatever metric drove the selection.
        validation_accuracy: f64,
        pos: Box<TreeNode>,
        neg: Box<TreeNode>,
    },
}

impl TreeNode {
    /// Edges on the longest root-to-leaf path; a lone leaf has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { pos, neg, .. } => 1 + pos.depth().max(neg.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { pos, neg, .. } => pos.leaf_count() + neg.leaf_count(),
        }
    }

    pub fn internal_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { pos, neg, .. } => 1 + pos.internal_count() + neg.internal_count(),
        }
    }

    /// Leaf classes in left-to-right order.
    pub fn leaf_classes(&self) -> Vec<usize> {
        match self {
            TreeNode::Leaf { class } => vec![*class],
            TreeNode::Internal { pos, neg, .. } => {
                let mut classes = pos.leaf_classes();
                classes.extend(neg.leaf_classes());
                classes
            }
        }
    }
}

/// A trained bipartition tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmTree {
    pub classes: Vec<usize>,
    pub feature_count: usize,
    pub config: ConfigFingerprint,
    pub root: TreeNode,
}

impl SvmTree {
    /// Route `x` from the root to a leaf: positive sign goes to the
    /// positive child. Returns the leaf class and how many planes were
    /// evaluated on the way down (at most ⌈log₂ n⌉).
    pub fn predict(&self, x: &[f64]) -> Result<(usize, u32)> {
        if x.len() != self.feature_count {
            return Err(Error::DimensionMismatch(format!(
                "tree expects {} features, sample has {}",
                self.feature_count,
                x.len()
            )));
        }
        let mut node = &self.root;
        let mut evaluated = 0u32;
        loop {
            match node {
                TreeNode::Leaf { class } => return Ok((*class, evaluated)),
                TreeNode::Internal { plane, pos, neg, .. } => {
                    evaluated += 1;
                    node = if plane.classify_sign(x)? == 1 { pos } else { neg };
                }
            }
        }
    }

    /// Element-wise [`predict`](Self::predict) over a dataset's rows,
    /// aggregating the evaluation count and wall time.
    pub fn predict_batch(&self, data: &Dataset) -> Result<BatchPrediction> {
        if data.feature_count() != self.feature_count {
            return Err(Error::DimensionMismatch(format!(
                "tree expects {} features, dataset has {}",
                self.feature_count,
                data.feature_count()
            )));
        }
        let start = Instant::now();
        let mut labels = Vec::with_capacity(data.len());
        let mut planes_evaluated = 0u64;
        for i in 0..data.len() {
            let (class, evals) = self.predict(data.row(i))?;
            labels.push(class);
            planes_evaluated += u64::from(evals);
        }
        Ok(BatchPrediction {
            labels,
            planes_evaluated,
            elapsed: start.elapsed(),
        })
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn leaf_count(&self) -> usize {
        self.root.leaf_count()
    }

    pub fn internal_count(&self) -> usize {
        self.root.internal_count()
    }
}

/// Counters from one build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BuildStats {
    /// Total candidate planes trained across all nodes.
    pub planes_trained: u64,
    /// True when any node evaluated a sampled subset of its candidates
    /// instead of the exhaustive enumeration.
    pub sampled_candidates: bool,
}

/// A tree together with its build counters.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltTree {
    pub tree: SvmTree,
    pub stats: BuildStats,
}

/// Index of the best `(candidate index, score)` entry: highest score,
/// ties to the lowest index, so equal-scoring candidates resolve to the
/// lexicographically smallest partition.
pub fn select_best(scores: &[(usize, f64)]) -> Result<usize> {
    let (mut best_index, mut best_score) = *scores.first().ok_or_else(|| {
        Error::DegenerateInput("cannot select from an empty score list".into())
    })?;
    for &(index, score) in &scores[1..] {
        if score > best_score {
            best_index = index;
            best_score = score;
        }
    }
    Ok(best_index)
}

struct BuildContext<'a> {
    data: &'a Dataset,
    config: &'a BuildConfig,
    rng: ChaCha8Rng,
    planes_trained: u64,
    sampled: bool,
}

/// Candidates for one node: the exhaustive enumeration, or a seeded
/// sample of distinct partitions when `max_candidates` caps it.
fn candidate_partitions(ctx: &mut BuildContext<'_>, classes: &[usize]) -> Result<Vec<ClassPartition>> {
    let total = bipartition_count(classes.len());
    match ctx.config.max_candidates {
        Some(cap) if (cap as u128) < total => {
            ctx.sampled = true;
            sample_bipartitions(classes, cap, &mut ctx.rng)
        }
        _ => enumerate_bipartitions(classes),
    }
}

fn sample_bipartitions(
    classes: &[usize],
    cap: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ClassPartition>> {
    let mut ids = classes.to_vec();
    ids.sort_unstable();
    let n = ids.len();
    let half = n / 2;
    // key = the enumerated side under the same convention as
    // enumerate_bipartitions, so duplicates collapse
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    while (seen.len() as u128) < cap as u128 {
        let picked = rand::seq::index::sample(rng, n, half);
        let mut side: Vec<usize> = picked.iter().map(|i| ids[i]).collect();
        side.sort_unstable();
        if n % 2 == 0 && side.binary_search(&ids[0]).is_err() {
            side = ids
                .iter()
                .copied()
                .filter(|c| side.binary_search(c).is_err())
                .collect();
        }
        seen.insert(side);
    }
    seen.into_iter()
        .map(|side| {
            let other: Vec<usize> = ids
                .iter()
                .copied()
                .filter(|c| side.binary_search(c).is_err())
                .collect();
            ClassPartition::new(side, other)
        })
        .collect()
}

fn build_node(
    ctx: &mut BuildContext<'_>,
    train_rows: &[usize],
    validation_rows: &[usize],
    classes: &[usize],
) -> Result<TreeNode> {
    if classes.len() == 1 {
        return Ok(TreeNode::Leaf { class: classes[0] });
    }
    let mut train_seen = vec![false; ctx.data.class_count()];
    for &r in train_rows {
        train_seen[ctx.data.label(r)] = true;
    }
    let mut validation_seen = vec![false; ctx.data.class_count()];
    for &r in validation_rows {
        validation_seen[ctx.data.label(r)] = true;
    }
    for &c in classes {
        if !train_seen[c] {
            return Err(Error::InvalidInput(format!(
                "class '{}' has no training rows at this node",
                ctx.data.class_names()[c]
            )));
        }
        if !validation_seen[c] {
            return Err(Error::InvalidInput(format!(
                "class '{}' has no validation rows at this node",
                ctx.data.class_names()[c]
            )));
        }
    }

    let candidates = candidate_partitions(ctx, classes)?;
    let shards = ctx.config.shard.shards;
    let backend = &ctx.config.shard.backend;
    let mut scores = Vec::with_capacity(candidates.len());
    let mut trained: Vec<Option<(SvmPlane, BinaryConfusion)>> =
        Vec::with_capacity(candidates.len());
    for (index, partition) in candidates.iter().enumerate() {
        let train_view = LabeledView::from_partition(ctx.data, train_rows, partition)?;
        let train_plan = shard_rows(train_view.len(), shards)?;
        let plane = run_training_job(&train_view, &train_plan, backend, ctx.config.mu)?;
        ctx.planes_trained += 1;

        let validation_view = LabeledView::from_partition(ctx.data, validation_rows, partition)?;
        let validation_plan = shard_rows(validation_view.len(), shards)?;
        let confusion = run_confusion_job(&plane, &validation_view, &validation_plan, backend)?;
        scores.push((index, ctx.config.selection_metric.score(&confusion)?));
        trained.push(Some((plane, confusion)));
    }

    let best = select_best(&scores)?;
    let (plane, confusion) = trained[best].take().expect("selected candidate trained");
    let validation_accuracy = accuracy(&confusion)?;
    let partition = candidates[best].clone();

    let split_rows = |rows: &[usize], side: &[usize]| -> Vec<usize> {
        let mut member = vec![false; ctx.data.class_count()];
        for &c in side {
            member[c] = true;
        }
        rows.iter()
            .copied()
            .filter(|&r| member[ctx.data.label(r)])
            .collect()
    };
    let pos_train = split_rows(train_rows, partition.positive());
    let pos_validation = split_rows(validation_rows, partition.positive());
    let neg_train = split_rows(train_rows, partition.negative());
    let neg_validation = split_rows(validation_rows, partition.negative());

    let pos = build_node(ctx, &pos_train, &pos_validation, partition.positive())?;
    let neg = build_node(ctx, &neg_train, &neg_validation, partition.negative())?;
    Ok(TreeNode::Internal {
        plane,
        partition,
        validation_accuracy,
        pos: Box::new(pos),
        neg: Box::new(neg),
    })
}

/// Build one node (and its subtree) from explicit train/validation views
/// over the same dataset. [`build_tree`] is the usual entry point; this
/// one exists for callers that manage their own validation split.
pub fn train_node(
    train: &DatasetView<'_>,
    validation: &DatasetView<'_>,
    classes: &[usize],
    config: &BuildConfig,
) -> Result<(TreeNode, BuildStats)> {
    config.validate()?;
    if !std::ptr::eq(train.dataset(), validation.dataset()) {
        return Err(Error::InvalidInput(
            "train and validation views must share one dataset".into(),
        ));
    }
    if classes.is_empty() {
        return Err(Error::InvalidParameter("no classes to split".into()));
    }
    let mut ctx = BuildContext {
        data: train.dataset(),
        config,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        planes_trained: 0,
        sampled: false,
    };
    let node = build_node(&mut ctx, train.row_indices(), validation.row_indices(), classes)?;
    Ok((
        node,
        BuildStats {
            planes_trained: ctx.planes_trained,
            sampled_candidates: ctx.sampled,
        },
    ))
}

/// Build a tree over every class of `data`: hold out
/// `validation_fraction` of each class once (seeded), then recursively
/// split the class set, scoring candidates on the held-out rows.
pub fn build_tree(data: &Dataset, config: &BuildConfig) -> Result<BuiltTree> {
    config.validate()?;
    let n = data.class_count();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "tree building needs at least 2 classes, got {n}"
        )));
    }
    for (c, count) in data.class_row_counts().iter().enumerate() {
        if *count < 2 {
            return Err(Error::InvalidInput(format!(
                "class '{}' has {count} row(s); every class needs at least 2",
                data.class_names()[c]
            )));
        }
    }
    let (train, validation) = stratified_split(data, config.validation_fraction, config.seed)?;
    let classes: Vec<usize> = (0..n).collect();
    let (root, stats) = train_node(&train, &validation, &classes, config)?;
    Ok(BuiltTree {
        tree: SvmTree {
            classes,
            feature_count: data.feature_count(),
            config: config.fingerprint(),
            root,
        },
        stats,
    })
}
