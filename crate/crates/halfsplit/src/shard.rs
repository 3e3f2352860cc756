//! Deterministic sharded execution of the Gram-accumulation and
//! confusion-count jobs.
//!
//! Map tasks own disjoint contiguous row ranges and may run on any
//! backend; the reduce step always combines partials left-to-right by
//! shard index. Float addition is order-sensitive, so pinning the reduce
//! order is what makes job results depend only on the plan, never on
//! scheduling.

use std::ops::Range;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::BinaryConfusion;
use crate::svm::{solve_plane, GramAccumulator, SvmPlane};
use crate::tree::ClassPartition;

/// Contiguous half-open row ranges covering `[0, m)`, sizes differing by
/// at most one. Trailing ranges are empty when there are more shards than
/// rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardPlan {
    ranges: Vec<Range<usize>>,
}

impl ShardPlan {
    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn num_shards(&self) -> usize {
        self.ranges.len()
    }

    /// Total rows covered by the plan.
    pub fn covered(&self) -> usize {
        self.ranges.iter().map(Range::len).sum()
    }
}

/// Split `row_count` rows into `shards` near-equal contiguous ranges:
/// the first `row_count % shards` ranges take the ceiling size, the rest
/// the floor. Deterministic in its arguments.
pub fn shard_rows(row_count: usize, shards: usize) -> Result<ShardPlan> {
    if shards == 0 {
        return Err(Error::InvalidParameter(
            "shard count must be at least 1".into(),
        ));
    }
    let base = row_count / shards;
    let extra = row_count % shards;
    let mut ranges = Vec::with_capacity(shards);
    let mut start = 0;
    for i in 0..shards {
        let size = base + usize::from(i < extra);
        ranges.push(start..start + size);
        start += size;
    }
    Ok(ShardPlan { ranges })
}

/// Where map tasks run. Either backend yields bit-identical job results;
/// only wall time differs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Backend {
    Serial,
    Threaded { threads: usize },
}

impl Backend {
    /// Threaded over all available cores.
    pub fn threaded_default() -> Self {
        Backend::Threaded {
            threads: available_cores(),
        }
    }
}

fn available_cores() -> usize {
    std::thread::available_parallelism().map_or(1, std::num::NonZeroUsize::get)
}

/// Shard count and backend used by every training / scoring job.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardConfig {
    pub shards: usize,
    pub backend: Backend,
}

impl Default for ShardConfig {
    /// Shards = available cores capped at 16, threaded backend.
    fn default() -> Self {
        ShardConfig {
            shards: available_cores().min(16),
            backend: Backend::threaded_default(),
        }
    }
}

/// Run independent map closures and return their results in task-index
/// order regardless of backend or completion order. The first failure by
/// task index aborts the job.
pub fn run_parallel<T, F>(tasks: Vec<F>, backend: &Backend) -> Result<Vec<T>>
where
    T: Send,
    F: FnOnce() -> Result<T> + Send,
{
    let worker_count = match backend {
        Backend::Serial => 1,
        Backend::Threaded { threads } => (*threads).clamp(1, tasks.len().max(1)),
    };
    if worker_count <= 1 || tasks.len() <= 1 {
        return tasks.into_iter().map(|task| task()).collect();
    }

    let task_count = tasks.len();
    let slots: Vec<Mutex<Option<F>>> = tasks.into_iter().map(|t| Mutex::new(Some(t))).collect();
    let next = AtomicUsize::new(0);
    let outputs: Mutex<Vec<(usize, Result<T>)>> = Mutex::new(Vec::with_capacity(task_count));

    std::thread::scope(|scope| {
        for _ in 0..worker_count {
            scope.spawn(|| {
                let mut local = Vec::new();
                loop {
                    let index = next.fetch_add(1, Ordering::Relaxed);
                    if index >= task_count {
                        break;
                    }
                    let task = slots[index]
                        .lock()
                        .expect("task slot poisoned")
                        .take()
                        .expect("each task claimed once");
                    local.push((index, task()));
                }
                outputs.lock().expect("output lock poisoned").extend(local);
            });
        }
    });

    let mut ordered: Vec<Option<Result<T>>> = (0..task_count).map(|_| None).collect();
    for (index, result) in outputs.into_inner().expect("output lock poisoned") {
        ordered[index] = Some(result);
    }
    let mut out = Vec::with_capacity(task_count);
    for slot in ordered {
        out.push(slot.expect("every task ran")?);
    }
    Ok(out)
}

/// Dataset rows carrying ±1 signs induced by a class split; rows whose
/// class is on neither side are excluded.
#[derive(Debug, Clone)]
pub struct LabeledView<'a> {
    data: &'a Dataset,
    rows: Vec<usize>,
    signs: Vec<i8>,
}

impl<'a> LabeledView<'a> {
    /// Filter `candidate_rows` down to classes on either side: `positive`
    /// classes sign +1, `negative` classes sign -1. The sides must be
    /// disjoint but need not be balanced (one-vs-rest uses this too).
    pub fn from_sides(
        data: &'a Dataset,
        candidate_rows: &[usize],
        positive: &[usize],
        negative: &[usize],
    ) -> Result<Self> {
        let mut side = vec![0i8; data.class_count()];
        for &c in positive {
            if c >= data.class_count() {
                return Err(Error::InvalidInput(format!(
                    "class id {c} outside the dataset's {} classes",
                    data.class_count()
                )));
            }
            side[c] = 1;
        }
        for &c in negative {
            if c >= data.class_count() {
                return Err(Error::InvalidInput(format!(
                    "class id {c} outside the dataset's {} classes",
                    data.class_count()
                )));
            }
            if side[c] != 0 {
                return Err(Error::InvalidInput(format!(
                    "class id {c} appears on both sides of the split"
                )));
            }
            side[c] = -1;
        }
        let mut rows = Vec::new();
        let mut signs = Vec::new();
        for &r in candidate_rows {
            if r >= data.len() {
                return Err(Error::InvalidInput(format!(
                    "row {r} outside dataset of {} rows",
                    data.len()
                )));
            }
            let s = side[data.label(r)];
            if s != 0 {
                rows.push(r);
                signs.push(s);
            }
        }
        Ok(LabeledView { data, rows, signs })
    }

    pub fn from_partition(
        data: &'a Dataset,
        candidate_rows: &[usize],
        partition: &ClassPartition,
    ) -> Result<Self> {
        Self::from_sides(data, candidate_rows, partition.positive(), partition.negative())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.data.feature_count()
    }

    /// The i-th included row's features.
    pub fn row(&self, i: usize) -> &[f64] {
        self.data.row(self.rows[i])
    }

    /// The i-th included row's ±1 sign.
    pub fn sign(&self, i: usize) -> i8 {
        self.signs[i]
    }
}

/// Map: per-shard Gram accumulation. Reduce: left-to-right merge, then one
/// SPD solve. Equal to a single-pass accumulate + solve up to float
/// summation order, and bit-identical across backends for a fixed plan.
pub fn run_training_job(
    view: &LabeledView<'_>,
    plan: &ShardPlan,
    backend: &Backend,
    mu: f64,
) -> Result<SvmPlane> {
    if view.is_empty() {
        return Err(Error::DegenerateInput(
            "training view contains no rows".into(),
        ));
    }
    if plan.covered() != view.len() {
        return Err(Error::DimensionMismatch(format!(
            "plan covers {} rows but the view has {}",
            plan.covered(),
            view.len()
        )));
    }
    let d = view.feature_count();
    let tasks: Vec<_> = plan
        .ranges()
        .iter()
        .cloned()
        .map(|range| {
            move || -> Result<GramAccumulator> {
                let mut acc = GramAccumulator::zero(d);
                for i in range {
                    acc.add_row(view.row(i), view.sign(i))?;
                }
                Ok(acc)
            }
        })
        .collect();
    let partials = run_parallel(tasks, backend)?;
    let mut merged = GramAccumulator::zero(d);
    for partial in &partials {
        merged.merge_from(partial)?;
    }
    solve_plane(&merged, mu)
}

/// Map: per-shard TP/TN/FP/FN counts for `plane` against the view's signs
/// (positive = sign +1). Reduce: integer sums in shard order.
pub fn run_confusion_job(
    plane: &SvmPlane,
    view: &LabeledView<'_>,
    plan: &ShardPlan,
    backend: &Backend,
) -> Result<BinaryConfusion> {
    if plane.feature_count() != view.feature_count() {
        return Err(Error::DimensionMismatch(format!(
            "plane has {} features, view has {}",
            plane.feature_count(),
            view.feature_count()
        )));
    }
    if plan.covered() != view.len() {
        return Err(Error::DimensionMismatch(format!(
            "plan covers {} rows but the view has {}",
            plan.covered(),
            view.len()
        )));
    }
    let tasks: Vec<_> = plan
        .ranges()
        .iter()
        .cloned()
        .map(|range| {
            move || -> Result<BinaryConfusion> {
                let mut counts = BinaryConfusion::default();
                for i in range {
                    counts.record(view.sign(i), plane.classify_sign(view.row(i))?);
                }
                Ok(counts)
            }
        })
        .collect();
    let partials = run_parallel(tasks, backend)?;
    let mut total = BinaryConfusion::default();
    for partial in &partials {
        total.absorb(partial);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, CenterScheme, SyntheticSpec};
    use crate::svm::accumulate_shard;

    fn ranges(plan: &ShardPlan) -> Vec<(usize, usize)> {
        plan.ranges().iter().map(|r| (r.start, r.end)).collect()
    }

    #[test]
    fn shard_rows_examples() {
        assert_eq!(ranges(&shard_rows(10, 1).unwrap()), vec![(0, 10)]);
        assert_eq!(
            ranges(&shard_rows(10, 3).unwrap()),
            vec![(0, 4), (4, 7), (7, 10)]
        );
        assert_eq!(
            ranges(&shard_rows(2, 4).unwrap()),
            vec![(0, 1), (1, 2), (2, 2), (2, 2)]
        );
        assert_eq!(shard_rows(0, 3).unwrap().covered(), 0);
        assert!(matches!(
            shard_rows(10, 0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn run_parallel_ordering_and_errors() {
        let empty: Vec<fn() -> Result<i32>> = Vec::new();
        assert_eq!(run_parallel(empty, &Backend::Serial).unwrap(), Vec::<i32>::new());

        let tasks: Vec<_> = (0..20)
            .map(|i| move || -> Result<usize> { Ok(i * i) })
            .collect();
        let out = run_parallel(tasks, &Backend::Threaded { threads: 4 }).unwrap();
        assert_eq!(out, (0..20).map(|i| i * i).collect::<Vec<_>>());

        // the failure with the lowest task index wins
        let tasks: Vec<Box<dyn FnOnce() -> Result<i32> + Send>> = vec![
            Box::new(|| Ok(1)),
            Box::new(|| Err(Error::InvalidInput("first".into()))),
            Box::new(|| Err(Error::InvalidInput("second".into()))),
        ];
        let err = run_parallel(tasks, &Backend::Threaded { threads: 3 }).unwrap_err();
        assert!(err.to_string().contains("first"));
    }

    fn two_class_data() -> Dataset {
        generate_synthetic(&SyntheticSpec {
            class_counts: vec![50, 50],
            feature_count: 3,
            scheme: CenterScheme::HypercubeCorners { radius: 4.0 },
            noise: 1.0,
            seed: 42,
        })
        .unwrap()
    }

    fn full_view(data: &Dataset) -> LabeledView<'_> {
        let rows: Vec<usize> = (0..data.len()).collect();
        LabeledView::from_sides(data, &rows, &[0], &[1]).unwrap()
    }

    #[test]
    fn training_job_matches_direct_solve() {
        let data = two_class_data();
        let view = full_view(&data);
        let plan = shard_rows(view.len(), 4).unwrap();
        let sharded = run_training_job(&view, &plan, &Backend::Serial, 1.0).unwrap();

        let rows: Vec<&[f64]> = (0..view.len()).map(|i| view.row(i)).collect();
        let signs: Vec<i8> = (0..view.len()).map(|i| view.sign(i)).collect();
        let acc = accumulate_shard(rows, &signs, 3).unwrap();
        let direct = solve_plane(&acc, 1.0).unwrap();

        for (a, b) in sharded.w.iter().zip(&direct.w) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
        assert!((sharded.gamma - direct.gamma).abs() <= 1e-9 * (1.0 + direct.gamma.abs()));

        // one shard IS the serial path
        let single = run_training_job(&view, &shard_rows(view.len(), 1).unwrap(), &Backend::Serial, 1.0).unwrap();
        assert_eq!(single, direct);
    }

    #[test]
    fn training_job_shard_invariance() {
        let data = two_class_data();
        let view = full_view(&data);
        let reference =
            run_training_job(&view, &shard_rows(view.len(), 1).unwrap(), &Backend::Serial, 1.0)
                .unwrap();
        for k in 2..=16 {
            let plan = shard_rows(view.len(), k).unwrap();
            let plane = run_training_job(&view, &plan, &Backend::Serial, 1.0).unwrap();
            for (a, b) in plane.w.iter().zip(&reference.w) {
                assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "k={k}");
            }
        }
    }

    #[test]
    fn training_job_two_row_example() {
        let data = Dataset::new(
            vec![1.0, -1.0],
            1,
            vec![0, 1],
            vec!["pos".into(), "neg".into()],
        )
        .unwrap();
        let view = LabeledView::from_sides(&data, &[0, 1], &[0], &[1]).unwrap();
        let plan = shard_rows(2, 2).unwrap();
        let plane = run_training_job(&view, &plan, &Backend::Serial, 1.0).unwrap();
        assert!((plane.w[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(plane.gamma, 0.0);
    }

    #[test]
    fn backends_are_bit_identical() {
        let data = two_class_data();
        let view = full_view(&data);
        let plan = shard_rows(view.len(), 8).unwrap();
        let serial = run_training_job(&view, &plan, &Backend::Serial, 1.0).unwrap();
        for _ in 0..3 {
            let threaded =
                run_training_job(&view, &plan, &Backend::Threaded { threads: 4 }, 1.0).unwrap();
            assert_eq!(serial, threaded);
        }
    }

    #[test]
    fn empty_view_is_degenerate_for_training() {
        let data = two_class_data();
        let view = LabeledView::from_sides(&data, &[], &[0], &[1]).unwrap();
        assert!(matches!(
            run_training_job(&view, &shard_rows(0, 1).unwrap(), &Backend::Serial, 1.0),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn confusion_job_counts() {
        let data = Dataset::new(
            vec![1.0, -1.0],
            1,
            vec![0, 1],
            vec!["pos".into(), "neg".into()],
        )
        .unwrap();
        let plane = SvmPlane {
            w: vec![1.0],
            gamma: 0.0,
            mu: 1.0,
        };
        let view = LabeledView::from_sides(&data, &[0, 1], &[0], &[1]).unwrap();
        let plan = shard_rows(2, 1).unwrap();
        let counts = run_confusion_job(&plane, &view, &plan, &Backend::Serial).unwrap();
        assert_eq!(
            (counts.true_positives, counts.true_negatives, counts.false_positives, counts.false_negatives),
            (1, 1, 0, 0)
        );

        // mislabeled view: same rows, signs flipped
        let flipped = LabeledView::from_sides(&data, &[0, 1], &[1], &[0]).unwrap();
        let counts = run_confusion_job(&plane, &flipped, &plan, &Backend::Serial).unwrap();
        assert_eq!(
            (counts.true_positives, counts.true_negatives, counts.false_positives, counts.false_negatives),
            (0, 0, 1, 1)
        );

        let empty = LabeledView::from_sides(&data, &[], &[0], &[1]).unwrap();
        let counts =
            run_confusion_job(&plane, &empty, &shard_rows(0, 2).unwrap(), &Backend::Serial)
                .unwrap();
        assert_eq!(counts.total(), 0);
    }

    #[test]
    fn confusion_conserves_rows_and_dimension_checked() {
        let data = two_class_data();
        let view = full_view(&data);
        let plane = SvmPlane {
            w: vec![0.5, -0.25, 1.5],
            gamma: 0.1,
            mu: 1.0,
        };
        for k in [1, 3, 7, 16] {
            let plan = shard_rows(view.len(), k).unwrap();
            let counts = run_confusion_job(&plane, &view, &plan, &Backend::Serial).unwrap();
            assert_eq!(counts.total(), view.len() as u64);
        }
        let short = SvmPlane {
            w: vec![1.0],
            gamma: 0.0,
            mu: 1.0,
        };
        assert!(matches!(
            run_confusion_job(&short, &view, &shard_rows(view.len(), 1).unwrap(), &Backend::Serial),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn excluded_classes_never_contribute() {
        let data = generate_synthetic(&SyntheticSpec {
            class_counts: vec![10, 20, 30],
            feature_count: 2,
            scheme: CenterScheme::HypercubeCorners { radius: 3.0 },
            noise: 0.5,
            seed: 5,
        })
        .unwrap();
        let rows: Vec<usize> = (0..data.len()).collect();
        let view = LabeledView::from_sides(&data, &rows, &[0], &[2]).unwrap();
        // class 1's 20 rows are outside the split
        assert_eq!(view.len(), 40);
        let plan = shard_rows(view.len(), 3).unwrap();
        let plane = run_training_job(&view, &plan, &Backend::Serial, 1.0).unwrap();
        let counts = run_confusion_job(&plane, &view, &plan, &Backend::Serial).unwrap();
        assert_eq!(counts.total(), 40);
    }

    #[test]
    fn labeled_view_rejects_overlapping_sides() {
        let data = two_class_data();
        assert!(matches!(
            LabeledView::from_sides(&data, &[0], &[0, 1], &[1]),
            Err(Error::InvalidInput(_))
        ));
    }
}
