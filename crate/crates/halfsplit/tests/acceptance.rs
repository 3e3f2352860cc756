//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured numbers (run with `--nocapture` to see
//! them). Tolerances are pinned here, not configurable.

mod common;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use halfsplit::baselines::{train_ovo, train_ovr};
use halfsplit::data::{
    apply_standardizer, fit_standardizer, generate_synthetic, load_csv, stratified_split,
    CenterScheme, CsvSchema, Dataset, SyntheticSpec,
};
use halfsplit::metrics::{f1_macro_from_split, multiclass_accuracy, MulticlassConfusion};
use halfsplit::model::{ModelFile, TrainedModel};
use halfsplit::shard::{
    run_confusion_job, run_training_job, shard_rows, Backend, LabeledView, ShardConfig,
};
use halfsplit::svm::{accumulate_shard, solve_plane};
use halfsplit::tree::{
    build_tree, enumerate_bipartitions, BuildConfig, SelectionMetric, TreeNode,
};

fn serial_shards(shards: usize) -> ShardConfig {
    ShardConfig {
        shards,
        backend: Backend::Serial,
    }
}

fn serial_build() -> BuildConfig {
    BuildConfig {
        shard: serial_shards(2),
        ..BuildConfig::default()
    }
}

/// 1. solve_plane matches the explicit dense-inverse oracle on 200 random
/// instances (m <= 50, d <= 5, mu in {0.1, 1, 10}) within 1e-8 relative
/// per coefficient.
#[test]
fn acceptance_1_solver_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC1);
    let mut worst = 0.0f64;
    for instance in 0..200 {
        let m = rng.random_range(1..=50);
        let d = rng.random_range(1..=5);
        let mu = [0.1, 1.0, 10.0][instance % 3];
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let signs: Vec<i8> = (0..m)
            .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
            .collect();
        let acc = accumulate_shard(rows.iter().map(|r| &r[..]), &signs, d).unwrap();
        let plane = solve_plane(&acc, mu).unwrap();
        let (w_oracle, gamma_oracle) = common::oracle_plane(&acc, mu);
        for (got, want) in plane.w.iter().chain([&plane.gamma]).zip(
            w_oracle.iter().chain([&gamma_oracle]),
        ) {
            let rel = (got - want).abs() / (1.0 + want.abs());
            worst = worst.max(rel);
            assert!(
                rel <= 1e-8,
                "instance {instance}: coefficient {got} vs oracle {want}"
            );
        }
    }
    println!("acceptance 1 solver-oracle-equivalence: PASS (200 instances, worst rel err {worst:.3e})");
}

/// 2. Shard invariance on a fixed seeded dataset (m = 1000, d = 6):
/// k in {1,2,4,8,16} agree with k = 1 within 1e-9 relative, and serial vs
/// threaded backends are bit-identical.
#[test]
fn acceptance_2_shard_invariance() {
    let data = generate_synthetic(&SyntheticSpec {
        class_counts: vec![500, 500],
        feature_count: 6,
        scheme: CenterScheme::HypercubeCorners { radius: 3.0 },
        noise: 1.5,
        seed: 123,
    })
    .unwrap();
    assert_eq!(data.len(), 1000);
    let rows: Vec<usize> = (0..data.len()).collect();
    let view = LabeledView::from_sides(&data, &rows, &[0], &[1]).unwrap();
    let reference = run_training_job(
        &view,
        &shard_rows(view.len(), 1).unwrap(),
        &Backend::Serial,
        1.0,
    )
    .unwrap();
    let mut worst = 0.0f64;
    for k in [1usize, 2, 4, 8, 16] {
        let plan = shard_rows(view.len(), k).unwrap();
        let serial = run_training_job(&view, &plan, &Backend::Serial, 1.0).unwrap();
        for (got, want) in serial
            .w
            .iter()
            .chain([&serial.gamma])
            .zip(reference.w.iter().chain([&reference.gamma]))
        {
            let rel = (got - want).abs() / (1.0 + want.abs());
            worst = worst.max(rel);
            assert!(rel <= 1e-9, "k={k}: {got} vs {want}");
        }
        let threaded =
            run_training_job(&view, &plan, &Backend::Threaded { threads: 4 }, 1.0).unwrap();
        assert_eq!(serial, threaded, "backends disagree at k={k}");
    }
    println!("acceptance 2 shard-invariance: PASS (k in {{1,2,4,8,16}}, worst rel dev {worst:.3e}, backends bit-identical)");
}

/// 3. Candidate-count law: 1, 3, 3, 10, 126 balanced bipartitions for
/// n = 2, 3, 4, 5, 10, cross-checked against exhaustive subset
/// enumeration.
#[test]
fn acceptance_3_candidate_count_law() {
    let expected = [(2usize, 1usize), (3, 3), (4, 3), (5, 10), (10, 126)];
    for &(n, count) in &expected {
        let classes: Vec<usize> = (0..n).collect();
        let partitions = enumerate_bipartitions(&classes).unwrap();
        assert_eq!(partitions.len(), count, "count for n={n}");

        // independent oracle: walk all 2^n subsets, keep balanced ones,
        // dedupe unordered pairs
        let mut oracle: BTreeSet<Vec<usize>> = BTreeSet::new();
        for mask in 1u32..(1u32 << n) - 1 {
            let side: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
            let other_len = n - side.len();
            if side.len().abs_diff(other_len) > 1 {
                continue;
            }
            let key = if side.contains(&0) {
                side
            } else {
                (0..n).filter(|&i| mask >> i & 1 == 0).collect()
            };
            oracle.insert(key);
        }
        assert_eq!(oracle.len(), count, "oracle count for n={n}");
        let enumerated: BTreeSet<Vec<usize>> = partitions
            .iter()
            .map(|p| p.positive().to_vec())
            .collect();
        assert_eq!(enumerated, oracle, "partition sets differ for n={n}");
    }
    println!("acceptance 3 candidate-count-law: PASS (counts 1,3,3,10,126 for n=2,3,4,5,10)");
}

/// 4. Depth/evaluation law: separable synthetic datasets with n in 2..=16
/// build trees of depth exactly ceil(log2 n), every prediction evaluates
/// at most that many planes, and the baseline counters read n(n-1)/2 and
/// n planes.
#[test]
fn acceptance_4_depth_and_evaluation_law() {
    for n in 2..=16usize {
        let data = generate_synthetic(&SyntheticSpec {
            class_counts: vec![12; n],
            feature_count: n.max(2),
            scheme: CenterScheme::SimplexVertices { scale: 12.0 },
            noise: 0.8,
            seed: 1000 + n as u64,
        })
        .unwrap();
        let config = BuildConfig {
            validation_fraction: 0.25,
            shard: serial_shards(1),
            ..BuildConfig::default()
        };
        let built = build_tree(&data, &config).unwrap();
        let expected_depth = (n as f64).log2().ceil() as usize;
        assert_eq!(built.tree.depth(), expected_depth, "depth for n={n}");

        let batch = built.tree.predict_batch(&data).unwrap();
        assert_eq!(batch.labels.len(), data.len());
        for i in 0..data.len() {
            let (_, evals) = built.tree.predict(data.row(i)).unwrap();
            assert!(
                evals as usize <= expected_depth,
                "n={n}: {evals} evaluations exceed depth {expected_depth}"
            );
        }

        let ovo = train_ovo(&data, 1.0, &serial_shards(1)).unwrap();
        assert_eq!(ovo.plane_count(), n * (n - 1) / 2, "ovo planes for n={n}");
        let ovr = train_ovr(&data, 1.0, &serial_shards(1)).unwrap();
        assert_eq!(ovr.plane_count(), n, "ovr planes for n={n}");
        assert_eq!(
            ovo.predict_batch(&data).unwrap().planes_evaluated,
            (data.len() * n * (n - 1) / 2) as u64
        );
        assert_eq!(
            ovr.predict_batch(&data).unwrap().planes_evaluated,
            (data.len() * n) as u64
        );
    }
    println!("acceptance 4 depth-and-evaluation-law: PASS (n=2..16: depth = ceil(log2 n), counters n(n-1)/2 and n)");
}

fn evaluate_accuracy(model: &TrainedModel, test: &Dataset) -> f64 {
    let batch = model.predict_batch(test).unwrap();
    let confusion = MulticlassConfusion::from_pairs(
        test.class_count(),
        test.labels().iter().copied().zip(batch.labels.iter().copied()),
    )
    .unwrap();
    multiclass_accuracy(&confusion).unwrap()
}

/// 5. Iris floor: canonical Iris, seed 0, defaults with standardization,
/// one-third stratified hold-out (99 train / 51 test): tree, OvO, and OvR
/// test accuracy all at least 0.90.
#[test]
fn acceptance_5_iris_accuracy() {
    let iris = load_csv(common::iris_path(), &CsvSchema::default()).unwrap();
    assert_eq!((iris.len(), iris.feature_count(), iris.class_count()), (150, 4, 3));
    let (train_view, test_view) = stratified_split(&iris, 1.0 / 3.0, 0).unwrap();
    assert_eq!(train_view.len(), 99);
    assert_eq!(test_view.len(), 51);
    let standardizer = fit_standardizer(&train_view).unwrap();
    let train = apply_standardizer(&standardizer, &train_view).unwrap();
    let test = apply_standardizer(&standardizer, &test_view).unwrap();

    let config = serial_build();
    let tree = TrainedModel::Tree(build_tree(&train, &config).unwrap().tree);
    let ovo = TrainedModel::Ovo(train_ovo(&train, config.mu, &config.shard).unwrap());
    let ovr = TrainedModel::Ovr(train_ovr(&train, config.mu, &config.shard).unwrap());

    let tree_acc = evaluate_accuracy(&tree, &test);
    let ovo_acc = evaluate_accuracy(&ovo, &test);
    let ovr_acc = evaluate_accuracy(&ovr, &test);
    let verdict = |acc: f64| if acc >= 0.90 { "pass" } else { "FAIL" };
    println!(
        "acceptance 5 iris-accuracy: tree {tree_acc:.4} ({}), ovo {ovo_acc:.4} ({}), ovr {ovr_acc:.4} ({}), floor 0.90",
        verdict(tree_acc),
        verdict(ovo_acc),
        verdict(ovr_acc),
    );
    assert!(tree_acc >= 0.90, "tree accuracy {tree_acc} below the 0.90 floor");
    assert!(ovo_acc >= 0.90, "ovo accuracy {ovo_acc} below the 0.90 floor");
    // Known red: a one-vs-rest scheme built on this least-squares solver
    // masks the middle Iris class (the versicolor-vs-rest plane comes out
    // nearly flat, so the raw argmax almost never picks it), landing near
    // 0.80-0.85 on most stratified splits. Reaching the floor would take a
    // hinge-loss baseline or a changed decision rule, both out of scope.
    assert!(ovr_acc >= 0.90, "ovr accuracy {ovr_acc} below the 0.90 floor");
}

/// 6. Prediction-cost advantage: 10 classes, 100k test rows, single
/// thread — the tree spends at most 4 plane evaluations per sample
/// against one-vs-one's 45, and at most half the wall-clock time.
#[test]
fn acceptance_6_prediction_cost_advantage() {
    let train = generate_synthetic(&SyntheticSpec {
        class_counts: vec![200; 10],
        feature_count: 6,
        scheme: CenterScheme::HypercubeCorners { radius: 6.0 },
        noise: 1.0,
        seed: 60,
    })
    .unwrap();
    let test = generate_synthetic(&SyntheticSpec {
        class_counts: vec![10_000; 10],
        feature_count: 6,
        scheme: CenterScheme::HypercubeCorners { radius: 6.0 },
        noise: 1.0,
        seed: 61,
    })
    .unwrap();
    assert_eq!(test.len(), 100_000);

    let config = BuildConfig {
        shard: serial_shards(1),
        ..BuildConfig::default()
    };
    let tree = build_tree(&train, &config).unwrap().tree;
    let ovo = train_ovo(&train, 1.0, &serial_shards(1)).unwrap();
    assert_eq!(ovo.plane_count(), 45);

    let tree_batch = tree.predict_batch(&test).unwrap();
    let ovo_batch = ovo.predict_batch(&test).unwrap();
    let per_sample = tree_batch.planes_evaluated as f64 / test.len() as f64;
    assert!(per_sample <= 4.0, "tree evaluates {per_sample} planes per sample");
    assert_eq!(ovo_batch.planes_evaluated, 45 * test.len() as u64);

    // best of three timed passes each, to shrug off scheduler noise from
    // concurrently running tests
    let mut tree_secs = tree_batch.elapsed.as_secs_f64();
    let mut ovo_secs = ovo_batch.elapsed.as_secs_f64();
    for _ in 0..2 {
        tree_secs = tree_secs.min(tree.predict_batch(&test).unwrap().elapsed.as_secs_f64());
        ovo_secs = ovo_secs.min(ovo.predict_batch(&test).unwrap().elapsed.as_secs_f64());
    }
    assert!(
        tree_secs <= 0.5 * ovo_secs,
        "tree {tree_secs:.3}s not within half of ovo {ovo_secs:.3}s"
    );
    println!(
        "acceptance 6 prediction-cost-advantage: PASS ({per_sample:.2} planes/sample vs 45; {tree_secs:.3}s vs {ovo_secs:.3}s)"
    );
}

/// 7. Skew behavior: on a 90/5/5 three-class set whose majority class is
/// trivially isolable, selection with the F1 metric picks the split whose
/// brute-force F1 score is maximal; if the accuracy-driven choice ever
/// differs, the F1 choice must recover the minority classes at least as
/// well.
#[test]
fn acceptance_7_skew_selection() {
    // majority cloud far left; the two minority clouds overlap each other
    // on the right, so splits that separate them score below the
    // majority-isolating split
    let counts = [900usize, 50, 50];
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let centers = [[-8.0, 0.0], [8.0, 1.0], [8.0, -1.0]];
    for (class, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            features.push(centers[class][0] + rng.random_range(-2.0..2.0));
            features.push(centers[class][1] + rng.random_range(-2.0..2.0));
            labels.push(class);
        }
    }
    let data = Dataset::new(
        features,
        2,
        labels,
        vec!["majority".into(), "minor_a".into(), "minor_b".into()],
    )
    .unwrap();

    let config = BuildConfig {
        selection_metric: SelectionMetric::F1Macro,
        shard: serial_shards(1),
        ..BuildConfig::default()
    };

    // brute-force score table over the same train/validation split the
    // build uses
    let (train, validation) = stratified_split(&data, config.validation_fraction, config.seed).unwrap();
    let candidates = enumerate_bipartitions(&[0, 1, 2]).unwrap();
    let mut f1_table = Vec::new();
    let mut accuracy_table = Vec::new();
    let mut minority_recall = Vec::new();
    for partition in &candidates {
        let train_view = LabeledView::from_partition(&data, train.row_indices(), partition).unwrap();
        let plane = run_training_job(
            &train_view,
            &shard_rows(train_view.len(), 1).unwrap(),
            &Backend::Serial,
            config.mu,
        )
        .unwrap();
        let validation_view =
            LabeledView::from_partition(&data, validation.row_indices(), partition).unwrap();
        let confusion = run_confusion_job(
            &plane,
            &validation_view,
            &shard_rows(validation_view.len(), 1).unwrap(),
            &Backend::Serial,
        )
        .unwrap();
        f1_table.push(f1_macro_from_split(&confusion));
        accuracy_table.push(halfsplit::metrics::accuracy(&confusion).unwrap());
        // recall of the two minority classes under this plane: a minority
        // row counts when it lands on its own partition side
        let mut hit = 0u64;
        let mut total = 0u64;
        for i in 0..validation.len() {
            let class = validation.label(i);
            if class == 0 {
                continue;
            }
            let side = partition.side_of(class).unwrap();
            total += 1;
            if plane.classify_sign(validation.row(i)).unwrap() == side {
                hit += 1;
            }
        }
        minority_recall.push(hit as f64 / total as f64);
    }

    let built = build_tree(&data, &config).unwrap();
    let TreeNode::Internal { partition, .. } = &built.tree.root else {
        panic!("root must be internal");
    };
    let selected = candidates.iter().position(|p| p == partition).unwrap();
    let best_f1 = f1_table.iter().cloned().fold(f64::MIN, f64::max);
    assert_eq!(
        f1_table[selected], best_f1,
        "selected split's F1 {} is not maximal in {f1_table:?}",
        f1_table[selected]
    );

    // accuracy-driven selection for the recall comparison
    let accuracy_choice = accuracy_table
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap();
    if accuracy_choice != selected {
        assert!(
            minority_recall[selected] > minority_recall[accuracy_choice],
            "f1 choice does not improve minority recall: {minority_recall:?}"
        );
    }
    println!(
        "acceptance 7 skew-selection: PASS (selected candidate {selected}, f1 table {:?}, accuracy choice {accuracy_choice}{})",
        f1_table
            .iter()
            .map(|v| (v * 1e4).round() / 1e4)
            .collect::<Vec<_>>(),
        if accuracy_choice == selected { ", selections coincide" } else { ", selections differ" }
    );
}

/// 8. Determinism & persistence: identical (data, config, seed) builds
/// serialize byte-identically — across backends too — and a saved model
/// reloads to bit-identical predictions on 1000 rows.
#[test]
fn acceptance_8_determinism_and_persistence() {
    let data = generate_synthetic(&SyntheticSpec {
        class_counts: vec![60; 4],
        feature_count: 4,
        scheme: CenterScheme::SimplexVertices { scale: 10.0 },
        noise: 0.7,
        seed: 80,
    })
    .unwrap();
    let serial = BuildConfig {
        shard: serial_shards(4),
        ..BuildConfig::default()
    };
    let threaded = BuildConfig {
        shard: ShardConfig {
            shards: 4,
            backend: Backend::Threaded { threads: 4 },
        },
        ..BuildConfig::default()
    };

    let first = build_tree(&data, &serial).unwrap();
    let second = build_tree(&data, &serial).unwrap();
    let third = build_tree(&data, &threaded).unwrap();
    let to_bytes = |tree| {
        ModelFile::new(TrainedModel::Tree(tree), data.class_names().to_vec(), None)
            .to_json()
            .unwrap()
    };
    let bytes_first = to_bytes(first.tree.clone());
    assert_eq!(bytes_first, to_bytes(second.tree), "repeat build differs");
    assert_eq!(bytes_first, to_bytes(third.tree), "threaded build differs");

    let probe = generate_synthetic(&SyntheticSpec {
        class_counts: vec![250; 4],
        feature_count: 4,
        scheme: CenterScheme::SimplexVertices { scale: 10.0 },
        noise: 2.5,
        seed: 81,
    })
    .unwrap();
    assert_eq!(probe.len(), 1000);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let file = ModelFile::new(
        TrainedModel::Tree(first.tree),
        data.class_names().to_vec(),
        None,
    );
    file.save(&path).unwrap();
    let loaded = ModelFile::load(&path).unwrap();
    assert_eq!(file, loaded);
    let before = file.model.predict_batch(&probe).unwrap();
    let after = loaded.model.predict_batch(&probe).unwrap();
    assert_eq!(before.labels, after.labels);
    assert_eq!(before.planes_evaluated, after.planes_evaluated);
    println!(
        "acceptance 8 determinism-and-persistence: PASS (byte-identical builds incl. threaded; {} rows round-trip)",
        probe.len()
    );
}
