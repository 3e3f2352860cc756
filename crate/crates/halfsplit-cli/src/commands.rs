use std::path::Path;
use std::time::Instant;

use halfsplit::baselines::{train_ovo, train_ovr};
use halfsplit::data::{
    apply_standardizer, fit_standardizer, generate_synthetic, load_csv, load_libsvm,
    proportional_counts, stratified_split, CenterScheme, CsvSchema, Dataset, DatasetView,
    LabelColumn, Standardizer, SyntheticSpec,
};
use halfsplit::metrics::{multiclass_accuracy, MulticlassConfusion};
use halfsplit::model::{ModelFile, TrainedModel};
use halfsplit::shard::{Backend, ShardConfig};
use halfsplit::tree::{build_tree, BuildConfig};
use halfsplit::{Error, Result};

use crate::report::{timing_stats, BenchReport, DatasetShape, Environment, MethodReport};
use crate::{DataArgs, DataFormat, ExecArgs, MetricArg, ModelKind, SchemeArg, TrainOptions};

fn csv_schema(args: &DataArgs) -> Result<CsvSchema> {
    let label = if args.label_col == "last" {
        LabelColumn::Last
    } else if let Ok(index) = args.label_col.parse::<usize>() {
        LabelColumn::Index(index)
    } else {
        LabelColumn::Name(args.label_col.clone())
    };
    let mut delim = [0u8; 4];
    let encoded = args.delimiter.encode_utf8(&mut delim).as_bytes();
    if encoded.len() != 1 {
        return Err(Error::InvalidParameter(format!(
            "delimiter '{}' is not a single-byte character",
            args.delimiter
        )));
    }
    Ok(CsvSchema {
        label,
        delimiter: encoded[0],
        has_header: args.header,
    })
}

fn load_dataset_at(path: &Path, args: &DataArgs) -> Result<Dataset> {
    match args.format {
        DataFormat::Csv => load_csv(path, &csv_schema(args)?),
        DataFormat::Libsvm => load_libsvm(path),
    }
}

fn load_dataset(args: &DataArgs) -> Result<Dataset> {
    load_dataset_at(&args.data, args)
}

fn build_config(options: &TrainOptions, shard: ShardConfig) -> BuildConfig {
    BuildConfig {
        mu: options.mu,
        validation_fraction: options.validation_fraction,
        seed: options.seed,
        selection_metric: options.metric.into(),
        max_candidates: options.max_candidates,
        shard,
    }
}

struct TrainedOutcome {
    model: TrainedModel,
    planes_trained: u64,
    candidates_exhaustive: bool,
}

fn train_model(kind: ModelKind, data: &Dataset, config: &BuildConfig) -> Result<TrainedOutcome> {
    Ok(match kind {
        ModelKind::Tree => {
            let built = build_tree(data, config)?;
            TrainedOutcome {
                planes_trained: built.stats.planes_trained,
                candidates_exhaustive: !built.stats.sampled_candidates,
                model: TrainedModel::Tree(built.tree),
            }
        }
        ModelKind::Ovo => {
            let model = train_ovo(data, config.mu, &config.shard)?;
            TrainedOutcome {
                planes_trained: model.plane_count() as u64,
                candidates_exhaustive: true,
                model: TrainedModel::Ovo(model),
            }
        }
        ModelKind::Ovr => {
            let model = train_ovr(data, config.mu, &config.shard)?;
            TrainedOutcome {
                planes_trained: model.plane_count() as u64,
                candidates_exhaustive: true,
                model: TrainedModel::Ovr(model),
            }
        }
    })
}

fn standardize_if(
    requested: bool,
    data: Dataset,
) -> Result<(Dataset, Option<Standardizer>)> {
    if !requested {
        return Ok((data, None));
    }
    let view = DatasetView::all(&data);
    let standardizer = fit_standardizer(&view)?;
    let transformed = apply_standardizer(&standardizer, &view)?;
    Ok((transformed, Some(standardizer)))
}

pub fn train(
    data_args: &DataArgs,
    kind: ModelKind,
    options: &TrainOptions,
    exec: &ExecArgs,
    out: &Path,
) -> Result<()> {
    let raw = load_dataset(data_args)?;
    let (data, standardizer) = standardize_if(options.standardize, raw)?;
    let config = build_config(options, exec.shard_config());
    let outcome = train_model(kind, &data, &config)?;

    let file = ModelFile::new(outcome.model, data.class_names().to_vec(), standardizer);
    file.save(out)?;

    println!(
        "trained {} on {} rows x {} features, {} classes",
        file.model.kind_name(),
        data.len(),
        data.feature_count(),
        data.class_count()
    );
    match &file.model {
        TrainedModel::Tree(tree) => {
            let validation = match &tree.root {
                halfsplit::tree::TreeNode::Internal {
                    validation_accuracy,
                    ..
                } => format!("{validation_accuracy:.4}"),
                halfsplit::tree::TreeNode::Leaf { .. } => "n/a".into(),
            };
            println!(
                "  depth {}, {} internal nodes, {} leaves; root validation accuracy {}",
                tree.depth(),
                tree.internal_count(),
                tree.leaf_count(),
                validation
            );
            println!(
                "  candidate planes trained: {}{}",
                outcome.planes_trained,
                if outcome.candidates_exhaustive {
                    ""
                } else {
                    " (sampled, non-exhaustive)"
                }
            );
        }
        TrainedModel::Ovo(m) => println!("  {} pairwise planes", m.plane_count()),
        TrainedModel::Ovr(m) => println!("  {} one-vs-rest planes", m.plane_count()),
    }
    println!("model written to {}", out.display());
    Ok(())
}

/// Map each dataset class id to the model's id for the same class name.
fn class_mapping(data: &Dataset, model_names: &[String]) -> Result<Vec<usize>> {
    data.class_names()
        .iter()
        .map(|name| {
            model_names
                .iter()
                .position(|m| m == name)
                .ok_or_else(|| {
                    Error::InvalidInput(format!("class '{name}' is unknown to the model"))
                })
        })
        .collect()
}

pub fn evaluate(model_path: &Path, data_args: &DataArgs) -> Result<()> {
    let file = ModelFile::load(model_path)?;
    let raw = load_dataset(data_args)?;
    if raw.feature_count() != file.model.feature_count() {
        return Err(Error::DimensionMismatch(format!(
            "model expects {} features, dataset has {}",
            file.model.feature_count(),
            raw.feature_count()
        )));
    }
    let mapping = class_mapping(&raw, &file.class_names)?;
    let data = match &file.standardizer {
        Some(std) => apply_standardizer(std, &DatasetView::all(&raw))?,
        None => raw,
    };

    let batch = file.model.predict_batch(&data)?;
    let n = file.class_names.len();
    let confusion = MulticlassConfusion::from_pairs(
        n,
        data.labels()
            .iter()
            .map(|&l| mapping[l])
            .zip(batch.labels.iter().copied()),
    )?;
    let accuracy = multiclass_accuracy(&confusion)?;

    println!("evaluated {} rows with the {} model", data.len(), file.model.kind_name());
    println!("classes:");
    for (id, name) in file.class_names.iter().enumerate() {
        println!("  {id} = {name}");
    }
    println!("confusion matrix (rows actual, columns predicted):");
    print!("      ");
    for j in 0..n {
        print!("{j:>8}");
    }
    println!();
    for i in 0..n {
        print!("  {i:>4}");
        for j in 0..n {
            print!("{:>8}", confusion.count(i, j));
        }
        println!();
    }
    println!("accuracy: {accuracy:.4}");
    println!("per-class precision/recall/F1:");
    for (id, (p, r, f1)) in confusion.per_class_prf().iter().enumerate() {
        println!(
            "  {:<24} {:.4}  {:.4}  {:.4}",
            file.class_names[id], p, r, f1
        );
    }
    println!(
        "plane evaluations: {} total, {:.2} per sample",
        batch.planes_evaluated,
        batch.planes_evaluated as f64 / data.len().max(1) as f64
    );
    Ok(())
}

fn kind_name(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Tree => "tree",
        ModelKind::Ovo => "ovo",
        ModelKind::Ovr => "ovr",
    }
}

#[allow(clippy::too_many_arguments)]
pub fn bench(
    data_args: &DataArgs,
    methods: &[ModelKind],
    reps: usize,
    test_fraction: f64,
    test_data: Option<&Path>,
    options: &TrainOptions,
    exec: &ExecArgs,
    out: &Path,
) -> Result<()> {
    if reps == 0 {
        return Err(Error::InvalidParameter(
            "benchmark needs at least 1 repetition".into(),
        ));
    }
    if methods.is_empty() {
        return Err(Error::InvalidParameter("no methods to benchmark".into()));
    }
    let full = load_dataset(data_args)?;
    let (train_raw, test_raw) = match test_data {
        Some(path) => {
            let test = load_dataset_at(path, data_args)?;
            if test.class_names() != full.class_names() {
                return Err(Error::InvalidInput(
                    "train and test datasets disagree on class names".into(),
                ));
            }
            (full, test)
        }
        None => {
            let (train_view, test_view) = stratified_split(&full, test_fraction, options.seed)?;
            (train_view.to_dataset(), test_view.to_dataset())
        }
    };
    let (train_set, standardizer) = standardize_if(options.standardize, train_raw)?;
    let test_set = match &standardizer {
        Some(std) => apply_standardizer(std, &DatasetView::all(&test_raw))?,
        None => test_raw,
    };

    let shard = exec.shard_config();
    let config = build_config(options, shard.clone());
    let mut method_reports = Vec::new();
    for &kind in methods {
        let mut train_times = Vec::with_capacity(reps);
        let mut test_times = Vec::with_capacity(reps);
        let mut first: Option<(TrainedOutcome, u64, f64)> = None;
        for _ in 0..reps {
            let started = Instant::now();
            let outcome = train_model(kind, &train_set, &config)?;
            train_times.push(started.elapsed().as_secs_f64());

            let batch = outcome.model.predict_batch(&test_set)?;
            test_times.push(batch.elapsed.as_secs_f64());

            if first.is_none() {
                let confusion = MulticlassConfusion::from_pairs(
                    train_set.class_count(),
                    test_set
                        .labels()
                        .iter()
                        .copied()
                        .zip(batch.labels.iter().copied()),
                )?;
                let accuracy = multiclass_accuracy(&confusion)?;
                first = Some((outcome, batch.planes_evaluated, accuracy));
            }
        }
        let (outcome, planes_evaluated_total, accuracy) = first.expect("reps >= 1");
        let model_size_bytes = ModelFile::new(
            outcome.model,
            train_set.class_names().to_vec(),
            standardizer.clone(),
        )
        .to_json()?
        .len() as u64;
        method_reports.push(MethodReport {
            method: kind_name(kind).into(),
            train_seconds: timing_stats(&train_times),
            test_seconds: timing_stats(&test_times),
            accuracy,
            planes_trained: outcome.planes_trained,
            planes_evaluated_total,
            planes_evaluated_per_sample: planes_evaluated_total as f64
                / test_set.len().max(1) as f64,
            model_size_bytes,
            candidates_exhaustive: outcome.candidates_exhaustive,
        });
    }

    let report = BenchReport {
        environment: Environment {
            threads: match shard.backend {
                Backend::Threaded { threads } => threads,
                Backend::Serial => 1,
            },
            backend: match shard.backend {
                Backend::Threaded { .. } => "threaded".into(),
                Backend::Serial => "serial".into(),
            },
            shards: shard.shards,
            seed: options.seed,
            repetitions: reps,
            mu: options.mu,
            validation_fraction: options.validation_fraction,
            metric: match options.metric {
                MetricArg::Accuracy => "accuracy".into(),
                MetricArg::F1 => "f1_macro".into(),
            },
            standardize: options.standardize,
            dataset: DatasetShape {
                train_rows: train_set.len(),
                test_rows: test_set.len(),
                features: train_set.feature_count(),
                classes: train_set.class_count(),
            },
        },
        methods: method_reports,
    };
    report.write(out)?;

    println!(
        "benchmark on {} train / {} test rows, {} features, {} classes ({} reps, median timings)",
        report.environment.dataset.train_rows,
        report.environment.dataset.test_rows,
        report.environment.dataset.features,
        report.environment.dataset.classes,
        reps
    );
    println!(
        "{:<6} {:>9} {:>12} {:>12} {:>14} {:>12} {:>12}",
        "method", "accuracy", "train_s", "test_s", "planes_train", "evals/sample", "bytes"
    );
    for m in &report.methods {
        println!(
            "{:<6} {:>9.4} {:>12.6} {:>12.6} {:>14} {:>12.2} {:>12}{}",
            m.method,
            m.accuracy,
            m.train_seconds.median,
            m.test_seconds.median,
            m.planes_trained,
            m.planes_evaluated_per_sample,
            m.model_size_bytes,
            if m.candidates_exhaustive { "" } else { "  (sampled)" }
        );
    }
    println!(
        "report written to {} and {}",
        out.display(),
        out.with_extension("csv").display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn generate(
    classes: usize,
    features: usize,
    rows: Option<usize>,
    counts: Option<&[usize]>,
    proportions: Option<&[f64]>,
    scheme: SchemeArg,
    center_scale: f64,
    noise: f64,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let class_counts = match (counts, proportions, rows) {
        (Some(counts), _, _) => {
            if counts.len() != classes {
                return Err(Error::InvalidParameter(format!(
                    "--counts lists {} values for {classes} classes",
                    counts.len()
                )));
            }
            counts.to_vec()
        }
        (None, Some(weights), Some(total)) => {
            if weights.len() != classes {
                return Err(Error::InvalidParameter(format!(
                    "--proportions lists {} values for {classes} classes",
                    weights.len()
                )));
            }
            proportional_counts(weights, total)?
        }
        (None, Some(_), None) => {
            return Err(Error::InvalidParameter(
                "--proportions needs --rows for the total".into(),
            ))
        }
        (None, None, Some(total)) => proportional_counts(&vec![1.0; classes], total)?,
        (None, None, None) => {
            return Err(Error::InvalidParameter(
                "give --rows, --counts, or --proportions with --rows".into(),
            ))
        }
    };
    let spec = SyntheticSpec {
        class_counts,
        feature_count: features,
        scheme: match scheme {
            SchemeArg::Hypercube => CenterScheme::HypercubeCorners {
                radius: center_scale,
            },
            SchemeArg::Simplex => CenterScheme::SimplexVertices {
                scale: center_scale,
            },
        },
        noise,
        seed,
    };
    let data = generate_synthetic(&spec)?;
    data.write_csv(out)?;
    println!(
        "wrote {} rows x {} features, {} classes (counts {:?}) to {}",
        data.len(),
        data.feature_count(),
        data.class_count(),
        data.class_row_counts(),
        out.display()
    );
    Ok(())
}
