//! Dataset loading (CSV and libsvm formats), stratified splitting, feature
//! standardization, and seeded synthetic cluster generation.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major feature matrix with dense class ids and a class-name table.
/// Class ids are assigned 0..n-1 in first-appearance order by the loaders.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    feature_count: usize,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        feature_count: usize,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if features.len() != labels.len() * feature_count {
            return Err(Error::DimensionMismatch(format!(
                "{} feature values do not fill {} rows of {} features",
                features.len(),
                labels.len(),
                feature_count
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::InvalidInput(format!(
                "label id {bad} has no entry in the {}-name class table",
                class_names.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "dataset contains a non-finite feature value".into(),
            ));
        }
        Ok(Dataset {
            features,
            feature_count,
            labels,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_count..(i + 1) * self.feature_count]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    /// Row count per class id.
    pub fn class_row_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.class_count()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Write as CSV with a `f0,..,f{d-1},label` header; features use the
    /// shortest round-trip decimal form, labels their class names.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut writer = csv::Writer::from_path(path.as_ref()).map_err(csv_to_error)?;
        let mut header: Vec<String> = (0..self.feature_count).map(|j| format!("f{j}")).collect();
        header.push("label".into());
        writer.write_record(&header).map_err(csv_to_error)?;
        let mut record: Vec<String> = Vec::with_capacity(self.feature_count + 1);
        for i in 0..self.len() {
            record.clear();
            record.extend(self.row(i).iter().map(|v| v.to_string()));
            record.push(self.class_names[self.labels[i]].clone());
            writer.write_record(&record).map_err(csv_to_error)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// A borrowed, ordered subset of a dataset's rows.
#[derive(Debug, Clone)]
pub struct DatasetView<'a> {
    data: &'a Dataset,
    rows: Vec<usize>,
}

impl<'a> DatasetView<'a> {
    pub fn all(data: &'a Dataset) -> Self {
        DatasetView {
            data,
            rows: (0..data.len()).collect(),
        }
    }

    pub fn from_rows(data: &'a Dataset, rows: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= data.len()) {
            return Err(Error::InvalidInput(format!(
                "view row {bad} outside dataset of {} rows",
                data.len()
            )));
        }
        Ok(DatasetView { data, rows })
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.data
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

    /// The i-th row of the view (not of the underlying dataset).
    pub fn row(&self, i: usize) -> &[f64] {
        self.data.row(self.rows[i])
    }

    pub fn label(&self, i: usize) -> usize {
        self.data.label(self.rows[i])
    }

    pub fn row_indices(&self) -> &[usize] {
        &self.rows
    }

    /// Keep only rows whose class id is in `keep`.
    pub fn filter_classes(&self, keep: &[usize]) -> DatasetView<'a> {
        let mut member = vec![false; self.data.class_count()];
        for &c in keep {
            member[c] = true;
        }
        DatasetView {
            data: self.data,
            rows: self
                .rows
                .iter()
                .copied()
                .filter(|&r| member[self.data.label(r)])
                .collect(),
        }
    }

    /// Materialize the view as an owned dataset (same class table).
    pub fn to_dataset(&self) -> Dataset {
        let d = self.feature_count();
        let mut features = Vec::with_capacity(self.len() * d);
        let mut labels = Vec::with_capacity(self.len());
        for &r in &self.rows {
            features.extend_from_slice(self.data.row(r));
            labels.push(self.data.label(r));
        }
        Dataset {
            features,
            feature_count: d,
            labels,
            class_names: self.data.class_names.to_vec(),
        }
    }
}

/// Which column of a delimited file holds the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    /// Resolved against the header row; requires `has_header`.
    Name(String),
    Last,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub label: LabelColumn,
    pub delimiter: u8,
    pub has_header: bool,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            label: LabelColumn::Last,
            delimiter: b',',
            has_header: false,
        }
    }
}

fn csv_to_error(err: csv::Error) -> Error {
    let line = err.position().map_or(0, csv::Position::line);
    match err.kind() {
        csv::ErrorKind::Io(_) => match err.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        },
        _ => Error::Parse {
            path: String::new(),
            line,
            msg: err.to_string(),
        },
    }
}

fn with_path(err: Error, path: &Path) -> Error {
    match err {
        Error::Parse { line, msg, .. } => Error::Parse {
            path: path.display().to_string(),
            line,
            msg,
        },
        other => other,
    }
}

/// Load a delimited text file: every column but the label column must be a
/// finite decimal feature. Labels map to dense class ids 0..n-1 in
/// first-appearance order.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .delimiter(schema.delimiter)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| with_path(csv_to_error(e), path))?;

    let headers: Option<Vec<String>> = if schema.has_header {
        Some(
            reader
                .headers()
                .map_err(|e| with_path(csv_to_error(e), path))?
                .iter()
                .map(String::from)
                .collect(),
        )
    } else {
        None
    };

    let resolve_label = |width: usize| -> Result<usize> {
        match &schema.label {
            LabelColumn::Index(i) if *i < width => Ok(*i),
            LabelColumn::Index(i) => Err(Error::InvalidInput(format!(
                "label column {i} outside {width}-column file"
            ))),
            LabelColumn::Name(name) => headers
                .as_ref()
                .ok_or_else(|| {
                    Error::InvalidInput("label column by name requires a header row".into())
                })?
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::InvalidInput(format!("no header column named '{name}'"))),
            LabelColumn::Last => Ok(width - 1),
        }
    };

    let mut width = None;
    let mut label_col = None;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut class_ids: HashMap<String, usize> = HashMap::new();

    for record in reader.records() {
        let record = record.map_err(|e| with_path(csv_to_error(e), path))?;
        let line = record.position().map_or(0, csv::Position::line);
        let w = *width.get_or_insert(record.len());
        if w < 2 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line,
                msg: "need at least one feature column and one label column".into(),
            });
        }
        let lcol = match label_col {
            Some(c) => c,
            None => *label_col.insert(resolve_label(w)?),
        };
        for (col, cell) in record.iter().enumerate() {
            if col == lcol {
                let next_id = class_names.len();
                let id = *class_ids.entry(cell.to_string()).or_insert(next_id);
                if id == next_id {
                    class_names.push(cell.to_string());
                }
                labels.push(id);
            } else {
                let value: f64 = cell.parse().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line,
                    msg: format!("column {}: '{cell}' is not a number", col + 1),
                })?;
                if !value.is_finite() {
                    return Err(Error::Parse {
                        path: path.display().to_string(),
                        line,
                        msg: format!("column {}: non-finite feature '{cell}'", col + 1),
                    });
                }
                features.push(value);
            }
        }
    }

    if labels.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    let d = width.unwrap() - 1;
    Dataset::new(features, d, labels, class_names)
}

/// Load a libsvm-style file: lines of `label idx:val ...` with 1-based,
/// strictly ascending indices. Absent indices densify to 0 and the feature
/// count is the largest index seen anywhere in the file.
pub fn load_libsvm(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };

    let mut sparse_rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut class_ids: HashMap<String, usize> = HashMap::new();
    let mut max_index = 0usize;

    for (line_no, line) in BufReader::new(file).lines().enumerate() {
        let line_no = line_no as u64 + 1;
        let line = line?;
        let mut tokens = line.split_whitespace();
        let Some(label) = tokens.next() else {
            continue; // blank line
        };
        let next_id = class_names.len();
        let id = *class_ids.entry(label.to_string()).or_insert(next_id);
        if id == next_id {
            class_names.push(label.to_string());
        }
        labels.push(id);

        let mut row = Vec::new();
        let mut prev_index = 0usize;
        for token in tokens {
            let (idx, val) = token
                .split_once(':')
                .ok_or_else(|| parse_err(line_no, format!("'{token}' is not 'index:value'")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad feature index '{idx}'")))?;
            let val: f64 = val
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad feature value '{val}'")))?;
            if idx == 0 {
                return Err(parse_err(line_no, "feature indices are 1-based".into()));
            }
            if idx <= prev_index {
                return Err(parse_err(
                    line_no,
                    format!("index {idx} not strictly ascending after {prev_index}"),
                ));
            }
            if !val.is_finite() {
                return Err(parse_err(line_no, format!("non-finite value '{val}'")));
            }
            prev_index = idx;
            max_index = max_index.max(idx);
            row.push((idx - 1, val));
        }
        sparse_rows.push(row);
    }

    if labels.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    let mut features = vec![0.0; labels.len() * max_index];
    for (i, row) in sparse_rows.iter().enumerate() {
        for &(j, v) in row {
            features[i * max_index + j] = v;
        }
    }
    Dataset::new(features, max_index, labels, class_names)
}

/// Per-class seeded shuffle and hold-out: `⌈fraction·count⌉` rows of each
/// class go to the held-out view, clamped so at least one training row
/// remains. Deterministic in (row order, seed); both views come back with
/// ascending row indices.
pub fn stratified_split(
    data: &Dataset,
    fraction: f64,
    seed: u64,
) -> Result<(DatasetView<'_>, DatasetView<'_>)> {
    if !fraction.is_finite() || fraction <= 0.0 || fraction >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "hold-out fraction must be in (0, 1), got {fraction}"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); data.class_count()];
    for i in 0..data.len() {
        by_class[data.label(i)].push(i);
    }
    for (c, rows) in by_class.iter().enumerate() {
        if rows.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "class '{}' has {} row(s); stratified splitting needs at least 2",
                data.class_names()[c],
                rows.len()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut held = Vec::new();
    for (c, rows) in by_class.iter().enumerate() {
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut rng);
        let count = shuffled.len();
        // tolerate rounding noise in fraction*count before taking the ceiling
        let mut take = ((fraction * count as f64) - 1e-9).ceil() as usize;
        take = take.max(1);
        if take >= count {
            take = count - 1;
            log::warn!(
                "hold-out fraction {fraction} would empty class '{}'; clamped to leave 1 training row",
                data.class_names()[c]
            );
        }
        held.extend_from_slice(&shuffled[..take]);
        train.extend_from_slice(&shuffled[take..]);
    }
    train.sort_unstable();
    held.sort_unstable();
    Ok((
        DatasetView { data, rows: train },
        DatasetView { data, rows: held },
    ))
}

/// Per-feature affine transform fitted on a training view: subtract the
/// mean, divide by the population standard deviation. Constant features
/// fall back to a divisor of 1 so they map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    std_dev: Vec<f64>,
}

impl Standardizer {
    pub fn feature_count(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std_dev(&self) -> &[f64] {
        &self.std_dev
    }
}

pub fn fit_standardizer(view: &DatasetView<'_>) -> Result<Standardizer> {
    if view.is_empty() {
        return Err(Error::DegenerateInput(
            "cannot fit a standardizer on an empty view".into(),
        ));
    }
    let d = view.feature_count();
    let m = view.len() as f64;
    let mut mean = vec![0.0; d];
    for i in 0..view.len() {
        for (j, v) in view.row(i).iter().enumerate() {
            mean[j] += v;
        }
    }
    for v in &mut mean {
        *v /= m;
    }
    let mut var = vec![0.0; d];
    for i in 0..view.len() {
        for (j, v) in view.row(i).iter().enumerate() {
            let dev = v - mean[j];
            var[j] += dev * dev;
        }
    }
    let std_dev = var
        .iter()
        .zip(&mean)
        .map(|(&v, &mu)| {
            let sigma = (v / m).sqrt();
            // rounding can leave a constant feature with a tiny nonzero
            // variance; dividing by it would blow the column up
            if sigma <= f64::EPSILON * (1.0 + mu.abs()) {
                1.0
            } else {
                sigma
            }
        })
        .collect();
    Ok(Standardizer { mean, std_dev })
}

/// Materialize `(x - mean) / std_dev` over a view.
pub fn apply_standardizer(std: &Standardizer, view: &DatasetView<'_>) -> Result<Dataset> {
    if std.feature_count() != view.feature_count() {
        return Err(Error::DimensionMismatch(format!(
            "standardizer fitted on {} features, view has {}",
            std.feature_count(),
            view.feature_count()
        )));
    }
    let d = view.feature_count();
    let mut features = Vec::with_capacity(view.len() * d);
    let mut labels = Vec::with_capacity(view.len());
    for i in 0..view.len() {
        for (j, v) in view.row(i).iter().enumerate() {
            features.push((v - std.mean[j]) / std.std_dev[j]);
        }
        labels.push(view.label(i));
    }
    Dataset::new(features, d, labels, view.dataset().class_names().to_vec())
}

/// Where the synthetic generator puts its class centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CenterScheme {
    /// Class `i` sits at the hypercube corner whose signs follow the bits
    /// of `i`: coordinate `j` is `+radius` when bit `j` of `i` is set.
    /// Needs `n <= 2^d`.
    HypercubeCorners { radius: f64 },
    /// Class `i` sits at `scale`·eᵢ, the vertices of a regular simplex.
    /// Needs `n <= d`; every class bipartition is linearly separable.
    SimplexVertices { scale: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub class_counts: Vec<usize>,
    pub feature_count: usize,
    pub scheme: CenterScheme,
    pub noise: f64,
    pub seed: u64,
}

/// Deterministic class centers for a scheme.
pub fn class_centers(scheme: &CenterScheme, classes: usize, d: usize) -> Result<Vec<Vec<f64>>> {
    match *scheme {
        CenterScheme::HypercubeCorners { radius } => {
            if !radius.is_finite() || radius <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "corner radius must be positive, got {radius}"
                )));
            }
            if (d as u32) < usize::BITS && classes > 1usize << d {
                return Err(Error::InvalidParameter(format!(
                    "{classes} classes need more than the 2^{d} hypercube corners"
                )));
            }
            Ok((0..classes)
                .map(|i| {
                    (0..d)
                        .map(|j| if i >> j & 1 == 1 { radius } else { -radius })
                        .collect()
                })
                .collect())
        }
        CenterScheme::SimplexVertices { scale } => {
            if !scale.is_finite() || scale <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "simplex scale must be positive, got {scale}"
                )));
            }
            if classes > d {
                return Err(Error::InvalidParameter(format!(
                    "{classes} simplex vertices need at least {classes} features, got {d}"
                )));
            }
            Ok((0..classes)
                .map(|i| (0..d).map(|j| if i == j { scale } else { 0.0 }).collect())
                .collect())
        }
    }
}

/// Seeded Gaussian clouds at deterministic centers. With `noise == 0`
/// every point sits exactly on its class center.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    let n = spec.class_counts.len();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "synthetic spec needs at least 2 classes".into(),
        ));
    }
    if let Some(bad) = spec.class_counts.iter().position(|&c| c < 2) {
        return Err(Error::InvalidParameter(format!(
            "class {bad} has count {}; every class needs at least 2 rows",
            spec.class_counts[bad]
        )));
    }
    if spec.feature_count == 0 {
        return Err(Error::InvalidParameter(
            "synthetic spec needs at least 1 feature".into(),
        ));
    }
    if !spec.noise.is_finite() || spec.noise < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "noise must be >= 0, got {}",
            spec.noise
        )));
    }
    let centers = class_centers(&spec.scheme, n, spec.feature_count)?;
    let total: usize = spec.class_counts.iter().sum();
    let mut features = Vec::with_capacity(total * spec.feature_count);
    let mut labels = Vec::with_capacity(total);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = if spec.noise > 0.0 {
        Some(Normal::new(0.0, spec.noise).expect("finite noise"))
    } else {
        None
    };
    for (class, (&count, center)) in spec.class_counts.iter().zip(&centers).enumerate() {
        for _ in 0..count {
            match &normal {
                Some(dist) => features.extend(center.iter().map(|c| c + dist.sample(&mut rng))),
                None => features.extend_from_slice(center),
            }
            labels.push(class);
        }
    }
    let class_names = (0..n).map(|i| format!("c{i}")).collect();
    Dataset::new(features, spec.feature_count, labels, class_names)
}

/// Split `total` rows across classes proportionally to `weights`, using
/// largest-remainder rounding (ties to the lower index).
pub fn proportional_counts(weights: &[f64], total: usize) -> Result<Vec<usize>> {
    if weights.is_empty() {
        return Err(Error::InvalidParameter("no class weights".into()));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidParameter(
            "class weights must be finite and non-negative".into(),
        ));
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Err(Error::InvalidParameter("class weights sum to zero".into()));
    }
    let shares: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(total - assigned) {
        counts[i] += 1;
    }
    Ok(counts)
}
