//! Benchmark report types: a JSON document that parses back losslessly,
//! plus a plot-ready CSV with one row per method.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use halfsplit::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

/// Median/min/max of a set of timing samples (median of an even count is
/// the mean of the middle two).
pub fn timing_stats(samples: &[f64]) -> TimingStats {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    TimingStats {
        median,
        min: sorted[0],
        max: sorted[n - 1],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetShape {
    pub train_rows: usize,
    pub test_rows: usize,
    pub features: usize,
    pub classes: usize,
}

/// Everything needed to reproduce the run from the report alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub threads: usize,
    pub backend: String,
    pub shards: usize,
    pub seed: u64,
    pub repetitions: usize,
    pub mu: f64,
    pub validation_fraction: f64,
    pub metric: String,
    pub standardize: bool,
    pub dataset: DatasetShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub train_seconds: TimingStats,
    pub test_seconds: TimingStats,
    pub accuracy: f64,
    pub planes_trained: u64,
    pub planes_evaluated_total: u64,
    pub planes_evaluated_per_sample: f64,
    pub model_size_bytes: u64,
    pub candidates_exhaustive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub environment: Environment,
    pub methods: Vec<MethodReport>,
}

pub const CSV_HEADER: &str = "method,accuracy,train_seconds_median,train_seconds_min,\
train_seconds_max,test_seconds_median,test_seconds_min,test_seconds_max,planes_trained,\
planes_evaluated_total,planes_evaluated_per_sample,model_size_bytes,candidates_exhaustive";

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for m in &self.methods {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                m.method,
                m.accuracy,
                m.train_seconds.median,
                m.train_seconds.min,
                m.train_seconds.max,
                m.test_seconds.median,
                m.test_seconds.min,
                m.test_seconds.max,
                m.planes_trained,
                m.planes_evaluated_total,
                m.planes_evaluated_per_sample,
                m.model_size_bytes,
                m.candidates_exhaustive,
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Numerical(format!("report serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Parse {
                path: String::new(),
                line: 0,
                msg: format!("malformed report JSON: {e}"),
            })
    }

    /// Write the JSON report to `json_path` and the CSV next to it with
    /// the extension swapped to `.csv`.
    pub fn write(&self, json_path: &Path) -> Result<()> {
        let mut json = self.to_json()?;
        json.push('\n');
        fs::write(json_path, json)?;
        fs::write(json_path.with_extension("csv"), self.to_csv())?;
        Ok(())
    }
}
