//! Saved-model envelope shared by the tree and both baselines.
//!
//! Models persist as one versioned JSON document. Doubles use the
//! shortest round-trip decimal form, so a saved model reloads to
//! bit-identical coefficients and therefore bit-identical predictions.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{OvoModel, OvrModel};
use crate::data::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::tree::SvmTree;
use crate::BatchPrediction;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A trained multi-class model of any kind, tagged for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    Tree(SvmTree),
    Ovo(OvoModel),
    Ovr(OvrModel),
}

impl TrainedModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TrainedModel::Tree(_) => "tree",
            TrainedModel::Ovo(_) => "ovo",
            TrainedModel::Ovr(_) => "ovr",
        }
    }

    pub fn feature_count(&self) -> usize {
        match self {
            TrainedModel::Tree(t) => t.feature_count,
            TrainedModel::Ovo(m) => m.feature_count,
            TrainedModel::Ovr(m) => m.feature_count,
        }
    }

    pub fn class_count(&self) -> usize {
        match self {
            TrainedModel::Tree(t) => t.classes.len(),
            TrainedModel::Ovo(m) => m.classes.len(),
            TrainedModel::Ovr(m) => m.classes.len(),
        }
    }

    pub fn predict_batch(&self, data: &Dataset) -> Result<BatchPrediction> {
        match self {
            TrainedModel::Tree(t) => t.predict_batch(data),
            TrainedModel::Ovo(m) => m.predict_batch(data),
            TrainedModel::Ovr(m) => m.predict_batch(data),
        }
    }
}

/// The on-disk document: format version, class names indexed by class id,
/// the standardizer the training data went through (if any), and the
/// tagged model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub class_names: Vec<String>,
    pub standardizer: Option<Standardizer>,
    #[serde(flatten)]
    pub model: TrainedModel,
}

impl ModelFile {
    pub fn new(
        model: TrainedModel,
        class_names: Vec<String>,
        standardizer: Option<Standardizer>,
    ) -> Self {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            class_names,
            standardizer,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::ModelFormat(format!("serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)
            .map_err(|e| Error::ModelFormat(format!("malformed model JSON: {e}")))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported model format version {} (this build reads {})",
                file.format_version, MODEL_FORMAT_VERSION
            )));
        }
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}
