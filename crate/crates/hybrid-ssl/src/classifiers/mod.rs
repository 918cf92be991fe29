//! Supervised classifiers used as the second opinion in the labeling loop.
//!
//! Two families are available behind one facade: a one-vs-one SVM ensemble
//! ([`svm`], [`ovo`]) and one-vs-rest logistic regression ([`logreg`]). Both
//! train only on the labeled records of a dataset, are fully deterministic,
//! and serialize to a small versioned JSON envelope so experiment runs can
//! archive the exact models they produced.

pub mod logreg;
pub mod ovo;
pub mod svm;

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
pub use logreg::{loss_and_gradient, train_logreg, LogregModel, LogregParams};
pub use ovo::{train_ovo, OvoModel, PairModel, VoteTally};
pub use svm::{smo_train, Kernel, SvmBinaryModel, SvmParams};

/// Which classifier family to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Svm,
    Logreg,
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassifierKind::Svm => write!(f, "svm"),
            ClassifierKind::Logreg => write!(f, "logreg"),
        }
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svm" => Ok(ClassifierKind::Svm),
            "logreg" => Ok(ClassifierKind::Logreg),
            other => Err(Error::InvalidConfig(format!(
                "unknown classifier {other:?} (expected svm or logreg)"
            ))),
        }
    }
}

/// Classifier choice together with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierSpec {
    Svm(SvmParams),
    Logreg(LogregParams),
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec::Svm(SvmParams::default())
    }
}

impl ClassifierSpec {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierSpec::Svm(_) => ClassifierKind::Svm,
            ClassifierSpec::Logreg(_) => ClassifierKind::Logreg,
        }
    }

    /// Default hyperparameters for the given family.
    pub fn default_for(kind: ClassifierKind) -> Self {
        match kind {
            ClassifierKind::Svm => ClassifierSpec::Svm(SvmParams::default()),
            ClassifierKind::Logreg => ClassifierSpec::Logreg(LogregParams::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClassifierSpec::Svm(p) => p.validate(),
            ClassifierSpec::Logreg(p) => p.validate(),
        }
    }
}

/// A trained classifier of either family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrainedModel {
    Svm(OvoModel),
    Logreg(LogregModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            TrainedModel::Svm(_) => ClassifierKind::Svm,
            TrainedModel::Logreg(_) => ClassifierKind::Logreg,
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            TrainedModel::Svm(m) => m.n_classes,
            TrainedModel::Logreg(m) => m.n_classes,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TrainedModel::Svm(m) => m.dim,
            TrainedModel::Logreg(m) => m.dim,
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<usize> {
        match self {
            TrainedModel::Svm(m) => m.predict(features),
            TrainedModel::Logreg(m) => m.predict(features),
        }
    }
}

/// Trains the classifier described by `spec` on the labeled records of
/// `dataset`.
pub fn train(spec: &ClassifierSpec, dataset: &Dataset) -> Result<TrainedModel> {
    match spec {
        ClassifierSpec::Svm(params) => Ok(TrainedModel::Svm(train_ovo(dataset, params)?)),
        ClassifierSpec::Logreg(params) => Ok(TrainedModel::Logreg(train_logreg(dataset, params)?)),
    }
}

/// Bump when the serialized model layout changes shape.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    kind: ClassifierKind,
    model: serde_json::Value,
}

/// Writes `model` to `path` as versioned JSON.
pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    let inner = match model {
        TrainedModel::Svm(m) => serde_json::to_value(m),
        TrainedModel::Logreg(m) => serde_json::to_value(m),
    }
    .map_err(|e| Error::ModelFormat {
        path: path.into(),
        msg: e.to_string(),
    })?;
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        kind: model.kind(),
        model: inner,
    };
    let out = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(out), &file).map_err(|e| Error::ModelFormat {
        path: path.into(),
        msg: e.to_string(),
    })
}

/// Reads a model written by [`save_model`], rejecting unknown versions.
pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let input = File::open(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile =
        serde_json::from_reader(BufReader::new(input)).map_err(|e| Error::ModelFormat {
            path: path.into(),
            msg: e.to_string(),
        })?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelFormat {
            path: path.into(),
            msg: format!(
                "unsupported format version {} (this build reads {})",
                file.format_version, MODEL_FORMAT_VERSION
            ),
        });
    }
    let model = match file.kind {
        ClassifierKind::Svm => TrainedModel::Svm(serde_json::from_value(file.model).map_err(
            |e| Error::ModelFormat {
                path: path.into(),
                msg: e.to_string(),
            },
        )?),
        ClassifierKind::Logreg => TrainedModel::Logreg(serde_json::from_value(file.model)
            .map_err(|e| Error::ModelFormat {
                path: path.into(),
                msg: e.to_string(),
            })?),
    };
    Ok(model)
}
