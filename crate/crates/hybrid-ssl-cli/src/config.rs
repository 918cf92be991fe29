//! Experiment configuration: an optional TOML file supplies base values and
//! every command-line flag overrides the file. Nothing here runs anything —
//! the output is a fully resolved [`ExperimentSpec`] plus the run options
//! that live outside it.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hybrid_ssl::classifiers::{ClassifierKind, ClassifierSpec};
use hybrid_ssl::data::DataFormat;
use hybrid_ssl::experiment::{DatasetSource, ExperimentSpec};
use serde::Deserialize;

/// On-disk experiment document. Every key is optional; flags override.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub name: Option<String>,
    /// Dataset file path; mutually exclusive with `[blobs]`.
    pub dataset: Option<PathBuf>,
    /// `csv`, `csv-noheader`, or `libsvm`; inferred from the extension when
    /// omitted.
    pub format: Option<String>,
    pub blobs: Option<BlobsTable>,
    pub train_fraction: Option<f64>,
    pub scale: Option<bool>,
    pub threshold: Option<f64>,
    pub unlabeled_fraction: Option<f64>,
    /// `svm` or `logreg`.
    pub classifier: Option<String>,
    pub tasks: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub strict_paper: Option<bool>,
    pub save_models: Option<bool>,
    pub dump_lp: Option<bool>,
    pub sweep: Option<SweepTable>,
}

/// Synthetic-source parameters, mirroring the generator's arguments.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobsTable {
    pub n: usize,
    pub classes: usize,
    pub dim: usize,
    pub separation: f64,
}

/// Sweep description: one axis, its values, and the seeds to repeat over.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepTable {
    /// `threshold`, `unlabeled_fraction`, or `tasks`.
    pub axis: String,
    pub values: Option<Vec<f64>>,
    pub seeds: Option<Vec<u64>>,
    /// Concurrent sweep jobs (default 1).
    pub jobs: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: FileConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        if config.dataset.is_some() && config.blobs.is_some() {
            bail!(
                "{}: `dataset` and `[blobs]` are mutually exclusive",
                path.display()
            );
        }
        Ok(config)
    }
}

/// Parses the dataset-format names shared by `--format` and the config file.
pub fn parse_format(s: &str) -> Result<DataFormat> {
    match s {
        "csv" => Ok(DataFormat::Csv { has_header: true }),
        "csv-noheader" => Ok(DataFormat::Csv { has_header: false }),
        "libsvm" => Ok(DataFormat::Libsvm),
        other => bail!("unknown format {other:?} (expected csv, csv-noheader, or libsvm)"),
    }
}

/// Guesses a file's format from its extension when no format is given.
pub fn infer_format(path: &Path) -> Result<DataFormat> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => Ok(DataFormat::Csv { has_header: true }),
        Some("libsvm") | Some("svm") => Ok(DataFormat::Libsvm),
        _ => bail!(
            "cannot infer the format of {} — pass --format",
            path.display()
        ),
    }
}

/// Flag values that override the file. The binary fills this from clap;
/// keeping it flag-shaped (all optional) makes the precedence rule literal.
#[derive(Debug, Default)]
pub struct Overrides {
    pub name: Option<String>,
    pub dataset: Option<PathBuf>,
    pub format: Option<String>,
    pub blobs: Option<BlobsTable>,
    pub train_fraction: Option<f64>,
    pub no_scale: bool,
    pub threshold: Option<f64>,
    pub unlabeled_fraction: Option<f64>,
    pub classifier: Option<ClassifierKind>,
    pub tasks: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub strict_paper: bool,
    pub save_models: bool,
    pub dump_lp: bool,
}

/// Everything a subcommand needs after precedence is applied.
#[derive(Debug)]
pub struct Resolved {
    pub spec: ExperimentSpec,
    pub out: Option<PathBuf>,
    pub save_models: bool,
    pub dump_lp: bool,
    pub sweep: Option<SweepTable>,
}

/// Applies the precedence `flag > file > default` field by field.
pub fn resolve(file: FileConfig, flags: Overrides) -> Result<Resolved> {
    let defaults = ExperimentSpec::default();

    let source = if let Some(path) = flags.dataset {
        let format = match flags.format.as_deref().or(file.format.as_deref()) {
            Some(s) => parse_format(s)?,
            None => infer_format(&path)?,
        };
        DatasetSource::File { path, format }
    } else if let Some(b) = flags.blobs {
        blobs_source(b)
    } else if let Some(path) = file.dataset {
        let format = match flags.format.as_deref().or(file.format.as_deref()) {
            Some(s) => parse_format(s)?,
            None => infer_format(&path)?,
        };
        DatasetSource::File { path, format }
    } else if let Some(b) = file.blobs {
        blobs_source(b)
    } else {
        bail!("no dataset source: pass --dataset or --blobs, or set one in the config file");
    };

    let classifier = match (flags.classifier, file.classifier.as_deref()) {
        (Some(kind), _) => ClassifierSpec::default_for(kind),
        (None, Some(s)) => ClassifierSpec::default_for(s.parse::<ClassifierKind>()?),
        (None, None) => defaults.hybrid.classifier.clone(),
    };

    let mut hybrid = defaults.hybrid.clone();
    hybrid.classifier = classifier;
    hybrid.threshold = flags
        .threshold
        .or(file.threshold)
        .unwrap_or(defaults.hybrid.threshold);
    hybrid.refit_final = !(flags.strict_paper || file.strict_paper.unwrap_or(false));

    let spec = ExperimentSpec {
        name: flags
            .name
            .or(file.name)
            .unwrap_or_else(|| default_name(&source)),
        source,
        train_fraction: flags
            .train_fraction
            .or(file.train_fraction)
            .unwrap_or(defaults.train_fraction),
        unlabeled_fraction: flags
            .unlabeled_fraction
            .or(file.unlabeled_fraction)
            .unwrap_or(defaults.unlabeled_fraction),
        scale: !flags.no_scale && file.scale.unwrap_or(true),
        hybrid,
        tasks: flags.tasks.or(file.tasks).unwrap_or(defaults.tasks),
        seed: flags.seed.or(file.seed).unwrap_or(defaults.seed),
    };
    spec.validate()?;

    Ok(Resolved {
        spec,
        out: flags.out.or(file.out),
        save_models: flags.save_models || file.save_models.unwrap_or(false),
        dump_lp: flags.dump_lp || file.dump_lp.unwrap_or(false),
        sweep: file.sweep,
    })
}

fn blobs_source(b: BlobsTable) -> DatasetSource {
    DatasetSource::Blobs {
        n: b.n,
        classes: b.classes,
        dim: b.dim,
        separation: b.separation,
    }
}

fn default_name(source: &DatasetSource) -> String {
    match source {
        DatasetSource::File { path, .. } => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into()),
        DatasetSource::Blobs {
            n, classes, dim, ..
        } => format!("blobs{n}x{classes}c{dim}d"),
    }
}
