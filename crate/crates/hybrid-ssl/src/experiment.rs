//! End-to-end experiment pipeline: dataset preparation, engine dispatch,
//! scoring, and file outputs.
//!
//! The pipeline simulates a semi-supervised setting from a fully labeled
//! corpus: split into train and test, scale features by the train split's
//! ranges, hide a fraction of the train labels (keeping the removed values
//! aside as ground truth), run the labeling loop, then score
//!
//! - **transductively**: the labels the loop assigned to the hidden records,
//!   against the ground truth (records the loop never labeled are scored via
//!   the final model so every hidden record receives exactly one
//!   prediction), and
//! - **inductively**: the final model's predictions on the untouched test
//!   split.
//!
//! A run can write its results under an output directory:
//!
//! | file               | contents                                      |
//! |--------------------|-----------------------------------------------|
//! | `summary.csv`      | one row of headline numbers per run           |
//! | `iterations.jsonl` | one JSON iteration log per line               |
//! | `truth.json`       | the hidden labels, keyed by record id         |
//! | `models/final.json`| the final classifier (opt-in)                 |
//! | `lp_final.csv`     | propagated probabilities per record (opt-in)  |
//!
//! Every run also carries a `config_hash` — a digest of its full effective
//! configuration — so result rows can be traced back to exact settings.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifiers::{self, save_model, TrainedModel};
use crate::data::{
    load_dataset, mask_labels, min_max_scale, shuffle_split, DataFormat, Dataset, GroundTruth,
    SplitSpec,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::graph_lp::run_lp;
use crate::hybrid::{hybrid_fit, HybridConfig, HybridResult, Termination};
use crate::parallel::{parallel_hybrid_fit, ParallelConfig};
use crate::synth::gen_blobs;
use crate::timing::Stopwatch;

/// Where the experiment's records come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    /// A file on disk; must be fully labeled for the masking pipeline.
    File { path: PathBuf, format: DataFormat },
    /// Synthetic Gaussian blobs, generated with the experiment's seed.
    Blobs {
        n: usize,
        classes: usize,
        dim: usize,
        separation: f64,
    },
}

/// Complete description of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub source: DatasetSource,
    /// Fraction of records in the train split.
    pub train_fraction: f64,
    /// Fraction of train labels hidden before the loop runs.
    pub unlabeled_fraction: f64,
    /// Min-max scale features by the train split's column ranges.
    pub scale: bool,
    pub hybrid: HybridConfig,
    /// Worker count; 1 selects the serial engine.
    pub tasks: usize,
    pub seed: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            name: "run".into(),
            source: DatasetSource::Blobs {
                n: 300,
                classes: 3,
                dim: 2,
                separation: 4.0,
            },
            train_fraction: 0.7,
            unlabeled_fraction: 0.8,
            scale: true,
            hybrid: HybridConfig::default(),
            tasks: 1,
            seed: 0,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.tasks == 0 {
            return Err(Error::InvalidConfig("tasks must be at least 1".into()));
        }
        self.hybrid.validate()
    }

    /// Digest of the full effective configuration, for traceability.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("spec serializes");
        let digest = Sha256::digest(&canonical);
        let mut hex = String::with_capacity(16);
        for byte in &digest[..8] {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}

/// What to write where. With `dir = None` nothing touches the filesystem.
#[derive(Debug, Clone, Default)]
pub struct OutputOptions {
    pub dir: Option<PathBuf>,
    pub save_models: bool,
    pub dump_lp: bool,
}

/// Headline numbers for one run (or one baseline within a comparison).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    /// `hybrid`, `lp_only`, or `classifier_only`.
    pub method: String,
    pub tasks: usize,
    pub seed: u64,
    pub threshold: f64,
    pub unlabeled_fraction: f64,
    pub classifier: String,
    pub n_train: usize,
    pub n_test: usize,
    pub n_masked: usize,
    /// Fraction of hidden records the loop itself labeled (1 when nothing
    /// was hidden; baselines always predict everything).
    pub coverage: f64,
    pub masked_macro_f1: f64,
    pub masked_micro_f1: f64,
    pub masked_accuracy: f64,
    /// Test-split scores. Optional so a purely transductive consumer can
    /// omit them; every built-in method reports them.
    pub test_macro_f1: Option<f64>,
    pub test_micro_f1: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub iterations: usize,
    pub termination: Option<Termination>,
    pub sigma: Option<f64>,
    pub duration_ms: f64,
    pub config_hash: String,
    /// Caveats a reader of the CSV needs per row — e.g. that a transductive
    /// method's test scores come from its inductive extension.
    pub notes: String,
}

/// Column order of `summary.csv`.
pub const SUMMARY_HEADER: &str = "name,method,tasks,seed,threshold,unlabeled_fraction,classifier,\
n_train,n_test,n_masked,coverage,masked_macro_f1,masked_micro_f1,masked_accuracy,\
test_macro_f1,test_micro_f1,test_accuracy,iterations,termination,sigma,duration_ms,config_hash,\
notes";

impl RunSummary {
    pub fn to_csv_row(&self) -> String {
        fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
            v.as_ref().map(|x| x.to_string()).unwrap_or_default()
        }
        let termination = self
            .termination
            .map(|t| t.to_string())
            .unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            sanitize(&self.name),
            self.method,
            self.tasks,
            self.seed,
            self.threshold,
            self.unlabeled_fraction,
            self.classifier,
            self.n_train,
            self.n_test,
            self.n_masked,
            self.coverage,
            self.masked_macro_f1,
            self.masked_micro_f1,
            self.masked_accuracy,
            opt(&self.test_macro_f1),
            opt(&self.test_micro_f1),
            opt(&self.test_accuracy),
            self.iterations,
            termination,
            opt(&self.sigma),
            self.duration_ms,
            self.config_hash,
            sanitize(&self.notes),
        )
    }
}

/// Field values embed into comma-separated rows, so commas become
/// underscores.
fn sanitize(name: &str) -> String {
    name.replace(',', "_")
}

/// The prepared inputs every method sees: masked train split, the hidden
/// labels, and the untouched test split.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub truth: GroundTruth,
    pub test: Dataset,
}

/// Loads or generates the corpus, splits, scales, and hides labels.
pub fn prepare(spec: &ExperimentSpec) -> Result<Prepared> {
    spec.validate()?;
    let full = match &spec.source {
        DatasetSource::File { path, format } => load_dataset(path, *format)?,
        DatasetSource::Blobs {
            n,
            classes,
            dim,
            separation,
        } => gen_blobs(*n, *classes, *dim, *separation, spec.seed)?,
    };
    let (train, test) = shuffle_split(
        &full,
        &SplitSpec {
            train_fraction: spec.train_fraction,
            seed: spec.seed,
        },
    )?;
    let (train, test) = if spec.scale {
        min_max_scale(&train, &test)?
    } else {
        (train, test)
    };
    let (train, truth) = mask_labels(&train, spec.unlabeled_fraction, spec.seed)?;
    Ok(Prepared { train, truth, test })
}

/// Scores predictions for every hidden record: the committed label where the
/// loop assigned one, else the model's prediction.
fn score_masked(
    final_train: &Dataset,
    model: &TrainedModel,
    truth: &GroundTruth,
) -> Result<(EvalReport, f64)> {
    let by_id: HashMap<usize, &crate::data::Record> = final_train
        .records()
        .iter()
        .map(|r| (r.id, r))
        .collect();
    let mut truths = Vec::with_capacity(truth.len());
    let mut preds = Vec::with_capacity(truth.len());
    let mut covered = 0usize;
    for (id, true_label) in truth.iter() {
        let rec = by_id.get(&id).ok_or_else(|| {
            Error::Invariant(format!("hidden record {id} missing from final dataset"))
        })?;
        let pred = match rec.label {
            Some(label) => {
                covered += 1;
                label
            }
            None => model.predict(&rec.features)?,
        };
        truths.push(true_label);
        preds.push(pred);
    }
    let coverage = if truth.is_empty() {
        1.0
    } else {
        covered as f64 / truth.len() as f64
    };
    let report = evaluate(&truths, &preds, final_train.n_classes())?;
    Ok((report, coverage))
}

fn score_test(model: &TrainedModel, test: &Dataset) -> Result<EvalReport> {
    let mut truths = Vec::with_capacity(test.len());
    let mut preds = Vec::with_capacity(test.len());
    for rec in test.records() {
        let label = rec.label.ok_or_else(|| {
            Error::Invariant(format!("test record {} has no label to score against", rec.id))
        })?;
        truths.push(label);
        preds.push(model.predict(&rec.features)?);
    }
    evaluate(&truths, &preds, test.n_classes())
}

fn summarize_hybrid(
    spec: &ExperimentSpec,
    prepared: &Prepared,
    result: &HybridResult,
    duration_ms: f64,
) -> Result<RunSummary> {
    let (masked, coverage) = score_masked(&result.dataset, &result.model, &prepared.truth)?;
    let test = score_test(&result.model, &prepared.test)?;
    Ok(RunSummary {
        name: spec.name.clone(),
        method: "hybrid".into(),
        tasks: spec.tasks,
        seed: spec.seed,
        threshold: spec.hybrid.threshold,
        unlabeled_fraction: spec.unlabeled_fraction,
        classifier: spec.hybrid.classifier.kind().to_string(),
        n_train: prepared.train.len(),
        n_test: prepared.test.len(),
        n_masked: prepared.truth.len(),
        coverage,
        masked_macro_f1: masked.macro_f1,
        masked_micro_f1: masked.micro_f1,
        masked_accuracy: masked.accuracy,
        test_macro_f1: Some(test.macro_f1),
        test_micro_f1: Some(test.micro_f1),
        test_accuracy: Some(test.accuracy),
        iterations: result.iterations.len(),
        termination: Some(result.termination),
        sigma: Some(result.sigma),
        duration_ms,
        config_hash: spec.config_hash(),
        notes: String::new(),
    })
}

/// Runs one experiment end to end, optionally writing result files.
pub fn run_experiment(spec: &ExperimentSpec, out: &OutputOptions) -> Result<RunSummary> {
    let prepared = prepare(spec)?;
    let sw = Stopwatch::start();
    let result = if spec.tasks == 1 {
        hybrid_fit(&prepared.train, &spec.hybrid)?
    } else {
        parallel_hybrid_fit(
            &prepared.train,
            &spec.hybrid,
            &ParallelConfig::new(spec.tasks),
        )?
    };
    let duration_ms = sw.elapsed_ms();
    let summary = summarize_hybrid(spec, &prepared, &result, duration_ms)?;

    if let Some(dir) = &out.dir {
        write_run_outputs(dir, spec, &prepared, &result, &summary, out)?;
    }
    Ok(summary)
}

fn write_run_outputs(
    dir: &Path,
    spec: &ExperimentSpec,
    prepared: &Prepared,
    result: &HybridResult,
    summary: &RunSummary,
    out: &OutputOptions,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_summary_csv(&dir.join("summary.csv"), std::slice::from_ref(summary))?;

    let jsonl_path = dir.join("iterations.jsonl");
    let file = File::create(&jsonl_path).map_err(|e| Error::io(&jsonl_path, e))?;
    let mut w = BufWriter::new(file);
    for log in &result.iterations {
        let line = serde_json::to_string(log).map_err(|e| Error::io(&jsonl_path, e.into()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(&jsonl_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&jsonl_path, e))?;

    prepared.truth.save(&dir.join("truth.json"))?;

    if out.save_models {
        let models = dir.join("models");
        fs::create_dir_all(&models).map_err(|e| Error::io(&models, e))?;
        save_model(&result.model, &models.join("final.json"))?;
    }

    if out.dump_lp {
        // Propagation over the post-run labels: the probabilities the next
        // iteration would have seen.
        let lp = run_lp(&result.dataset, &spec.hybrid.lp)?;
        let path = dir.join("lp_final.csv");
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        let classes: Vec<String> = (0..result.dataset.n_classes())
            .map(|c| format!("p{c}"))
            .collect();
        writeln!(w, "id,{}", classes.join(",")).map_err(|e| Error::io(&path, e))?;
        for (row, rec) in result.dataset.records().iter().enumerate() {
            let probs: Vec<String> = (0..result.dataset.n_classes())
                .map(|c| lp.probabilities.prob(row, c).to_string())
                .collect();
            writeln!(w, "{},{}", rec.id, probs.join(",")).map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn write_summary_csv(path: &Path, rows: &[RunSummary]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{SUMMARY_HEADER}").map_err(|e| Error::io(path, e))?;
    for row in rows {
        writeln!(w, "{}", row.to_csv_row()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Runs the labeling loop and two ablations on identical prepared data:
///
/// - `hybrid`: the full agreement-gated loop;
/// - `lp_only`: propagation alone — hidden records are scored by its most
///   probable class. Propagation is transductive, so its test-split scores
///   come from the minimal inductive extension: the same classifier family
///   fit on the training set with every hidden label filled in by
///   propagation;
/// - `classifier_only`: the classifier fit once on the initially labeled
///   records.
///
/// Returns the three summaries in that order and, given a directory, writes
/// them to one `summary.csv`.
pub fn compare_baselines(
    spec: &ExperimentSpec,
    out_dir: Option<&Path>,
) -> Result<Vec<RunSummary>> {
    let prepared = prepare(spec)?;
    let hash = spec.config_hash();

    // Full loop.
    let sw = Stopwatch::start();
    let result = if spec.tasks == 1 {
        hybrid_fit(&prepared.train, &spec.hybrid)?
    } else {
        parallel_hybrid_fit(
            &prepared.train,
            &spec.hybrid,
            &ParallelConfig::new(spec.tasks),
        )?
    };
    let hybrid_row = summarize_hybrid(spec, &prepared, &result, sw.elapsed_ms())?;

    // Propagation alone: transductive hard labels for the hidden records,
    // plus the minimal inductive extension for the test split — fit the same
    // classifier family on the propagation-labeled training set.
    let sw = Stopwatch::start();
    let lp = run_lp(&prepared.train, &spec.hybrid.lp)?;
    let mut truths = Vec::with_capacity(prepared.truth.len());
    let mut preds = Vec::with_capacity(prepared.truth.len());
    let row_of: HashMap<usize, usize> = prepared
        .train
        .records()
        .iter()
        .enumerate()
        .map(|(row, r)| (r.id, row))
        .collect();
    for (id, true_label) in prepared.truth.iter() {
        truths.push(true_label);
        preds.push(lp.probabilities.hard_label(row_of[&id]));
    }
    let lp_eval = evaluate(&truths, &preds, prepared.train.n_classes())?;
    let lp_labeled: Vec<crate::data::Record> = prepared
        .train
        .records()
        .iter()
        .enumerate()
        .map(|(row, rec)| {
            let mut rec = rec.clone();
            if rec.label.is_none() {
                rec.label = Some(lp.probabilities.hard_label(row));
            }
            rec
        })
        .collect();
    let lp_dataset = Dataset::new(lp_labeled, prepared.train.n_classes())?;
    let lp_model = classifiers::train(&spec.hybrid.classifier, &lp_dataset)?;
    let lp_test = score_test(&lp_model, &prepared.test)?;
    let lp_ms = sw.elapsed_ms();
    let lp_row = RunSummary {
        method: "lp_only".into(),
        coverage: 1.0,
        masked_macro_f1: lp_eval.macro_f1,
        masked_micro_f1: lp_eval.micro_f1,
        masked_accuracy: lp_eval.accuracy,
        test_macro_f1: Some(lp_test.macro_f1),
        test_micro_f1: Some(lp_test.micro_f1),
        test_accuracy: Some(lp_test.accuracy),
        iterations: lp.iterations,
        termination: None,
        sigma: Some(lp.sigma),
        duration_ms: lp_ms,
        notes: "propagation is transductive; test scores are its inductive extension \
                (classifier fit on propagation's labels)"
            .into(),
        ..hybrid_row.clone()
    };

    // Classifier alone, fit on the surviving labels only.
    let sw = Stopwatch::start();
    let model = classifiers::train(&spec.hybrid.classifier, &prepared.train)?;
    let (masked, _) = score_masked(&prepared.train, &model, &prepared.truth)?;
    let test = score_test(&model, &prepared.test)?;
    let clf_row = RunSummary {
        method: "classifier_only".into(),
        coverage: 1.0,
        masked_macro_f1: masked.macro_f1,
        masked_micro_f1: masked.micro_f1,
        masked_accuracy: masked.accuracy,
        test_macro_f1: Some(test.macro_f1),
        test_micro_f1: Some(test.micro_f1),
        test_accuracy: Some(test.accuracy),
        iterations: 0,
        termination: None,
        sigma: None,
        duration_ms: sw.elapsed_ms(),
        notes: "supervised floor: fit on the initially labeled records only".into(),
        ..hybrid_row.clone()
    };

    let rows = vec![hybrid_row, lp_row, clf_row];
    debug_assert!(rows.iter().all(|r| r.config_hash == hash));
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_summary_csv(&dir.join("summary.csv"), &rows)?;
    }
    Ok(rows)
}

/// One row of a scaling benchmark.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub engine: String,
    /// Training records the engines actually fit.
    pub n_train: usize,
    pub dim: usize,
    pub tasks: usize,
    pub duration_ms: f64,
    /// Whether this run's labels, model, and events match the serial run.
    pub identical_to_serial: bool,
    pub iterations: usize,
}

/// Column order of `bench.csv`.
pub const BENCH_HEADER: &str = "engine,n_train,dim,tasks,duration_ms,identical_to_serial,iterations";

impl BenchRow {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.engine,
            self.n_train,
            self.dim,
            self.tasks,
            self.duration_ms,
            self.identical_to_serial,
            self.iterations
        )
    }
}

/// Writes benchmark rows as `bench.csv` in `dir`.
pub fn write_bench_csv(dir: &Path, rows: &[BenchRow]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("bench.csv");
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{BENCH_HEADER}").map_err(|e| Error::io(&path, e))?;
    for row in rows {
        writeln!(w, "{}", row.to_csv_row()).map_err(|e| Error::io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// Times the serial engine and the parallel engine at each worker count on
/// identical prepared data, verifying result equality as it goes. Given a
/// directory, writes `bench.csv`.
pub fn bench_scaling(
    spec: &ExperimentSpec,
    task_counts: &[usize],
    out_dir: Option<&Path>,
) -> Result<Vec<BenchRow>> {
    if task_counts.is_empty() {
        return Err(Error::InvalidConfig("no task counts to benchmark".into()));
    }
    let prepared = prepare(spec)?;
    let (n_train, dim) = (prepared.train.len(), prepared.train.dim());

    let sw = Stopwatch::start();
    let serial = hybrid_fit(&prepared.train, &spec.hybrid)?;
    let mut rows = vec![BenchRow {
        engine: "serial".into(),
        n_train,
        dim,
        tasks: 1,
        duration_ms: sw.elapsed_ms(),
        identical_to_serial: true,
        iterations: serial.iterations.len(),
    }];

    for &tasks in task_counts {
        let sw = Stopwatch::start();
        let par = parallel_hybrid_fit(&prepared.train, &spec.hybrid, &ParallelConfig::new(tasks))?;
        let duration_ms = sw.elapsed_ms();
        let identical = par.dataset == serial.dataset
            && par.model == serial.model
            && par.termination == serial.termination
            && par.iterations.len() == serial.iterations.len()
            && par
                .iterations
                .iter()
                .zip(&serial.iterations)
                .all(|(a, b)| a.events == b.events);
        rows.push(BenchRow {
            engine: "parallel".into(),
            n_train,
            dim,
            tasks,
            duration_ms,
            identical_to_serial: identical,
            iterations: par.iterations.len(),
        });
    }

    if let Some(dir) = out_dir {
        write_bench_csv(dir, &rows)?;
    }
    Ok(rows)
}
