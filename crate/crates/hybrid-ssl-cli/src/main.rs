//! `hybrid-ssl` — experiment harness for the agreement-gated semi-supervised
//! training loop.
//!
//! Subcommands:
//!
//! - `run`     one experiment or a sweep; writes `summary.csv`,
//!   per-point `iterations.jsonl`, and optional `models/*.json`
//! - `compare` the loop vs. propagation-alone vs. classifier-alone on
//!   identical splits
//! - `bench`   serial vs. parallel wall time over a size × dim × tasks grid
//! - `gen`     synthetic blob dataset files for the other subcommands
//!
//! `run` and `compare` accept `--config FILE` (TOML); any flag given on the
//! command line overrides the file's value.

mod config;
mod sweep;

use std::fs;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hybrid_ssl::classifiers::ClassifierKind;
use hybrid_ssl::data::write_dataset;
use hybrid_ssl::experiment::{
    bench_scaling, compare_baselines, write_bench_csv, BenchRow, DatasetSource, ExperimentSpec,
    RunSummary, SUMMARY_HEADER,
};
use hybrid_ssl::synth::gen_blobs;

use config::{BlobsTable, FileConfig, Overrides};
use sweep::{PointOutcome, SweepAxis, SweepPlan};

#[derive(Parser)]
#[command(name = "hybrid-ssl", version)]
#[command(about = "Semi-supervised training that labels records only when a graph \
propagation step and a classifier agree; experiments, baselines, and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment — or a sweep of them — and write report files
    Run(RunArgs),
    /// Run the loop and both single-method baselines on identical splits
    Compare(CompareArgs),
    /// Time the serial and parallel engines over a size/dim/tasks grid
    Bench(BenchArgs),
    /// Write a synthetic blob dataset file
    Gen(GenArgs),
}

/// Where the records come from and how they are split.
#[derive(Args, Debug, Default)]
struct DataArgs {
    /// Experiment config file (TOML); flags override its values
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Name stamped on output rows (default: derived from the source)
    #[arg(long)]
    name: Option<String>,

    /// Dataset file to load; must be fully labeled (labels are then hidden
    /// per --unlabeled-fraction)
    #[arg(long, value_name = "PATH", conflicts_with = "blobs")]
    dataset: Option<PathBuf>,

    /// Dataset file format (default: inferred from the extension)
    #[arg(long, value_enum)]
    format: Option<FormatArg>,

    /// Synthetic source instead of a file: N,CLASSES,DIM,SEPARATION
    #[arg(long, value_name = "N,C,D,SEP", value_parser = parse_blobs)]
    blobs: Option<BlobsTable>,

    /// Fraction of records in the train split (default 0.7)
    #[arg(long, value_name = "F")]
    train_fraction: Option<f64>,

    /// Skip min-max feature scaling
    #[arg(long)]
    no_scale: bool,

    /// Base RNG seed: synthesis, splitting, and masking (default 0)
    #[arg(long)]
    seed: Option<u64>,
}

/// Knobs of the labeling loop itself.
#[derive(Args, Debug, Default)]
struct LoopArgs {
    /// Agreement-gate probability threshold in (0,1] (default 0.7)
    #[arg(long)]
    threshold: Option<f64>,

    /// Fraction of train labels hidden before the loop runs (default 0.8)
    #[arg(long, value_name = "F")]
    unlabeled_fraction: Option<f64>,

    /// Classifier family inside the loop
    #[arg(long, value_enum)]
    classifier: Option<ClassifierArg>,

    /// Worker count; 1 selects the serial engine (default 1)
    #[arg(long, value_name = "N")]
    tasks: Option<usize>,

    /// Ship the last iteration's model as-is instead of refitting on the
    /// final labeled set
    #[arg(long)]
    strict_paper: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,

    #[command(flatten)]
    knobs: LoopArgs,

    /// Directory for summary.csv and per-point artifacts
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Save the final model under models/
    #[arg(long)]
    save_models: bool,

    /// Dump final propagation probabilities per record (lp_final.csv)
    #[arg(long)]
    dump_lp: bool,

    /// Sweep one axis across --sweep-values
    #[arg(long, value_enum, value_name = "AXIS")]
    sweep: Option<SweepAxisArg>,

    /// Values for the swept axis (default: 0.5,0.6,0.7,0.8,0.9,0.95 for
    /// threshold and unlabeled-fraction; 1,2,4,8 for tasks)
    #[arg(long, value_name = "V1,V2,..", value_delimiter = ',', requires = "sweep")]
    sweep_values: Option<Vec<f64>>,

    /// Repeat each point under these seeds (default: the base seed)
    #[arg(long, value_name = "S1,S2,..", value_delimiter = ',')]
    seeds: Option<Vec<u64>>,

    /// Concurrent sweep jobs (default 1)
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,

    #[command(flatten)]
    knobs: LoopArgs,

    /// Directory for the three-row summary.csv
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Dataset sizes to generate, comma separated
    #[arg(long, value_delimiter = ',', default_value = "400,800")]
    sizes: Vec<usize>,

    /// Feature dimensions to generate, comma separated
    #[arg(long, value_delimiter = ',', default_value = "2")]
    dims: Vec<usize>,

    /// Parallel worker counts to time (the serial engine always runs)
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    tasks: Vec<usize>,

    /// Classes in the generated data
    #[arg(long, default_value_t = 3)]
    classes: usize,

    /// Cluster separation in the generated data
    #[arg(long, default_value_t = 4.0)]
    separation: f64,

    /// Fraction of train labels hidden before the loop runs
    #[arg(long, value_name = "F", default_value_t = 0.8)]
    unlabeled_fraction: f64,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Directory for bench.csv
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Records to generate
    #[arg(long)]
    n: usize,

    #[arg(long, default_value_t = 3)]
    classes: usize,

    #[arg(long, default_value_t = 2)]
    dim: usize,

    /// Distance between cluster centers, in cluster standard deviations
    #[arg(long, default_value_t = 4.0)]
    separation: f64,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output file format
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,

    /// Output file path
    #[arg(long, value_name = "PATH", default_value = "dataset.csv")]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    /// Comma-separated with a header row, label last
    Csv,
    /// Comma-separated without a header row
    CsvNoheader,
    /// Sparse `label idx:value ...` lines
    Libsvm,
}

impl FormatArg {
    fn as_str(self) -> &'static str {
        match self {
            FormatArg::Csv => "csv",
            FormatArg::CsvNoheader => "csv-noheader",
            FormatArg::Libsvm => "libsvm",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ClassifierArg {
    Svm,
    Logreg,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SweepAxisArg {
    Threshold,
    UnlabeledFraction,
    Tasks,
}

impl From<SweepAxisArg> for SweepAxis {
    fn from(axis: SweepAxisArg) -> Self {
        match axis {
            SweepAxisArg::Threshold => SweepAxis::Threshold,
            SweepAxisArg::UnlabeledFraction => SweepAxis::UnlabeledFraction,
            SweepAxisArg::Tasks => SweepAxis::Tasks,
        }
    }
}

fn parse_blobs(s: &str) -> Result<BlobsTable, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [n, classes, dim, separation] = parts.as_slice() else {
        return Err("expected N,CLASSES,DIM,SEPARATION (e.g. 300,3,2,4.0)".into());
    };
    Ok(BlobsTable {
        n: n.trim().parse().map_err(|e| format!("record count: {e}"))?,
        classes: classes.trim().parse().map_err(|e| format!("classes: {e}"))?,
        dim: dim.trim().parse().map_err(|e| format!("dim: {e}"))?,
        separation: separation
            .trim()
            .parse()
            .map_err(|e| format!("separation: {e}"))?,
    })
}

fn main() {
    if let Err(err) = dispatch(Cli::parse()) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Gen(args) => cmd_gen(args),
    }
}

/// Loads the optional config file and applies flag precedence.
fn resolve(data: DataArgs, knobs: LoopArgs, out: Option<PathBuf>) -> Result<config::Resolved> {
    let file = match &data.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let flags = Overrides {
        name: data.name,
        dataset: data.dataset,
        format: data.format.map(|f| f.as_str().to_string()),
        blobs: data.blobs,
        train_fraction: data.train_fraction,
        no_scale: data.no_scale,
        threshold: knobs.threshold,
        unlabeled_fraction: knobs.unlabeled_fraction,
        classifier: knobs.classifier.map(|c| match c {
            ClassifierArg::Svm => ClassifierKind::Svm,
            ClassifierArg::Logreg => ClassifierKind::Logreg,
        }),
        tasks: knobs.tasks,
        seed: data.seed,
        out,
        strict_paper: knobs.strict_paper,
        save_models: false,
        dump_lp: false,
    };
    config::resolve(file, flags)
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let sweep_flag = args.sweep;
    let sweep_values = args.sweep_values;
    let seeds_flag = args.seeds;
    let jobs_flag = args.jobs;
    let mut resolved = resolve(args.data, args.knobs, args.out)?;
    resolved.save_models |= args.save_models;
    resolved.dump_lp |= args.dump_lp;

    // Sweep precedence mirrors the field rule: flags override the file.
    let file_sweep = resolved.sweep.take();
    let axis = match (sweep_flag, &file_sweep) {
        (Some(flag), _) => Some(SweepAxis::from(flag)),
        (None, Some(table)) => Some(SweepAxis::parse(&table.axis)?),
        (None, None) => None,
    };
    let values = sweep_values.or_else(|| file_sweep.as_ref().and_then(|t| t.values.clone()));
    let seeds = seeds_flag
        .or_else(|| file_sweep.as_ref().and_then(|t| t.seeds.clone()))
        .unwrap_or_else(|| vec![resolved.spec.seed]);
    let jobs = jobs_flag
        .or_else(|| file_sweep.as_ref().and_then(|t| t.jobs))
        .unwrap_or(1);

    let plan = match axis {
        Some(axis) => SweepPlan::new(axis, values, seeds, jobs)?,
        None => SweepPlan::seeds_only(seeds, jobs)?,
    };

    let outcomes = sweep::run_sweep(
        &resolved.spec,
        &plan,
        resolved.out.as_deref(),
        resolved.save_models,
        resolved.dump_lp,
    );

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for outcome in &outcomes {
        match &outcome.result {
            Ok(summary) => {
                println!("{}", describe(summary));
                rows.push(summary.clone());
            }
            Err(message) => {
                eprintln!("point {} failed: {message}", outcome.name);
                failures.push(outcome);
            }
        }
    }

    if let Some(dir) = &resolved.out {
        write_summary(dir, &rows)?;
        if !failures.is_empty() {
            write_failures(dir, &failures)?;
        }
        println!(
            "wrote {} ({} rows{})",
            dir.join("summary.csv").display(),
            rows.len(),
            if failures.is_empty() {
                String::new()
            } else {
                format!(", {} failed points in errors.log", failures.len())
            }
        );
    }
    if rows.is_empty() {
        bail!("every sweep point failed");
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let resolved = resolve(args.data, args.knobs, args.out)?;
    if resolved.sweep.is_some() {
        eprintln!("note: ignoring [sweep] — compare runs a single configuration");
    }
    let rows = compare_baselines(&resolved.spec, resolved.out.as_deref())
        .context("running the comparison")?;
    for row in &rows {
        println!("{}", describe(row));
    }
    if let Some(dir) = &resolved.out {
        println!("wrote {} (3 rows)", dir.join("summary.csv").display());
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    if args.sizes.is_empty() || args.dims.is_empty() {
        bail!("nothing to benchmark: give at least one size and one dim");
    }
    let mut rows: Vec<BenchRow> = Vec::new();
    for &n in &args.sizes {
        for &dim in &args.dims {
            let spec = ExperimentSpec {
                name: format!("bench{n}x{dim}d"),
                source: DatasetSource::Blobs {
                    n,
                    classes: args.classes,
                    dim,
                    separation: args.separation,
                },
                unlabeled_fraction: args.unlabeled_fraction,
                seed: args.seed,
                ..ExperimentSpec::default()
            };
            let grid = bench_scaling(&spec, &args.tasks, None)
                .with_context(|| format!("benchmarking n={n} dim={dim}"))?;
            for row in &grid {
                println!(
                    "{:<8} n={:<6} dim={:<3} tasks={:<3} {:>9.1} ms  identical={}",
                    row.engine, row.n_train, row.dim, row.tasks, row.duration_ms,
                    row.identical_to_serial
                );
            }
            rows.extend(grid);
        }
    }
    if let Some(dir) = &args.out {
        write_bench_csv(dir, &rows).context("writing bench.csv")?;
        println!("wrote {} ({} rows)", dir.join("bench.csv").display(), rows.len());
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let dataset = gen_blobs(args.n, args.classes, args.dim, args.separation, args.seed)
        .context("generating blobs")?;
    let format = config::parse_format(args.format.as_str())?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    write_dataset(&dataset, &args.out, format)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote {} ({} records, {} classes, {} features)",
        args.out.display(),
        dataset.len(),
        dataset.n_classes(),
        dataset.dim()
    );
    Ok(())
}

/// One human-readable line per summary row.
fn describe(row: &RunSummary) -> String {
    let test = match row.test_macro_f1 {
        Some(f) => format!("{f:.3}"),
        None => "-".into(),
    };
    format!(
        "{:<24} {:<16} masked F {:.3} | test F {} | coverage {:.2} | {} iter | {:.0} ms",
        row.name, row.method, row.masked_macro_f1, test, row.coverage, row.iterations,
        row.duration_ms
    )
}

fn write_summary(dir: &Path, rows: &[RunSummary]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join("summary.csv");
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{SUMMARY_HEADER}")?;
    for row in rows {
        writeln!(w, "{}", row.to_csv_row())?;
    }
    w.flush()?;
    Ok(())
}

fn write_failures(dir: &Path, failures: &[&PointOutcome]) -> Result<()> {
    let path = dir.join("errors.log");
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for outcome in failures {
        if let Err(message) = &outcome.result {
            writeln!(w, "{}: {message}", outcome.name)?;
        }
    }
    w.flush()?;
    Ok(())
}
