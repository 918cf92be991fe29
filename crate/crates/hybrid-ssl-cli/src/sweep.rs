//! Sweep execution: expand one axis × seed grid into per-point experiment
//! specs, run the points through a small worker pool, and collect every
//! outcome — a failed point is recorded and the rest keep going.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;
use std::thread;

use anyhow::{bail, Result};
use hybrid_ssl::experiment::{run_experiment, ExperimentSpec, OutputOptions, RunSummary};

/// The swept dimension. `None` at the planning level means "just the seeds".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Threshold,
    UnlabeledFraction,
    Tasks,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "threshold" => Ok(SweepAxis::Threshold),
            "unlabeled_fraction" | "unlabeled-fraction" => Ok(SweepAxis::UnlabeledFraction),
            "tasks" => Ok(SweepAxis::Tasks),
            other => bail!(
                "unknown sweep axis {other:?} (expected threshold, unlabeled_fraction, or tasks)"
            ),
        }
    }

    fn label(self) -> &'static str {
        match self {
            SweepAxis::Threshold => "threshold",
            SweepAxis::UnlabeledFraction => "unlabeled_fraction",
            SweepAxis::Tasks => "tasks",
        }
    }

    /// The grid used when a sweep names no values.
    fn default_values(self) -> Vec<f64> {
        match self {
            SweepAxis::Threshold | SweepAxis::UnlabeledFraction => {
                vec![0.5, 0.6, 0.7, 0.8, 0.9, 0.95]
            }
            SweepAxis::Tasks => vec![1.0, 2.0, 4.0, 8.0],
        }
    }
}

/// A validated, fully expanded sweep.
#[derive(Debug)]
pub struct SweepPlan {
    pub axis: Option<SweepAxis>,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub jobs: usize,
}

impl SweepPlan {
    /// No axis, just repetitions over seeds — a single seed runs the base
    /// spec once.
    pub fn seeds_only(seeds: Vec<u64>, jobs: usize) -> Result<Self> {
        if seeds.is_empty() {
            bail!("sweep seeds are empty");
        }
        Ok(SweepPlan {
            axis: None,
            values: vec![f64::NAN],
            seeds,
            jobs: jobs.max(1),
        })
    }

    pub fn new(
        axis: SweepAxis,
        values: Option<Vec<f64>>,
        seeds: Vec<u64>,
        jobs: usize,
    ) -> Result<Self> {
        let values = values.unwrap_or_else(|| axis.default_values());
        if values.is_empty() {
            bail!("sweep values are empty");
        }
        if seeds.is_empty() {
            bail!("sweep seeds are empty");
        }
        for &v in &values {
            match axis {
                SweepAxis::Threshold if !(v > 0.0 && v <= 1.0) => {
                    bail!("threshold {v} outside (0, 1]")
                }
                SweepAxis::UnlabeledFraction if !(0.0..1.0).contains(&v) => {
                    bail!("unlabeled fraction {v} outside [0, 1)")
                }
                SweepAxis::Tasks if v.fract() != 0.0 || v < 1.0 => {
                    bail!("task count {v} is not a positive integer")
                }
                _ => {}
            }
        }
        Ok(SweepPlan {
            axis: Some(axis),
            values,
            seeds,
            jobs: jobs.max(1),
        })
    }

    pub fn points(&self) -> usize {
        self.values.len() * self.seeds.len()
    }
}

/// One sweep point's result: the point's name and what came of running it.
#[derive(Debug)]
pub struct PointOutcome {
    pub name: String,
    pub result: Result<RunSummary, String>,
}

/// Expands the plan against the base spec. Point order is the written row
/// order: values outer, seeds inner.
fn expand(base: &ExperimentSpec, plan: &SweepPlan) -> Vec<ExperimentSpec> {
    let mut specs = Vec::with_capacity(plan.points());
    for &value in &plan.values {
        for &seed in &plan.seeds {
            let mut spec = base.clone();
            spec.seed = seed;
            let mut name = base.name.clone();
            if let Some(axis) = plan.axis {
                match axis {
                    SweepAxis::Threshold => spec.hybrid.threshold = value,
                    SweepAxis::UnlabeledFraction => spec.unlabeled_fraction = value,
                    SweepAxis::Tasks => spec.tasks = value as usize,
                }
                name = format!("{name}-{}{value}", axis.label());
            }
            if plan.seeds.len() > 1 || plan.axis.is_some() {
                name = format!("{name}-s{seed}");
            }
            spec.name = name;
            specs.push(spec);
        }
    }
    specs
}

/// Runs every point, `jobs` at a time. Results land in point order behind a
/// single lock, so concurrent workers never interleave partial writes; a
/// point's error is captured in its slot and the remaining points still run.
pub fn run_sweep(
    base: &ExperimentSpec,
    plan: &SweepPlan,
    out_dir: Option<&Path>,
    save_models: bool,
    dump_lp: bool,
) -> Vec<PointOutcome> {
    let specs = expand(base, plan);
    let queue: Mutex<VecDeque<(usize, ExperimentSpec)>> =
        Mutex::new(specs.into_iter().enumerate().collect());
    let slots: Mutex<Vec<Option<PointOutcome>>> = {
        let mut v = Vec::new();
        v.resize_with(plan.points(), || None);
        Mutex::new(v)
    };

    let workers = plan.jobs.min(plan.points()).max(1);
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let Some((index, spec)) = queue.lock().unwrap().pop_front() else {
                    return;
                };
                let options = OutputOptions {
                    dir: out_dir.map(|d| d.join("points").join(&spec.name)),
                    save_models,
                    dump_lp,
                };
                let result = run_experiment(&spec, &options).map_err(|e| e.to_string());
                let outcome = PointOutcome {
                    name: spec.name.clone(),
                    result,
                };
                slots.lock().unwrap()[index] = Some(outcome);
            });
        }
    });

    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("every point ran"))
        .collect()
}
