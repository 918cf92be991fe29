//! Multi-threaded variant of the labeling loop.
//!
//! Parallelism changes the schedule, never the arithmetic. Each iteration:
//!
//! 1. propagation and classifier fitting run concurrently — they read the
//!    same snapshot and write to disjoint outputs;
//! 2. the id-sorted unlabeled list is cut into contiguous chunks, one gate
//!    task per chunk, each predicting and thresholding its own records;
//! 3. chunk results are merged in chunk order (hence ascending id order,
//!    exactly the serial sweep order) and applied.
//!
//! Every task computes precisely what the serial code computes on the same
//! snapshot, and the merge reimposes the serial order, so a parallel run is
//! bit-identical to [`hybrid_fit`] on the same input — a property the tests
//! pin down rather than assume. Worker threads come from [`std::thread`]
//! scopes; nothing is shared mutably, so results cannot depend on
//! scheduling. An optional per-chunk jitter exists purely to let tests
//! scramble completion order and prove the merge does not care.

use crate::classifiers::{self, TrainedModel};
use crate::data::{Dataset, Record};
use crate::error::{Error, Result};
use crate::graph_lp::{build_weights, default_sigma, propagate, row_normalize, LpOutcome};
use crate::hybrid::{gate_pairs, unlabeled_pairs, HybridConfig, HybridResult, IterationLog, LabelEvent, Termination};
use crate::timing::Stopwatch;

/// A computation's output paired with how long it took, in milliseconds.
type Timed<T> = Result<(T, f64)>;

/// Parallel execution knobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ParallelConfig {
    /// Number of gate tasks per iteration (and the chunk count for
    /// prediction helpers). One task reproduces the serial schedule.
    pub tasks: usize,
    /// Milliseconds of artificial per-chunk delay, varied across chunks to
    /// scramble completion order. Zero (the default) in real use; tests use
    /// it to demonstrate schedule independence.
    pub stress_jitter_ms: u64,
}

impl Default for ParallelConfig {
    fn default() -> Self {
        ParallelConfig {
            tasks: 1,
            stress_jitter_ms: 0,
        }
    }
}

impl ParallelConfig {
    pub fn new(tasks: usize) -> Self {
        ParallelConfig {
            tasks,
            ..ParallelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tasks == 0 {
            return Err(Error::InvalidConfig("tasks must be at least 1".into()));
        }
        Ok(())
    }
}

/// Contiguous half-open ranges covering `0..len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkPlan {
    ranges: Vec<(usize, usize)>,
}

impl ChunkPlan {
    pub fn ranges(&self) -> &[(usize, usize)] {
        &self.ranges
    }

    pub fn n_chunks(&self) -> usize {
        self.ranges.len()
    }
}

/// Splits `len` items into `tasks` contiguous chunks: every chunk gets
/// `floor(len / tasks)` items and the last chunk also absorbs the remainder.
pub fn plan_chunks(len: usize, tasks: usize) -> Result<ChunkPlan> {
    if tasks == 0 {
        return Err(Error::InvalidConfig("tasks must be at least 1".into()));
    }
    let base = len / tasks;
    let mut ranges = Vec::with_capacity(tasks);
    for t in 0..tasks {
        let start = t * base;
        let end = if t + 1 == tasks { len } else { start + base };
        ranges.push((start, end));
    }
    Ok(ChunkPlan { ranges })
}

fn jitter(config: &ParallelConfig, chunk_index: usize) {
    if config.stress_jitter_ms > 0 {
        let ms = (chunk_index as u64 * 37 + 11) % config.stress_jitter_ms.max(1);
        std::thread::sleep(std::time::Duration::from_millis(ms));
    }
}

/// Predicts a batch of feature vectors with `tasks` worker threads. Outputs
/// are in input order, identical to predicting serially.
pub fn parallel_predict(
    model: &TrainedModel,
    inputs: &[Vec<f64>],
    config: &ParallelConfig,
) -> Result<Vec<usize>> {
    config.validate()?;
    let plan = plan_chunks(inputs.len(), config.tasks)?;
    let chunk_results: Vec<Result<Vec<usize>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = plan
            .ranges()
            .iter()
            .enumerate()
            .map(|(idx, &(start, end))| {
                scope.spawn(move || {
                    jitter(config, idx);
                    inputs[start..end]
                        .iter()
                        .map(|x| model.predict(x))
                        .collect::<Result<Vec<usize>>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in chunk_results {
        out.extend(chunk?);
    }
    Ok(out)
}

/// One parallel gate sweep: chunked prediction + thresholding over the
/// id-sorted unlabeled records, merged back in chunk order.
fn parallel_label_step(
    records: &[Record],
    lp_probs: &crate::graph_lp::ProbabilityMatrix,
    model: &TrainedModel,
    threshold: f64,
    config: &ParallelConfig,
) -> Result<Vec<LabelEvent>> {
    let pairs = unlabeled_pairs(records);
    let plan = plan_chunks(pairs.len(), config.tasks)?;
    let chunk_results: Vec<Result<Vec<LabelEvent>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = plan
            .ranges()
            .iter()
            .enumerate()
            .map(|(idx, &(start, end))| {
                let pairs = &pairs[start..end];
                scope.spawn(move || {
                    jitter(config, idx);
                    gate_pairs(records, pairs, lp_probs, model, threshold)
                })
            })
            .collect();
        // Joining in spawn order makes the merge order a function of the
        // plan alone, not of which task finished first.
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut events = Vec::new();
    for chunk in chunk_results {
        events.extend(chunk?);
    }
    Ok(events)
}

/// Runs the labeling loop with intra-iteration parallelism. Produces the
/// same labels, events, model, and termination as [`hybrid_fit`] on the same
/// input, differing only in recorded timings.
pub fn parallel_hybrid_fit(
    dataset: &Dataset,
    config: &HybridConfig,
    par: &ParallelConfig,
) -> Result<HybridResult> {
    config.validate()?;
    par.validate()?;
    let n_classes = dataset.n_classes();

    let sigma = match config.lp.sigma {
        Some(s) => s,
        None => default_sigma(dataset)?,
    };
    let transition = row_normalize(&build_weights(dataset, sigma)?)?;

    let mut records: Vec<Record> = dataset.records().to_vec();
    let pos_by_id: std::collections::HashMap<usize, usize> = records
        .iter()
        .enumerate()
        .map(|(pos, r)| (r.id, pos))
        .collect();

    let mut iterations: Vec<IterationLog> = Vec::new();
    let mut last_model: Option<TrainedModel> = None;
    let termination = loop {
        let labeled_before = records.iter().filter(|r| r.label.is_some()).count();
        if labeled_before == records.len() {
            break Termination::AllLabeled;
        }

        // Propagation and classifier fit read the same snapshot and are
        // independent, so they run side by side.
        let labels: Vec<Option<usize>> = records.iter().map(|r| r.label).collect();
        let current = Dataset::new(records.clone(), n_classes)?;
        let (lp_res, fit_res): (Timed<LpOutcome>, Timed<TrainedModel>) =
            std::thread::scope(|scope| {
                let transition = &transition;
                let labels = &labels;
                let lp_handle = scope.spawn(move || {
                    let sw = Stopwatch::start();
                    let lp = propagate(
                        transition,
                        labels,
                        n_classes,
                        config.lp.tol,
                        config.lp.max_iter,
                    )?;
                    Ok((lp, sw.elapsed_ms()))
                });
                let current = &current;
                let fit_handle = scope.spawn(move || {
                    let sw = Stopwatch::start();
                    let model = classifiers::train(&config.classifier, current)?;
                    Ok((model, sw.elapsed_ms()))
                });
                (lp_handle.join().unwrap(), fit_handle.join().unwrap())
            });
        let (lp, lp_ms) = lp_res?;
        let (model, fit_ms) = fit_res?;

        let sw = Stopwatch::start();
        let events =
            parallel_label_step(&records, &lp.probabilities, &model, config.threshold, par)?;
        for event in &events {
            records[pos_by_id[&event.id]].label = Some(event.class);
        }
        let gate_ms = sw.elapsed_ms();

        let newly_labeled = events.len();
        iterations.push(IterationLog {
            iteration: iterations.len() + 1,
            labeled_before,
            newly_labeled,
            events,
            lp_iterations: lp.iterations,
            lp_converged: lp.converged,
            lp_ms,
            fit_ms,
            gate_ms,
        });
        last_model = Some(model);
        if newly_labeled == 0 {
            break Termination::NoProgress;
        }
    };

    let model = match last_model {
        Some(m) if !config.refit_final => m,
        _ => {
            let final_ds = Dataset::new(records.clone(), n_classes)?;
            classifiers::train(&config.classifier, &final_ds)?
        }
    };

    Ok(HybridResult {
        dataset: Dataset::new(records, n_classes)?,
        model,
        iterations,
        termination,
        sigma,
    })
}
