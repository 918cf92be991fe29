//! The agreement-gated labeling loop.
//!
//! Each iteration forms two independent opinions about every unlabeled
//! record and commits a label only where they coincide:
//!
//! 1. propagate labels over the similarity graph of *all* records, yielding
//!    a class-probability row per record;
//! 2. fit the supervised classifier on the currently labeled records only;
//! 3. for each unlabeled record, take the classifier's predicted class `k`
//!    and accept it if the propagated probability of `k` is at least the
//!    confidence threshold;
//! 4. append the accepted records to the labeled pool and go again.
//!
//! All gate decisions within an iteration are made against the same
//! propagation matrix and the same fitted classifier — records accepted
//! earlier in the sweep do not influence later decisions until the next
//! iteration. Unlabeled records are always visited in ascending id order,
//! which (together with deterministic propagation and training) makes whole
//! runs reproducible bit for bit.
//!
//! The loop ends when everything is labeled or when an iteration accepts
//! nothing. Every iteration before the last accepts at least one record, so
//! a run performs at most `u + 1` iterations for `u` initially unlabeled
//! records.
//!
//! The similarity graph depends only on features, so it is built once and
//! reused across iterations; only the clamped rows change as labels
//! accumulate.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::classifiers::{self, ClassifierSpec, TrainedModel};
use crate::data::{Dataset, Record};
use crate::error::{Error, Result};
use crate::graph_lp::{
    build_weights, default_sigma, propagate, row_normalize, LpParams, ProbabilityMatrix,
};
use crate::timing::Stopwatch;

/// Knobs for [`hybrid_fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    /// Minimum propagated probability the classifier's pick must reach for a
    /// record to be labeled, in `(0, 1]`.
    pub threshold: f64,
    pub lp: LpParams,
    pub classifier: ClassifierSpec,
    /// Retrain the returned model on the final labeled set (default). When
    /// disabled the model is the one fitted in the last executed iteration,
    /// i.e. it has not seen that iteration's newly accepted labels.
    pub refit_final: bool,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            threshold: 0.7,
            lp: LpParams::default(),
            classifier: ClassifierSpec::default(),
            refit_final: true,
        }
    }
}

impl HybridConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold.is_finite() && self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold must lie in (0, 1], got {}",
                self.threshold
            )));
        }
        self.lp.validate()?;
        self.classifier.validate()
    }
}

/// One record accepted by the agreement gate: the classifier proposed
/// `classifier_out` and propagation assigned that class probability
/// `lp_prob`, at or above the run's threshold. `class` is the label that was
/// committed (always equal to `classifier_out`; both are logged so audits
/// need not take that on faith).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEvent {
    pub id: usize,
    pub class: usize,
    pub classifier_out: usize,
    pub lp_prob: f64,
}

/// Everything that happened in one iteration of the loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationLog {
    /// 1-based iteration number.
    pub iteration: usize,
    /// Labeled records when the iteration started.
    pub labeled_before: usize,
    /// Records the gate accepted this iteration.
    pub newly_labeled: usize,
    pub events: Vec<LabelEvent>,
    /// Propagation sweeps until convergence (or the cap).
    pub lp_iterations: usize,
    pub lp_converged: bool,
    pub lp_ms: f64,
    pub fit_ms: f64,
    pub gate_ms: f64,
}

/// Why the loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Every record carries a label.
    AllLabeled,
    /// An iteration accepted nothing; the remaining records stay unlabeled.
    NoProgress,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::AllLabeled => write!(f, "all_labeled"),
            Termination::NoProgress => write!(f, "no_progress"),
        }
    }
}

/// Output of a labeling run.
#[derive(Debug, Clone)]
pub struct HybridResult {
    /// The input dataset with every accepted label filled in. Records the
    /// gate never passed remain unlabeled.
    pub dataset: Dataset,
    /// Final classifier; see [`HybridConfig::refit_final`].
    pub model: TrainedModel,
    pub iterations: Vec<IterationLog>,
    pub termination: Termination,
    /// RBF bandwidth the graph was built with.
    pub sigma: f64,
}

/// `(id, position)` of each unlabeled record, ascending by id.
pub(crate) fn unlabeled_pairs(records: &[Record]) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.label.is_none())
        .map(|(pos, r)| (r.id, pos))
        .collect();
    pairs.sort_unstable_by_key(|&(id, _)| id);
    pairs
}

/// Applies the agreement gate to the given `(id, position)` pairs using one
/// fixed probability matrix and one fixed model. Shared by the serial sweep
/// and the chunked parallel sweep so both make literally the same decisions.
pub(crate) fn gate_pairs(
    records: &[Record],
    pairs: &[(usize, usize)],
    lp_probs: &ProbabilityMatrix,
    model: &TrainedModel,
    threshold: f64,
) -> Result<Vec<LabelEvent>> {
    if lp_probs.n_rows() != records.len() {
        return Err(Error::LengthMismatch {
            left: lp_probs.n_rows(),
            right: records.len(),
        });
    }
    if model.n_classes() != lp_probs.n_classes() {
        return Err(Error::ClassifierMismatch(format!(
            "model scores {} classes but propagation produced {}",
            model.n_classes(),
            lp_probs.n_classes()
        )));
    }
    if !(threshold.is_finite() && (0.0..=1.0).contains(&threshold)) {
        return Err(Error::InvalidConfig(format!(
            "gate threshold must lie in [0, 1], got {threshold}"
        )));
    }
    let mut events = Vec::new();
    for &(id, pos) in pairs {
        let proposed = model.predict(&records[pos].features)?;
        let lp_prob = lp_probs.prob(pos, proposed);
        if lp_prob >= threshold {
            events.push(LabelEvent {
                id,
                class: proposed,
                classifier_out: proposed,
                lp_prob,
            });
        }
    }
    Ok(events)
}

/// One gate sweep over all unlabeled records (ascending by id), with
/// decisions frozen against the supplied probabilities and model.
///
/// Unlike [`hybrid_fit`] this accepts any threshold in `[0, 1]`; at zero the
/// gate degenerates to "accept whatever the classifier says", which is
/// occasionally useful as a baseline.
pub fn label_step(
    records: &[Record],
    lp_probs: &ProbabilityMatrix,
    model: &TrainedModel,
    threshold: f64,
) -> Result<Vec<LabelEvent>> {
    gate_pairs(records, &unlabeled_pairs(records), lp_probs, model, threshold)
}

/// Runs the full labeling loop on `dataset`.
///
/// Requirements checked up front or by the first iteration: every class has
/// at least one labeled record, and the configuration is valid.
pub fn hybrid_fit(dataset: &Dataset, config: &HybridConfig) -> Result<HybridResult> {
    config.validate()?;
    let n_classes = dataset.n_classes();

    let sigma = match config.lp.sigma {
        Some(s) => s,
        None => default_sigma(dataset)?,
    };
    let transition = row_normalize(&build_weights(dataset, sigma)?)?;

    let mut records: Vec<Record> = dataset.records().to_vec();
    let pos_by_id: HashMap<usize, usize> = records
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

        let sw = Stopwatch::start();
        let labels: Vec<Option<usize>> = records.iter().map(|r| r.label).collect();
        let lp = propagate(
            &transition,
            &labels,
            n_classes,
            config.lp.tol,
            config.lp.max_iter,
        )?;
        let lp_ms = sw.elapsed_ms();

        let sw = Stopwatch::start();
        let current = Dataset::new(records.clone(), n_classes)?;
        let model = classifiers::train(&config.classifier, &current)?;
        let fit_ms = sw.elapsed_ms();

        let sw = Stopwatch::start();
        let events = label_step(&records, &lp.probabilities, &model, config.threshold)?;
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
