//! Classification metrics and small analysis helpers.
//!
//! The conventions here are fixed and shared by every caller:
//!
//! - confusion matrices index rows by true class and columns by predicted
//!   class;
//! - any precision, recall, or F-score whose denominator is zero is defined
//!   as zero rather than NaN (a class that is never predicted simply scores
//!   nothing);
//! - macro averaging (the unweighted mean of per-class F-scores) is the
//!   default, with micro averaging available for comparison — on
//!   single-label problems micro-F equals plain accuracy;
//! - rank correlation of a constant sequence is defined as zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid::IterationLog;

/// Counts of (true class, predicted class) pairs. Row = truth, column =
/// prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    /// Wraps explicit counts; must be square and at least 2x2.
    pub fn from_counts(counts: Vec<Vec<usize>>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::EmptyMatrix);
        }
        let n = counts.len();
        for row in &counts {
            if row.len() != n {
                return Err(Error::LengthMismatch {
                    left: n,
                    right: row.len(),
                });
            }
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, truth: usize, predicted: usize) -> usize {
        self.counts[truth][predicted]
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Fraction of diagonal mass; zero for an all-zero matrix.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let hits: usize = (0..self.n_classes()).map(|k| self.counts[k][k]).sum();
        hits as f64 / total as f64
    }

    fn tp_fp_fn(&self, class: usize) -> (usize, usize, usize) {
        let tp = self.counts[class][class];
        let fp = (0..self.n_classes())
            .filter(|&t| t != class)
            .map(|t| self.counts[t][class])
            .sum();
        let fn_ = (0..self.n_classes())
            .filter(|&p| p != class)
            .map(|p| self.counts[class][p])
            .sum();
        (tp, fp, fn_)
    }

    /// Per-class F-scores under the zero-denominator-is-zero convention.
    pub fn per_class_f1(&self) -> Vec<f64> {
        (0..self.n_classes())
            .map(|class| {
                let (tp, fp, fn_) = self.tp_fp_fn(class);
                let precision = ratio(tp, tp + fp);
                let recall = ratio(tp, tp + fn_);
                if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                }
            })
            .collect()
    }
}

fn ratio(num: usize, denom: usize) -> f64 {
    if denom == 0 {
        0.0
    } else {
        num as f64 / denom as f64
    }
}

/// How per-class scores are combined into one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Unweighted mean of per-class F-scores; sensitive to rare classes.
    #[default]
    Macro,
    /// F-score of the pooled counts; dominated by frequent classes.
    Micro,
}

/// Builds a confusion matrix from aligned truth and prediction slices.
pub fn confusion(truths: &[usize], preds: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if truths.len() != preds.len() {
        return Err(Error::LengthMismatch {
            left: truths.len(),
            right: preds.len(),
        });
    }
    if n_classes < 2 {
        return Err(Error::ClassCount { found: n_classes });
    }
    let mut counts = vec![vec![0usize; n_classes]; n_classes];
    for (&t, &p) in truths.iter().zip(preds) {
        if t >= n_classes || p >= n_classes {
            return Err(Error::Invariant(format!(
                "label pair ({t}, {p}) out of range for {n_classes} classes"
            )));
        }
        counts[t][p] += 1;
    }
    ConfusionMatrix::from_counts(counts)
}

/// F-measure of a confusion matrix under the chosen averaging mode.
pub fn f_measure(matrix: &ConfusionMatrix, averaging: Averaging) -> f64 {
    match averaging {
        Averaging::Macro => {
            let scores = matrix.per_class_f1();
            scores.iter().sum::<f64>() / scores.len() as f64
        }
        Averaging::Micro => {
            let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
            for class in 0..matrix.n_classes() {
                let (t, f, n) = matrix.tp_fp_fn(class);
                tp += t;
                fp += f;
                fn_ += n;
            }
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fn_);
            if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            }
        }
    }
}

/// Everything most callers want from one comparison of truths to
/// predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub per_class_f1: Vec<f64>,
}

/// Scores `preds` against `truths` over `n_classes` classes.
pub fn evaluate(truths: &[usize], preds: &[usize], n_classes: usize) -> Result<EvalReport> {
    let confusion = confusion(truths, preds, n_classes)?;
    Ok(EvalReport {
        accuracy: confusion.accuracy(),
        macro_f1: f_measure(&confusion, Averaging::Macro),
        micro_f1: f_measure(&confusion, Averaging::Micro),
        per_class_f1: confusion.per_class_f1(),
        confusion,
    })
}

/// Cumulative percentage of records labeled after each iteration of a
/// labeling run, in `[0, 100]`.
pub fn labeled_percentage(logs: &[IterationLog], total_records: usize) -> Vec<f64> {
    logs.iter()
        .map(|log| {
            let labeled = log.labeled_before + log.newly_labeled;
            100.0 * labeled as f64 / total_records as f64
        })
        .collect()
}

/// Spearman rank correlation between two equally long sequences, using
/// average ranks for ties. A constant sequence has no ranking to speak of;
/// its correlation with anything is defined as zero.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::InvalidConfig(
            "rank correlation needs at least two observations".into(),
        ));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "rank correlation input",
        });
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    Ok(pearson(&rx, &ry))
}

/// Ranks starting at 1, with tied values sharing the mean of their ranks.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j hold equal values; each gets the mean rank.
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mean_rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}
