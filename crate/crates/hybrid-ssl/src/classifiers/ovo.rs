//! One-vs-one reduction from multiclass to binary SVMs.
//!
//! For `C` classes the trainer fits `C * (C - 1) / 2` binary models, one per
//! unordered class pair `(i, j)` with `i < j`, mapping class `i` to target
//! `-1` and class `j` to `+1`. Prediction lets every pair vote for one of
//! its two classes (a nonnegative decision value votes for the `+1` side)
//! and picks the class with the most votes. Vote ties are broken by the sum
//! of absolute decision values over the pairs each tied class won, and any
//! remaining tie falls to the lowest class index.

use serde::{Deserialize, Serialize};

use super::svm::{smo_train, SvmBinaryModel, SvmParams};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// One binary subproblem: `neg_class` is the `-1` side, `pos_class` the
/// `+1` side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub neg_class: usize,
    pub pos_class: usize,
    pub model: SvmBinaryModel,
}

/// A full one-vs-one ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvoModel {
    pub n_classes: usize,
    pub dim: usize,
    /// Pairs in `(0,1), (0,2), ..., (0,C-1), (1,2), ...` order.
    pub pairs: Vec<PairModel>,
}

/// Vote breakdown for one prediction, exposed for auditing tie-breaks.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteTally {
    /// Votes received per class.
    pub votes: Vec<usize>,
    /// Sum of `|decision|` over the pairs each class won.
    pub margins: Vec<f64>,
}

impl VoteTally {
    /// Winning class: most votes, then largest margin, then lowest index.
    pub fn winner(&self) -> usize {
        let mut best = 0;
        for class in 1..self.votes.len() {
            let more_votes = self.votes[class] > self.votes[best];
            let tie_but_stronger = self.votes[class] == self.votes[best]
                && self.margins[class] > self.margins[best];
            if more_votes || tie_but_stronger {
                best = class;
            }
        }
        best
    }
}

/// Trains the ensemble on the labeled records of `dataset`; unlabeled
/// records are ignored. Every class must contribute at least one labeled
/// record, otherwise some pair would be missing a side.
pub fn train_ovo(dataset: &Dataset, params: &SvmParams) -> Result<OvoModel> {
    params.validate()?;
    let n_classes = dataset.n_classes();
    let counts = dataset.class_counts();

    let mut pairs = Vec::with_capacity(n_classes * (n_classes - 1) / 2);
    for i in 0..n_classes {
        for j in (i + 1)..n_classes {
            if counts[i] == 0 || counts[j] == 0 {
                return Err(Error::UntrainablePair(i, j));
            }
            let mut xs = Vec::with_capacity(counts[i] + counts[j]);
            let mut ys = Vec::with_capacity(counts[i] + counts[j]);
            for rec in dataset.records() {
                match rec.label {
                    Some(label) if label == i => {
                        xs.push(rec.features.clone());
                        ys.push(-1.0);
                    }
                    Some(label) if label == j => {
                        xs.push(rec.features.clone());
                        ys.push(1.0);
                    }
                    _ => {}
                }
            }
            let model = smo_train(&xs, &ys, params)?;
            pairs.push(PairModel {
                neg_class: i,
                pos_class: j,
                model,
            });
        }
    }
    Ok(OvoModel {
        n_classes,
        dim: dataset.dim(),
        pairs,
    })
}

impl OvoModel {
    /// Votes and margins for one feature vector.
    pub fn tally(&self, features: &[f64]) -> Result<VoteTally> {
        if features.len() != self.dim {
            return Err(Error::FeatureDim {
                expected: self.dim,
                got: features.len(),
            });
        }
        let mut votes = vec![0usize; self.n_classes];
        let mut margins = vec![0.0f64; self.n_classes];
        for pair in &self.pairs {
            let decision = pair.model.decision(features);
            let winner = if decision >= 0.0 {
                pair.pos_class
            } else {
                pair.neg_class
            };
            votes[winner] += 1;
            margins[winner] += decision.abs();
        }
        Ok(VoteTally { votes, margins })
    }

    /// Predicted class for one feature vector.
    pub fn predict(&self, features: &[f64]) -> Result<usize> {
        Ok(self.tally(features)?.winner())
    }
}
