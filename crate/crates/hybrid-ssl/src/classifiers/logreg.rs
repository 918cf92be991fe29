//! One-vs-rest logistic regression trained by full-batch gradient descent.
//!
//! Each class gets its own binary model against the rest of the data,
//! minimizing mean cross-entropy with an L2 penalty on the weights (the
//! intercept is never penalized, so even under crushing regularization the
//! model can still express class priors). Training starts from zeros and
//! uses no randomness, so identical inputs produce identical models.
//! Prediction picks the class whose linear score `w_k . x + b_k` is largest,
//! breaking ties toward the lowest class index.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Gradient-descent hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogregParams {
    /// Step size.
    pub lr: f64,
    /// Full-batch epochs per binary model.
    pub epochs: usize,
    /// L2 penalty coefficient on the weights (not the intercept).
    pub l2: f64,
}

impl Default for LogregParams {
    fn default() -> Self {
        LogregParams {
            lr: 0.1,
            epochs: 500,
            l2: 1e-3,
        }
    }
}

impl LogregParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be finite and positive, got {}",
                self.lr
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "l2 penalty must be finite and nonnegative, got {}",
                self.l2
            )));
        }
        Ok(())
    }
}

/// Trained one-vs-rest model: one weight vector and intercept per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogregModel {
    pub n_classes: usize,
    pub dim: usize,
    /// `weights[k]` scores class `k` against the rest.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl LogregModel {
    /// Per-class linear scores `w_k . x + b_k`.
    pub fn scores(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.dim {
            return Err(Error::FeatureDim {
                expected: self.dim,
                got: features.len(),
            });
        }
        Ok((0..self.n_classes)
            .map(|k| {
                self.biases[k]
                    + self.weights[k]
                        .iter()
                        .zip(features)
                        .map(|(w, x)| w * x)
                        .sum::<f64>()
            })
            .collect())
    }

    /// Class with the largest score; ties break toward the lowest index.
    pub fn predict(&self, features: &[f64]) -> Result<usize> {
        let scores = self.scores(features)?;
        let mut best = 0;
        for k in 1..scores.len() {
            if scores[k] > scores[best] {
                best = k;
            }
        }
        Ok(best)
    }
}

/// Regularized mean cross-entropy and its analytic gradient at `(weights,
/// bias)` for binary targets `ts` in `{0, 1}`:
///
/// ```text
/// loss = 1/n * sum_i [softplus(z_i) - t_i * z_i] + l2/2 * ||w||^2
/// z_i  = w . x_i + bias
/// ```
///
/// Returns `(loss, d_loss/d_w, d_loss/d_bias)`. Exposed so the gradient can
/// be validated against finite differences.
pub fn loss_and_gradient(
    weights: &[f64],
    bias: f64,
    xs: &[Vec<f64>],
    ts: &[f64],
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = xs.len() as f64;
    let dim = weights.len();
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; dim];
    let mut grad_b = 0.0;
    for (x, &t) in xs.iter().zip(ts) {
        let z: f64 = bias + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        // Numerically stable softplus keeps the loss finite even when the
        // score saturates the sigmoid.
        loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - t * z;
        let residual = sigmoid(z) - t;
        for (g, v) in grad_w.iter_mut().zip(x) {
            *g += residual * v;
        }
        grad_b += residual;
    }
    loss /= n;
    grad_b /= n;
    let mut penalty = 0.0;
    for (g, &w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
        penalty += w * w;
    }
    loss += 0.5 * l2 * penalty;
    (loss, grad_w, grad_b)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Trains one binary model per class on the labeled records of `dataset`.
/// Every class must contribute at least one labeled record.
pub fn train_logreg(dataset: &Dataset, params: &LogregParams) -> Result<LogregModel> {
    params.validate()?;
    let counts = dataset.class_counts();
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(Error::UnlabeledClass { class });
    }
    let labeled: Vec<(&Vec<f64>, usize)> = dataset
        .records()
        .iter()
        .filter_map(|r| r.label.map(|l| (&r.features, l)))
        .collect();
    let xs: Vec<Vec<f64>> = labeled.iter().map(|(x, _)| (*x).clone()).collect();

    let dim = dataset.dim();
    let mut weights = Vec::with_capacity(dataset.n_classes());
    let mut biases = Vec::with_capacity(dataset.n_classes());
    for class in 0..dataset.n_classes() {
        let ts: Vec<f64> = labeled
            .iter()
            .map(|&(_, l)| if l == class { 1.0 } else { 0.0 })
            .collect();
        let mut w = vec![0.0; dim];
        let mut b = 0.0;
        for epoch in 0..params.epochs {
            let (loss, grad_w, grad_b) = loss_and_gradient(&w, b, &xs, &ts, params.l2);
            if !loss.is_finite() {
                return Err(Error::Diverged(epoch));
            }
            for (wi, gi) in w.iter_mut().zip(&grad_w) {
                *wi -= params.lr * gi;
            }
            b -= params.lr * grad_b;
        }
        if w.iter().any(|v| !v.is_finite()) || !b.is_finite() {
            return Err(Error::Diverged(params.epochs));
        }
        weights.push(w);
        biases.push(b);
    }
    Ok(LogregModel {
        n_classes: dataset.n_classes(),
        dim,
        weights,
        biases,
    })
}
