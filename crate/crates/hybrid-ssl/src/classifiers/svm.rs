//! Binary soft-margin SVM trained by sequential minimal optimization.
//!
//! The trainer solves the dual problem
//!
//! ```text
//! max_a  sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
//! s.t.   0 <= a_i <= C,   sum_i a_i y_i = 0
//! ```
//!
//! by repeatedly optimizing one pair of multipliers analytically while
//! holding the rest fixed. Working-pair selection is fully deterministic:
//! the first index comes from sweeps in ascending index order (alternating
//! between all points and the non-bound subset), the second maximizes the
//! error difference `|E1 - E2|` with ties and fallbacks resolved in
//! ascending index order. No randomness enters training, so identical inputs
//! always produce bit-identical models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel function for the SVM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    /// Dot product: `K(a, b) = <a, b>`.
    Linear,
    /// Gaussian: `K(a, b) = exp(-gamma * ||a - b||^2)`.
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let sq: f64 = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| {
                        let d = x - y;
                        d * d
                    })
                    .sum();
                (-gamma * sq).exp()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let Kernel::Rbf { gamma } = self {
            if !(gamma.is_finite() && *gamma > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "rbf gamma must be finite and positive, got {gamma}"
                )));
            }
        }
        Ok(())
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    /// Box constraint: the upper bound on every multiplier.
    pub c: f64,
    pub kernel: Kernel,
    /// KKT violation tolerance used when scanning for candidates.
    pub tol: f64,
    /// Cap on outer sweeps; optimization normally stops much earlier, when a
    /// full sweep finds nothing left to improve.
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            kernel: Kernel::Linear,
            tol: 1e-3,
            max_passes: 10_000,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "svm C must be finite and positive, got {}",
                self.c
            )));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "svm tolerance must be finite and positive, got {}",
                self.tol
            )));
        }
        if self.max_passes == 0 {
            return Err(Error::InvalidConfig("svm max_passes must be at least 1".into()));
        }
        self.kernel.validate()
    }
}

/// A trained binary model. Every training point is retained together with
/// its multiplier so that optimality can be audited after the fact;
/// prediction skips the zero multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmBinaryModel {
    pub kernel: Kernel,
    /// Multiplier per training point, inside `[0, C]`.
    pub alphas: Vec<f64>,
    /// Training targets, each `+1` or `-1`.
    pub ys: Vec<f64>,
    /// Training points.
    pub xs: Vec<Vec<f64>>,
    /// Intercept.
    pub b: f64,
}

impl SvmBinaryModel {
    /// Signed distance proxy: `sum_i a_i y_i K(x_i, x) + b`.
    pub fn decision(&self, x: &[f64]) -> f64 {
        let mut sum = self.b;
        for i in 0..self.alphas.len() {
            if self.alphas[i] > 0.0 {
                sum += self.alphas[i] * self.ys[i] * self.kernel.eval(&self.xs[i], x);
            }
        }
        sum
    }

    /// `+1.0` when the decision value is nonnegative, else `-1.0`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        if self.decision(x) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Number of support vectors (strictly positive multipliers).
    pub fn n_support(&self) -> usize {
        self.alphas.iter().filter(|&&a| a > 0.0).count()
    }

    /// Dual objective `sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K_ij`.
    pub fn dual_objective(&self) -> f64 {
        let n = self.alphas.len();
        let mut linear = 0.0;
        let mut quad = 0.0;
        for i in 0..n {
            if self.alphas[i] == 0.0 {
                linear += 0.0;
                continue;
            }
            linear += self.alphas[i];
            for j in 0..n {
                if self.alphas[j] == 0.0 {
                    continue;
                }
                quad += self.alphas[i]
                    * self.alphas[j]
                    * self.ys[i]
                    * self.ys[j]
                    * self.kernel.eval(&self.xs[i], &self.xs[j]);
            }
        }
        linear - 0.5 * quad
    }

    /// Primal objective `1/2 ||w||^2 + C * sum_i hinge(y_i f(x_i))`, with
    /// the norm taken in the kernel's feature space.
    pub fn primal_objective(&self, c: f64) -> f64 {
        let n = self.alphas.len();
        let mut norm_sq = 0.0;
        for i in 0..n {
            if self.alphas[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                if self.alphas[j] == 0.0 {
                    continue;
                }
                norm_sq += self.alphas[i]
                    * self.alphas[j]
                    * self.ys[i]
                    * self.ys[j]
                    * self.kernel.eval(&self.xs[i], &self.xs[j]);
            }
        }
        let hinge: f64 = (0..n)
            .map(|i| (1.0 - self.ys[i] * self.decision(&self.xs[i])).max(0.0))
            .sum();
        0.5 * norm_sq + c * hinge
    }

    /// Exact residual of the equality constraint `sum_i a_i y_i`.
    pub fn sum_alpha_y(&self) -> f64 {
        self.alphas
            .iter()
            .zip(&self.ys)
            .map(|(a, y)| a * y)
            .sum()
    }

    /// Largest violation of the optimality conditions over the training set:
    ///
    /// - `a_i = 0`   requires `y_i f(x_i) >= 1`,
    /// - `0 < a_i < C` requires `y_i f(x_i) = 1`,
    /// - `a_i = C`   requires `y_i f(x_i) <= 1`.
    ///
    /// Multipliers within `bound_eps` of the box edges count as bound.
    pub fn kkt_violation(&self, c: f64, bound_eps: f64) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.alphas.len() {
            let margin = self.ys[i] * self.decision(&self.xs[i]);
            let a = self.alphas[i];
            let violation = if a <= bound_eps {
                (1.0 - margin).max(0.0)
            } else if a >= c - bound_eps {
                (margin - 1.0).max(0.0)
            } else {
                (margin - 1.0).abs()
            };
            worst = worst.max(violation);
        }
        worst
    }
}

/// Multiplier changes smaller than this are treated as no progress.
const ALPHA_EPS: f64 = 1e-10;

/// Trains a binary SVM on `(xs, ys)` with targets in `{-1, +1}`.
pub fn smo_train(xs: &[Vec<f64>], ys: &[f64], params: &SvmParams) -> Result<SvmBinaryModel> {
    params.validate()?;
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.is_empty() {
        return Err(Error::InvalidConfig("svm training set is empty".into()));
    }
    let dim = xs[0].len();
    for x in xs {
        if x.len() != dim {
            return Err(Error::FeatureDim {
                expected: dim,
                got: x.len(),
            });
        }
    }
    if ys.iter().any(|y| *y != 1.0 && *y != -1.0) {
        return Err(Error::InvalidConfig(
            "svm targets must be +1 or -1".into(),
        ));
    }
    if ys.iter().all(|&y| y == ys[0]) {
        return Err(Error::SingleClass(ys[0] as i8));
    }

    let n = xs.len();
    // Precomputed Gram matrix; training touches kernel values many times.
    let mut gram = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i..n {
            let k = params.kernel.eval(&xs[i], &xs[j]);
            gram[i * n + j] = k;
            gram[j * n + i] = k;
        }
    }

    let mut state = Smo {
        gram,
        ys,
        n,
        c: params.c,
        tol: params.tol,
        alphas: vec![0.0; n],
        errors: ys.iter().map(|y| -y).collect(), // f(x) = 0 initially
        b: 0.0,
    };

    // Platt's outer loop: sweep everything once, then keep sweeping the
    // non-bound subset while it yields progress, falling back to full sweeps
    // until one of those finds nothing either.
    let mut examine_all = true;
    let mut passes = 0;
    loop {
        let mut changed = 0;
        for i in 0..n {
            if examine_all || state.is_non_bound(i) {
                changed += state.examine(i) as usize;
            }
        }
        passes += 1;
        if passes >= params.max_passes {
            break;
        }
        if examine_all {
            if changed == 0 {
                break;
            }
            examine_all = false;
        } else if changed == 0 {
            examine_all = true;
        }
    }

    Ok(SvmBinaryModel {
        kernel: params.kernel,
        alphas: state.alphas,
        ys: ys.to_vec(),
        xs: xs.to_vec(),
        b: state.b,
    })
}

struct Smo<'a> {
    gram: Vec<f64>,
    ys: &'a [f64],
    n: usize,
    c: f64,
    tol: f64,
    alphas: Vec<f64>,
    /// `E_i = f(x_i) - y_i`, kept current for every point.
    errors: Vec<f64>,
    b: f64,
}

impl Smo<'_> {
    fn k(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.n + j]
    }

    fn is_non_bound(&self, i: usize) -> bool {
        self.alphas[i] > 0.0 && self.alphas[i] < self.c
    }

    /// Checks whether `i2` violates its optimality condition and, if so,
    /// tries partners for a joint step. Returns true when a step was taken.
    fn examine(&mut self, i2: usize) -> bool {
        let y2 = self.ys[i2];
        let a2 = self.alphas[i2];
        let e2 = self.errors[i2];
        let r2 = e2 * y2;
        let violates = (r2 < -self.tol && a2 < self.c) || (r2 > self.tol && a2 > 0.0);
        if !violates {
            return false;
        }

        // Best heuristic partner: the non-bound point with the largest
        // |E1 - E2|, earliest index on ties.
        let mut best: Option<(usize, f64)> = None;
        for i1 in 0..self.n {
            if i1 == i2 || !self.is_non_bound(i1) {
                continue;
            }
            let gap = (self.errors[i1] - e2).abs();
            if best.is_none_or(|(_, g)| gap > g) {
                best = Some((i1, gap));
            }
        }
        if let Some((i1, _)) = best {
            if self.take_step(i1, i2) {
                return true;
            }
        }
        // Fallbacks, in ascending index order: non-bound partners first,
        // then everything.
        for i1 in 0..self.n {
            if i1 != i2 && self.is_non_bound(i1) && self.take_step(i1, i2) {
                return true;
            }
        }
        for i1 in 0..self.n {
            if i1 != i2 && !self.is_non_bound(i1) && self.take_step(i1, i2) {
                return true;
            }
        }
        false
    }

    /// Jointly optimizes the pair `(i1, i2)` analytically. Returns false
    /// when the pair cannot make progress.
    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        let (y1, y2) = (self.ys[i1], self.ys[i2]);
        let (a1_old, a2_old) = (self.alphas[i1], self.alphas[i2]);
        let (e1, e2) = (self.errors[i1], self.errors[i2]);
        let s = y1 * y2;

        // Feasible segment for a2 under the box and equality constraints.
        let (lo, hi) = if s < 0.0 {
            (
                (a2_old - a1_old).max(0.0),
                (self.c + a2_old - a1_old).min(self.c),
            )
        } else {
            (
                (a2_old + a1_old - self.c).max(0.0),
                (a2_old + a1_old).min(self.c),
            )
        };
        if lo >= hi {
            return false;
        }

        let (k11, k12, k22) = (self.k(i1, i1), self.k(i1, i2), self.k(i2, i2));
        // Second derivative of the objective along the constraint line; a
        // positive-definite kernel makes it negative except for coincident
        // points, where no progress is possible along this pair.
        let eta = 2.0 * k12 - k11 - k22;
        if eta >= 0.0 {
            return false;
        }

        let mut a2 = a2_old - y2 * (e1 - e2) / eta;
        a2 = a2.clamp(lo, hi);
        let delta2 = a2 - a2_old;
        if delta2.abs() < ALPHA_EPS * (a2 + a2_old + ALPHA_EPS) {
            return false;
        }
        // The equality constraint fixes a1's change to the exact negation of
        // a2's (after the sign flip), so sum a_i y_i stays put.
        let a1 = (a1_old + s * (a2_old - a2)).clamp(0.0, self.c);
        let delta1 = a1 - a1_old;

        // Intercept: keep whichever updated point is non-bound exactly on
        // its margin; average when both land on the box edge.
        let b_old = self.b;
        let b1 = b_old - e1 - y1 * delta1 * k11 - y2 * delta2 * k12;
        let b2 = b_old - e2 - y1 * delta1 * k12 - y2 * delta2 * k22;
        let b_new = if a1 > 0.0 && a1 < self.c {
            b1
        } else if a2 > 0.0 && a2 < self.c {
            b2
        } else {
            (b1 + b2) / 2.0
        };

        self.alphas[i1] = a1;
        self.alphas[i2] = a2;
        let db = b_new - b_old;
        self.b = b_new;
        for k in 0..self.n {
            self.errors[k] += y1 * delta1 * self.k(i1, k) + y2 * delta2 * self.k(i2, k) + db;
        }
        true
    }
}
