//! Graph-based label propagation.
//!
//! Records become nodes of a fully connected similarity graph with RBF edge
//! weights `w_ij = exp(-||x_i - x_j||^2 / sigma^2)` and a zero diagonal. Row
//! normalization turns the weights into a transition matrix `T`, and labels
//! spread by repeatedly applying
//!
//! ```text
//! F <- T * F,   then re-clamp labeled rows to their one-hot vectors
//! ```
//!
//! starting from one-hot rows for labeled records and uniform `1/C` rows for
//! unlabeled ones, until the largest entry change falls below a tolerance.
//! Because labeled rows are clamped, the unlabeled block converges to the
//! harmonic solution `F_U = (I - T_UU)^-1 T_UL Y_L`, which
//! [`closed_form_lp`] computes directly; the two routes agree to within the
//! iteration tolerance and serve as cross-checks on each other.
//!
//! The quality of a labeling can be summarized by the quadratic [`energy`]
//! `E(F) = 1/2 * sum_ij w_ij ||F_i - F_j||^2`: smoother labelings over
//! heavier edges score lower.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Tuning knobs for [`run_lp`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LpParams {
    /// RBF bandwidth. `None` picks a data-driven value via [`default_sigma`].
    pub sigma: Option<f64>,
    /// Convergence threshold on the largest absolute entry change.
    pub tol: f64,
    /// Iteration cap.
    pub max_iter: usize,
}

impl Default for LpParams {
    fn default() -> Self {
        LpParams {
            sigma: None,
            tol: 1e-6,
            max_iter: 1000,
        }
    }
}

impl LpParams {
    pub fn validate(&self) -> Result<()> {
        if let Some(sigma) = self.sigma {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "sigma must be finite and positive, got {sigma}"
                )));
            }
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lp tolerance must be finite and positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("lp max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Symmetric nonnegative edge weights with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(Array2<f64>);

impl WeightMatrix {
    /// Validates and wraps an explicit weight matrix: square, finite,
    /// nonnegative, symmetric, zero diagonal.
    pub fn from_array(weights: Array2<f64>) -> Result<Self> {
        let (rows, cols) = weights.dim();
        if rows != cols {
            return Err(Error::Invariant(format!(
                "weight matrix must be square, got {rows}x{cols}"
            )));
        }
        for i in 0..rows {
            if weights[[i, i]] != 0.0 {
                return Err(Error::Invariant(format!(
                    "weight matrix diagonal must be zero (row {i})"
                )));
            }
            for j in 0..cols {
                let w = weights[[i, j]];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::NonFinite { context: "weights" });
                }
                if (w - weights[[j, i]]).abs() > 1e-12 {
                    return Err(Error::Invariant(format!(
                        "weight matrix must be symmetric (entry {i},{j})"
                    )));
                }
            }
        }
        Ok(WeightMatrix(weights))
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }
}

/// Row-stochastic transition matrix derived from a [`WeightMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix(Array2<f64>);

impl TransitionMatrix {
    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }
}

/// Per-record class probabilities, one row per record in dataset order.
/// Labeled rows are exact one-hot vectors; unlabeled rows sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix(Array2<f64>);

impl ProbabilityMatrix {
    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn n_rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.0.ncols()
    }

    pub fn prob(&self, row: usize, class: usize) -> f64 {
        self.0[[row, class]]
    }

    /// Most probable class for `row`; ties break toward the lowest index.
    pub fn hard_label(&self, row: usize) -> usize {
        let mut best = 0;
        for class in 1..self.n_classes() {
            if self.0[[row, class]] > self.0[[row, best]] {
                best = class;
            }
        }
        best
    }
}

/// Result of a full propagation run.
#[derive(Debug, Clone)]
pub struct LpOutcome {
    pub probabilities: ProbabilityMatrix,
    pub iterations: usize,
    pub converged: bool,
}

/// Data-driven RBF bandwidth: one third of the mean pairwise Euclidean
/// distance, estimated over at most 1000 pairs.
///
/// Small datasets use every pair; larger ones sample distinct pairs with a
/// fixed internal seed, so the value is a pure function of the data. The
/// result is floored at `1e-9` to stay usable when many points coincide.
pub fn default_sigma(dataset: &Dataset) -> Result<f64> {
    let n = dataset.len();
    if n < 2 {
        return Err(Error::InvalidConfig(
            "bandwidth estimation needs at least two records".into(),
        ));
    }
    const MAX_PAIRS: usize = 1000;
    let total_pairs = n * (n - 1) / 2;
    let recs = dataset.records();

    let mut sum = 0.0;
    let mut count = 0usize;
    if total_pairs <= MAX_PAIRS {
        for i in 0..n {
            for j in (i + 1)..n {
                sum += sq_dist(&recs[i].features, &recs[j].features).sqrt();
                count += 1;
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x51_6d_a0);
        let mut seen = std::collections::HashSet::with_capacity(MAX_PAIRS);
        while count < MAX_PAIRS {
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            if i == j {
                continue;
            }
            let key = (i.min(j), i.max(j));
            if !seen.insert(key) {
                continue;
            }
            sum += sq_dist(&recs[key.0].features, &recs[key.1].features).sqrt();
            count += 1;
        }
    }
    let mean = sum / count as f64;
    if !mean.is_finite() {
        return Err(Error::NonFinite {
            context: "mean pairwise distance",
        });
    }
    Ok((mean / 3.0).max(1e-9))
}

/// Builds the RBF weight matrix `w_ij = exp(-||x_i - x_j||^2 / sigma^2)`
/// with a zero diagonal.
pub fn build_weights(dataset: &Dataset, sigma: f64) -> Result<WeightMatrix> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "sigma must be finite and positive, got {sigma}"
        )));
    }
    let n = dataset.len();
    let recs = dataset.records();
    let inv_sigma_sq = 1.0 / (sigma * sigma);
    let mut weights = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let w = (-sq_dist(&recs[i].features, &recs[j].features) * inv_sigma_sq).exp();
            weights[[i, j]] = w;
            weights[[j, i]] = w;
        }
    }
    Ok(WeightMatrix(weights))
}

/// Divides each row by its sum, producing a row-stochastic matrix. A row
/// whose weights all vanished (everything too far away under the chosen
/// bandwidth) cannot be normalized and is reported as an error.
pub fn row_normalize(weights: &WeightMatrix) -> Result<TransitionMatrix> {
    let mut t = weights.0.clone();
    for (row, mut entries) in t.rows_mut().into_iter().enumerate() {
        let sum: f64 = entries.iter().sum();
        if sum <= 0.0 || !sum.is_finite() {
            return Err(Error::ZeroRowSum { row });
        }
        entries.mapv_inplace(|w| w / sum);
    }
    Ok(TransitionMatrix(t))
}

/// Iterative clamped propagation over an explicit label slice (one entry per
/// graph node, in row order).
///
/// Every class must have at least one labeled node; otherwise nothing could
/// ever pull probability mass toward it. Returns the converged probabilities
/// along with the iteration count; `converged` is false when the cap was hit
/// first.
pub fn propagate(
    transition: &TransitionMatrix,
    labels: &[Option<usize>],
    n_classes: usize,
    tol: f64,
    max_iter: usize,
) -> Result<LpOutcome> {
    check_labels(transition.len(), labels, n_classes)?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "lp tolerance must be finite and positive, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidConfig("lp max_iter must be at least 1".into()));
    }

    let n = labels.len();
    let mut f = Array2::from_elem((n, n_classes), 1.0 / n_classes as f64);
    clamp_labeled(&mut f, labels);

    let t = transition.as_array();
    for iteration in 1..=max_iter {
        let mut next = t.dot(&f);
        clamp_labeled(&mut next, labels);
        let delta = next
            .iter()
            .zip(f.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        f = next;
        if delta < tol {
            return Ok(LpOutcome {
                probabilities: ProbabilityMatrix(f),
                iterations: iteration,
                converged: true,
            });
        }
    }
    Ok(LpOutcome {
        probabilities: ProbabilityMatrix(f),
        iterations: max_iter,
        converged: false,
    })
}

/// Fixed point of the clamped iteration, computed directly: labeled rows are
/// one-hot and the unlabeled block solves `(I - T_UU) F_U = T_UL Y_L`.
pub fn closed_form_lp(
    transition: &TransitionMatrix,
    labels: &[Option<usize>],
    n_classes: usize,
) -> Result<ProbabilityMatrix> {
    check_labels(transition.len(), labels, n_classes)?;
    let n = labels.len();
    let unlabeled: Vec<usize> = (0..n).filter(|&i| labels[i].is_none()).collect();
    let labeled: Vec<usize> = (0..n).filter(|&i| labels[i].is_some()).collect();

    let mut f = Array2::zeros((n, n_classes));
    clamp_labeled(&mut f, labels);
    if unlabeled.is_empty() {
        return Ok(ProbabilityMatrix(f));
    }

    let t = transition.as_array();
    let n_u = unlabeled.len();
    // a = I - T_UU
    let mut a = Array2::zeros((n_u, n_u));
    for (ri, &i) in unlabeled.iter().enumerate() {
        for (rj, &j) in unlabeled.iter().enumerate() {
            a[[ri, rj]] = if ri == rj { 1.0 } else { 0.0 } - t[[i, j]];
        }
    }
    // b = T_UL * Y_L
    let mut b = Array2::zeros((n_u, n_classes));
    for (ri, &i) in unlabeled.iter().enumerate() {
        for &j in &labeled {
            let class = labels[j].expect("labeled index");
            b[[ri, class]] += t[[i, j]];
        }
    }
    let solution = solve_dense(a, b)?;
    for (ri, &i) in unlabeled.iter().enumerate() {
        for class in 0..n_classes {
            f[[i, class]] = solution[[ri, class]];
        }
    }
    Ok(ProbabilityMatrix(f))
}

/// Quadratic smoothness of a labeling over the similarity graph:
/// `1/2 * sum_ij w_ij ||F_i - F_j||^2`.
pub fn energy(weights: &WeightMatrix, probabilities: &ProbabilityMatrix) -> Result<f64> {
    let n = weights.len();
    if probabilities.n_rows() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: probabilities.n_rows(),
        });
    }
    let w = weights.as_array();
    let f = probabilities.as_array();
    let c = f.ncols();
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let mut sq = 0.0;
            for k in 0..c {
                let d = f[[i, k]] - f[[j, k]];
                sq += d * d;
            }
            // Each unordered pair appears twice in the double sum, which
            // cancels the leading 1/2.
            total += w[[i, j]] * sq;
        }
    }
    Ok(total)
}

/// End-to-end propagation for a dataset: bandwidth selection, graph
/// construction, normalization, and iteration in one call.
pub fn run_lp(dataset: &Dataset, params: &LpParams) -> Result<LpRun> {
    params.validate()?;
    let sigma = match params.sigma {
        Some(s) => s,
        None => default_sigma(dataset)?,
    };
    let weights = build_weights(dataset, sigma)?;
    let transition = row_normalize(&weights)?;
    let labels: Vec<Option<usize>> = dataset.records().iter().map(|r| r.label).collect();
    let outcome = propagate(
        &transition,
        &labels,
        dataset.n_classes(),
        params.tol,
        params.max_iter,
    )?;
    Ok(LpRun {
        probabilities: outcome.probabilities,
        sigma,
        iterations: outcome.iterations,
        converged: outcome.converged,
    })
}

/// Outcome of [`run_lp`], including the bandwidth that was actually used.
#[derive(Debug, Clone)]
pub struct LpRun {
    pub probabilities: ProbabilityMatrix,
    pub sigma: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn check_labels(n_nodes: usize, labels: &[Option<usize>], n_classes: usize) -> Result<()> {
    if labels.len() != n_nodes {
        return Err(Error::LengthMismatch {
            left: n_nodes,
            right: labels.len(),
        });
    }
    if n_classes < 2 {
        return Err(Error::ClassCount { found: n_classes });
    }
    let mut seeded = vec![false; n_classes];
    for label in labels.iter().flatten() {
        if *label >= n_classes {
            return Err(Error::Invariant(format!(
                "label {label} out of range for {n_classes} classes"
            )));
        }
        seeded[*label] = true;
    }
    if let Some(class) = seeded.iter().position(|&s| !s) {
        return Err(Error::UnlabeledClass { class });
    }
    Ok(())
}

fn clamp_labeled(f: &mut Array2<f64>, labels: &[Option<usize>]) {
    for (i, label) in labels.iter().enumerate() {
        if let Some(class) = label {
            let mut row = f.row_mut(i);
            row.fill(0.0);
            row[*class] = 1.0;
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Solves `A X = B` for a small dense system by Gaussian elimination with
/// partial pivoting. `B` may carry multiple right-hand sides as columns.
fn solve_dense(mut a: Array2<f64>, mut b: Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    let rhs = b.ncols();
    for col in 0..n {
        // Pivot: largest magnitude in this column at or below the diagonal.
        let mut pivot = col;
        for row in (col + 1)..n {
            if a[[row, col]].abs() > a[[pivot, col]].abs() {
                pivot = row;
            }
        }
        if a[[pivot, col]].abs() < 1e-12 {
            return Err(Error::SingularSystem);
        }
        if pivot != col {
            for k in 0..n {
                a.swap([col, k], [pivot, k]);
            }
            for k in 0..rhs {
                b.swap([col, k], [pivot, k]);
            }
        }
        for row in (col + 1)..n {
            let factor = a[[row, col]] / a[[col, col]];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[[row, k]] -= factor * a[[col, k]];
            }
            for k in 0..rhs {
                b[[row, k]] -= factor * b[[col, k]];
            }
        }
    }
    // Back substitution.
    let mut x = Array2::zeros((n, rhs));
    for row in (0..n).rev() {
        for k in 0..rhs {
            let mut acc = b[[row, k]];
            for col in (row + 1)..n {
                acc -= a[[row, col]] * x[[col, k]];
            }
            x[[row, k]] = acc / a[[row, row]];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Record;
    use proptest::prelude::*;

    fn dataset(points: &[(Vec<f64>, Option<usize>)]) -> Dataset {
        let records = points
            .iter()
            .enumerate()
            .map(|(id, (features, label))| Record {
                id,
                features: features.clone(),
                label: *label,
            })
            .collect();
        let n_classes = points
            .iter()
            .filter_map(|(_, l)| *l)
            .max()
            .map_or(2, |m| (m + 1).max(2));
        Dataset::new(records, n_classes).unwrap()
    }

    #[test]
    fn default_sigma_matches_unit_square_by_hand() {
        // Four corners of the unit square: six pairwise distances, four of
        // length 1 and two of length sqrt(2). Mean = (4 + 2*sqrt(2)) / 6,
        // sigma = mean / 3.
        let ds = dataset(&[
            (vec![0.0, 0.0], Some(0)),
            (vec![1.0, 0.0], Some(1)),
            (vec![0.0, 1.0], Some(0)),
            (vec![1.0, 1.0], Some(1)),
        ]);
        let expected = (4.0 + 2.0 * 2.0f64.sqrt()) / 6.0 / 3.0;
        let sigma = default_sigma(&ds).unwrap();
        assert!((sigma - expected).abs() < 1e-12, "{sigma} vs {expected}");
        assert!((sigma - 0.379_357_062).abs() < 1e-9);
    }

    #[test]
    fn default_sigma_is_floored_for_coincident_points() {
        let ds = dataset(&[
            (vec![1.0, 1.0], Some(0)),
            (vec![1.0, 1.0], Some(1)),
            (vec![1.0, 1.0], Some(0)),
        ]);
        assert_eq!(default_sigma(&ds).unwrap(), 1e-9);
    }

    #[test]
    fn default_sigma_sampling_is_deterministic() {
        let points: Vec<(Vec<f64>, Option<usize>)> = (0..80)
            .map(|i| {
                let x = (i as f64 * 0.37).sin() * 3.0;
                let y = (i as f64 * 0.71).cos() * 2.0;
                (vec![x, y], Some(i % 2))
            })
            .collect();
        // 80 points -> 3160 pairs, above the sampling threshold.
        let ds = dataset(&points);
        let a = default_sigma(&ds).unwrap();
        let b = default_sigma(&ds).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0);
    }

    #[test]
    fn weights_are_symmetric_with_zero_diagonal_and_unit_scale() {
        let ds = dataset(&[
            (vec![0.0], Some(0)),
            (vec![1.0], Some(1)),
            (vec![3.0], None),
        ]);
        let w = build_weights(&ds, 2.0).unwrap();
        let arr = w.as_array();
        for i in 0..3 {
            assert_eq!(arr[[i, i]], 0.0);
            for j in 0..3 {
                assert_eq!(arr[[i, j]], arr[[j, i]]);
            }
        }
        // w_01 = exp(-1/4), w_02 = exp(-9/4), w_12 = exp(-4/4).
        assert!((arr[[0, 1]] - (-0.25f64).exp()).abs() < 1e-15);
        assert!((arr[[0, 2]] - (-2.25f64).exp()).abs() < 1e-15);
        assert!((arr[[1, 2]] - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn row_normalize_produces_stochastic_rows() {
        let ds = dataset(&[
            (vec![0.0], Some(0)),
            (vec![1.0], Some(1)),
            (vec![2.5], None),
        ]);
        let t = row_normalize(&build_weights(&ds, 1.0).unwrap()).unwrap();
        for row in t.as_array().rows() {
            let sum: f64 = row.sum();
            assert!((sum - 1.0).abs() < 1e-12, "row sum {sum}");
        }
    }

    #[test]
    fn row_normalize_reports_isolated_rows() {
        let w = WeightMatrix::from_array(ndarray::arr2(&[
            [0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 1.0, 0.0],
        ]))
        .unwrap();
        let err = row_normalize(&w).unwrap_err();
        assert!(matches!(err, Error::ZeroRowSum { row: 0 }));
    }

    #[test]
    fn propagation_on_a_path_matches_hand_computation() {
        // Three collinear points: labeled 0 at x=0, unlabeled at x=1,
        // labeled 1 at x=3. The single unlabeled row solves
        // f_B = T_BA * e0 + T_BC * e1 directly.
        let ds = dataset(&[
            (vec![0.0], Some(0)),
            (vec![1.0], None),
            (vec![3.0], Some(1)),
        ]);
        let sigma = 1.5;
        let w = build_weights(&ds, sigma).unwrap();
        let t = row_normalize(&w).unwrap();
        let labels = [Some(0), None, Some(1)];

        let w_ba = (-1.0f64 / (sigma * sigma)).exp();
        let w_bc = (-4.0f64 / (sigma * sigma)).exp();
        let expected0 = w_ba / (w_ba + w_bc);

        let outcome = propagate(&t, &labels, 2, 1e-12, 10_000).unwrap();
        assert!(outcome.converged);
        let p = &outcome.probabilities;
        assert!((p.prob(1, 0) - expected0).abs() < 1e-9);
        assert!((p.prob(1, 1) - (1.0 - expected0)).abs() < 1e-9);
        // Labeled rows stay exactly clamped.
        assert_eq!(p.prob(0, 0), 1.0);
        assert_eq!(p.prob(2, 1), 1.0);

        let closed = closed_form_lp(&t, &labels, 2).unwrap();
        assert!((closed.prob(1, 0) - expected0).abs() < 1e-12);
    }

    #[test]
    fn iterative_and_closed_form_agree_on_a_chain() {
        let ds = dataset(&[
            (vec![0.0, 0.0], Some(0)),
            (vec![1.0, 0.4], None),
            (vec![2.0, -0.3], None),
            (vec![3.0, 0.1], None),
            (vec![4.0, 0.0], Some(1)),
        ]);
        let t = row_normalize(&build_weights(&ds, 1.2).unwrap()).unwrap();
        let labels: Vec<Option<usize>> = ds.records().iter().map(|r| r.label).collect();
        let iterated = propagate(&t, &labels, 2, 1e-13, 100_000).unwrap();
        assert!(iterated.converged);
        let closed = closed_form_lp(&t, &labels, 2).unwrap();
        for i in 0..5 {
            for c in 0..2 {
                let a = iterated.probabilities.prob(i, c);
                let b = closed.prob(i, c);
                assert!((a - b).abs() < 1e-9, "({i},{c}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn propagate_requires_every_class_seeded() {
        let ds = dataset(&[
            (vec![0.0], Some(0)),
            (vec![1.0], None),
            (vec![2.0], Some(0)),
        ]);
        let t = row_normalize(&build_weights(&ds, 1.0).unwrap()).unwrap();
        let labels = [Some(0), None, Some(0)];
        let err = propagate(&t, &labels, 2, 1e-6, 100).unwrap_err();
        assert!(matches!(err, Error::UnlabeledClass { class: 1 }));
    }

    #[test]
    fn fully_labeled_input_converges_immediately() {
        let ds = dataset(&[(vec![0.0], Some(0)), (vec![1.0], Some(1))]);
        let t = row_normalize(&build_weights(&ds, 1.0).unwrap()).unwrap();
        let labels = [Some(0), Some(1)];
        let outcome = propagate(&t, &labels, 2, 1e-6, 100).unwrap();
        assert!(outcome.converged);
        assert_eq!(outcome.iterations, 1);
        assert_eq!(outcome.probabilities.prob(0, 0), 1.0);
        assert_eq!(outcome.probabilities.prob(1, 1), 1.0);
    }

    #[test]
    fn energy_of_disagreeing_pair_is_two() {
        // Two nodes joined by weight 1 holding different one-hot labels:
        // E = 1/2 * (w_01 + w_10) * ||e0 - e1||^2 = 1/2 * 2 * 2 = 2.
        let w = WeightMatrix::from_array(ndarray::arr2(&[[0.0, 1.0], [1.0, 0.0]])).unwrap();
        let p = ProbabilityMatrix(ndarray::arr2(&[[1.0, 0.0], [0.0, 1.0]]));
        assert_eq!(energy(&w, &p).unwrap(), 2.0);

        // Agreeing labels cost nothing.
        let q = ProbabilityMatrix(ndarray::arr2(&[[1.0, 0.0], [1.0, 0.0]]));
        assert_eq!(energy(&w, &q).unwrap(), 0.0);
    }

    #[test]
    fn run_lp_uses_default_bandwidth_and_converges() {
        let ds = dataset(&[
            (vec![0.0, 0.0], Some(0)),
            (vec![0.2, 0.1], None),
            (vec![5.0, 5.0], Some(1)),
            (vec![5.1, 4.9], None),
        ]);
        let run = run_lp(&ds, &LpParams::default()).unwrap();
        assert!(run.converged);
        assert!(run.sigma > 0.0);
        // Each unlabeled point should lean toward its nearby cluster.
        assert!(run.probabilities.prob(1, 0) > 0.5);
        assert!(run.probabilities.prob(3, 1) > 0.5);
        assert_eq!(run.probabilities.hard_label(1), 0);
        assert_eq!(run.probabilities.hard_label(3), 1);
    }

    #[test]
    fn solve_dense_matches_known_system() {
        // [2 1; 1 3] x = [5; 10] -> x = [1; 3]
        let a = ndarray::arr2(&[[2.0, 1.0], [1.0, 3.0]]);
        let b = ndarray::arr2(&[[5.0], [10.0]]);
        let x = solve_dense(a, b).unwrap();
        assert!((x[[0, 0]] - 1.0).abs() < 1e-12);
        assert!((x[[1, 0]] - 3.0).abs() < 1e-12);

        let singular = ndarray::arr2(&[[1.0, 2.0], [2.0, 4.0]]);
        let b = ndarray::arr2(&[[1.0], [2.0]]);
        assert!(matches!(
            solve_dense(singular, b),
            Err(Error::SingularSystem)
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn propagated_rows_sum_to_one(
            xs in proptest::collection::vec(-5.0f64..5.0, 6..14),
            seed in 0u64..100,
        ) {
            let n = xs.len();
            let points: Vec<(Vec<f64>, Option<usize>)> = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    // Keep the first two nodes labeled with distinct classes,
                    // plus a pseudo-random sprinkling of further labels.
                    let label = if i == 0 {
                        Some(0)
                    } else if i == 1 {
                        Some(1)
                    } else if (seed + i as u64).is_multiple_of(3) {
                        Some(i % 2)
                    } else {
                        None
                    };
                    (vec![x, x * 0.5], label)
                })
                .collect();
            let ds = dataset(&points);
            let t = row_normalize(&build_weights(&ds, 2.0).unwrap()).unwrap();
            let labels: Vec<Option<usize>> = ds.records().iter().map(|r| r.label).collect();
            let outcome = propagate(&t, &labels, 2, 1e-8, 5000).unwrap();
            for i in 0..n {
                let sum: f64 = (0..2).map(|c| outcome.probabilities.prob(i, c)).sum();
                prop_assert!((sum - 1.0).abs() < 1e-9, "row {} sums to {}", i, sum);
                for c in 0..2 {
                    let p = outcome.probabilities.prob(i, c);
                    prop_assert!((-1e-12..=1.0 + 1e-9).contains(&p));
                }
            }
        }
    }
}
