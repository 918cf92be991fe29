//! Shared support for the acceptance suite: an independent brute-force
//! oracle for the SVM dual optimum, deterministic dataset builders, and the
//! one-line pass/fail reporter.

use hybrid_ssl::classifiers::Kernel;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Prints exactly one verdict line for a criterion and fails the test on a
/// violation. Run with `--nocapture` to see the PASS lines; FAIL lines show
/// up in the captured output of the failing test either way.
pub fn report(id: &str, title: &str, outcome: Result<String, String>) {
    match outcome {
        Ok(detail) => println!("[{id}] PASS — {title}: {detail}"),
        Err(detail) => {
            println!("[{id}] FAIL — {title}: {detail}");
            panic!("{id} failed: {detail}");
        }
    }
}

/// Dual objective `sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K_ij`.
pub fn dual_value(alphas: &[f64], ys: &[f64], gram: &[Vec<f64>]) -> f64 {
    let n = alphas.len();
    let mut linear = 0.0;
    let mut quad = 0.0;
    for i in 0..n {
        linear += alphas[i];
        for j in 0..n {
            quad += alphas[i] * alphas[j] * ys[i] * ys[j] * gram[i][j];
        }
    }
    linear - 0.5 * quad
}

/// Global maximum of the SVM dual over the box `[0, C]^n` with
/// `sum_i a_i y_i = 0`, found by brute force rather than by any descent
/// method the trainer might share a blind spot with.
///
/// Every coordinate of the optimum sits at a bound or strictly inside, so
/// the optimum is among the solutions of the stationarity equations for some
/// assignment of each point to {lower, upper, free}. All `3^n` assignments
/// are enumerated (practical for `n <= 6`), each candidate solved exactly,
/// infeasible or singular ones discarded, and the best feasible objective
/// returned. The true optimum's own assignment is in the enumeration, so the
/// maximum over feasible candidates is the optimum itself.
pub fn oracle_dual_optimum(xs: &[Vec<f64>], ys: &[f64], c: f64, kernel: &Kernel) -> f64 {
    let n = xs.len();
    assert!(n <= 6, "oracle enumerates 3^n active sets; keep n small");
    let gram: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| kernel.eval(&xs[i], &xs[j])).collect())
        .collect();

    const FEAS_EPS: f64 = 1e-9;
    let mut best = f64::NEG_INFINITY;
    // Ternary counter over point states: 0 = at zero, 1 = at C, 2 = free.
    let mut states = vec![0u8; n];
    loop {
        let free: Vec<usize> = (0..n).filter(|&i| states[i] == 2).collect();
        let upper: Vec<usize> = (0..n).filter(|&i| states[i] == 1).collect();

        let mut alphas = vec![0.0; n];
        for &i in &upper {
            alphas[i] = c;
        }
        let feasible = if free.is_empty() {
            let residual: f64 = upper.iter().map(|&i| c * ys[i]).sum();
            residual.abs() <= FEAS_EPS
        } else {
            // Stationarity for each free i:  sum_j y_j K_ij a_j + b = y_i,
            // plus the equality constraint, as an (m+1)-square system over
            // the free multipliers and b.
            let m = free.len();
            let mut a = vec![vec![0.0; m + 1]; m + 1];
            let mut rhs = vec![0.0; m + 1];
            for (row, &i) in free.iter().enumerate() {
                for (col, &j) in free.iter().enumerate() {
                    a[row][col] = ys[j] * gram[i][j];
                }
                a[row][m] = 1.0;
                rhs[row] = ys[i] - c * upper.iter().map(|&j| ys[j] * gram[i][j]).sum::<f64>();
            }
            for (col, &j) in free.iter().enumerate() {
                a[m][col] = ys[j];
            }
            rhs[m] = -c * upper.iter().map(|&j| ys[j]).sum::<f64>();

            match solve(a, rhs) {
                Some(solution) => {
                    let mut ok = true;
                    for (idx, &i) in free.iter().enumerate() {
                        let val = solution[idx];
                        if !(-FEAS_EPS..=c + FEAS_EPS).contains(&val) {
                            ok = false;
                            break;
                        }
                        alphas[i] = val.clamp(0.0, c);
                    }
                    ok
                }
                None => false,
            }
        };
        if feasible {
            best = best.max(dual_value(&alphas, ys, &gram));
        }

        // Advance the ternary counter; done after 3^n combinations.
        let mut pos = 0;
        loop {
            if pos == n {
                debug_assert!(best.is_finite(), "the all-zero candidate is always feasible");
                return best;
            }
            states[pos] += 1;
            if states[pos] < 3 {
                break;
            }
            states[pos] = 0;
            pos += 1;
        }
    }
}

/// Gaussian elimination with partial pivoting; `None` on a (near-)singular
/// matrix.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            // `row > col`, so splitting at `row` puts the pivot row in the
            // head and the row being eliminated at the start of the tail.
            let (head, tail) = a.split_at_mut(row);
            for (target, &pivot_val) in tail[0].iter_mut().zip(&head[col]).skip(col) {
                *target -= factor * pivot_val;
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for col in row + 1..n {
            acc -= a[row][col] * x[col];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// A linearly separable two-class cloud with a guaranteed margin: the first
/// coordinate lands in `[-3, -1]` for the `-1` class and `[1, 3]` for the
/// `+1` class, every other coordinate is standard normal noise.
pub fn separable_cloud(n: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let y = if i % 2 == 0 { -1.0 } else { 1.0 };
        let mut x = vec![0.0; dim];
        x[0] = y * (1.0 + 2.0 * rng.gen::<f64>());
        for value in x.iter_mut().skip(1) {
            *value = rng.sample::<f64, _>(StandardNormal);
        }
        xs.push(x);
        ys.push(y);
    }
    (xs, ys)
}
