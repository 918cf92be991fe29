//! Acceptance suite: ten end-to-end guarantees, one test per criterion, each
//! printing a single `[cNN] PASS/FAIL` verdict line. Run with
//!
//! ```text
//! cargo test --test acceptance -- --nocapture
//! ```
//!
//! Every tolerance is pinned as a named constant next to the criterion that
//! uses it.

mod common;

use std::time::Instant;

use hybrid_ssl::classifiers::{loss_and_gradient, smo_train, Kernel, SvmParams};
use hybrid_ssl::data::{make_skewed, mask_labels, shuffle_split, GroundTruth, SplitSpec};
use hybrid_ssl::eval::{evaluate, spearman_rho};
use hybrid_ssl::experiment::{
    compare_baselines, run_experiment, DatasetSource, ExperimentSpec, OutputOptions,
};
use hybrid_ssl::graph_lp::{build_weights, closed_form_lp, default_sigma, propagate, row_normalize};
use hybrid_ssl::hybrid::{hybrid_fit, HybridConfig, HybridResult, IterationLog};
use hybrid_ssl::parallel::{parallel_hybrid_fit, ParallelConfig};
use hybrid_ssl::synth::gen_blobs;
use hybrid_ssl::Error;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn lib(e: Error) -> String {
    e.to_string()
}

/// Macro-averaged F-measure over the hidden records, with records the loop
/// left unlabeled scored through the model — the transductive number every
/// comparison below uses.
fn masked_macro_f1(result: &HybridResult, truth: &GroundTruth) -> Result<f64, String> {
    let mut truths = Vec::with_capacity(truth.len());
    let mut preds = Vec::with_capacity(truth.len());
    for (id, true_label) in truth.iter() {
        let rec = result
            .dataset
            .by_id(id)
            .ok_or_else(|| format!("hidden record {id} vanished"))?;
        let pred = match rec.label {
            Some(label) => label,
            None => result.model.predict(&rec.features).map_err(lib)?,
        };
        truths.push(true_label);
        preds.push(pred);
    }
    Ok(evaluate(&truths, &preds, result.dataset.n_classes())
        .map_err(lib)?
        .macro_f1)
}

// --------------------------------------------------------------------------
// c01: on random datasets, iterative clamped propagation converges to the
// same fixed point as the closed-form linear solve.
// --------------------------------------------------------------------------

/// Largest tolerated entrywise difference between the two routes.
const LP_MATCH_TOL: f64 = 1e-5;
/// Wall-clock budget for all ten datasets together, in seconds.
const LP_TIME_BUDGET_S: f64 = 5.0;

#[test]
fn c01_propagation_matches_closed_form() {
    let outcome = (|| {
        let start = Instant::now();
        let mut worst = 0.0f64;
        for seed in 0..10u64 {
            let full = gen_blobs(50, 3, 5, 3.0, seed).map_err(lib)?;
            let (masked, _) = mask_labels(&full, 0.6, seed).map_err(lib)?;
            let sigma = default_sigma(&masked).map_err(lib)?;
            let weights = build_weights(&masked, sigma).map_err(lib)?;
            let transition = row_normalize(&weights).map_err(lib)?;
            let labels: Vec<Option<usize>> =
                masked.records().iter().map(|r| r.label).collect();

            // Tight internal tolerance so iteration error is negligible
            // against the criterion's own bound.
            let iterative = propagate(&transition, &labels, 3, 1e-10, 100_000).map_err(lib)?;
            if !iterative.converged {
                return Err(format!("seed {seed}: propagation hit the iteration cap"));
            }
            let direct = closed_form_lp(&transition, &labels, 3).map_err(lib)?;

            for (a, b) in iterative
                .probabilities
                .as_array()
                .iter()
                .zip(direct.as_array().iter())
            {
                worst = worst.max((a - b).abs());
            }
        }
        let elapsed = start.elapsed().as_secs_f64();
        if worst > LP_MATCH_TOL {
            return Err(format!(
                "max |iterative - closed form| = {worst:.3e} exceeds {LP_MATCH_TOL:.0e}"
            ));
        }
        if elapsed > LP_TIME_BUDGET_S {
            return Err(format!(
                "took {elapsed:.2}s, budget {LP_TIME_BUDGET_S}s"
            ));
        }
        Ok(format!(
            "10 datasets (n=50, d=5, 3 classes): max |delta| = {worst:.3e}, {elapsed:.2}s"
        ))
    })();
    common::report("c01", "iterative propagation matches the closed form", outcome);
}

// --------------------------------------------------------------------------
// c02: the SMO trainer lands on the dual optimum — exact feasibility, small
// KKT violation, small duality gap, and agreement with a brute-force oracle
// on problems small enough to enumerate.
// --------------------------------------------------------------------------

/// Equality-constraint residual `|sum_i a_i y_i|` allowed after training.
const SVM_SUM_TOL: f64 = 1e-12;
/// Largest tolerated optimality-condition violation.
const SVM_KKT_TOL: f64 = 1e-3;
/// Largest tolerated relative duality gap.
const SVM_GAP_TOL: f64 = 1e-3;
/// Largest tolerated relative error against the enumerated dual optimum.
const SVM_ORACLE_TOL: f64 = 1e-4;

#[test]
fn c02_smo_reaches_the_dual_optimum() {
    let outcome = (|| {
        // Part A: separable clouds of varying size and dimension.
        let mut worst_sum = 0.0f64;
        let mut worst_kkt = 0.0f64;
        let mut worst_gap = 0.0f64;
        for seed in 0..20u64 {
            let n = 10 + (seed as usize * 3) % 31; // 10..=40
            let dim = 2 + (seed as usize) % 3; // 2..=4
            let (xs, ys) = common::separable_cloud(n, dim, seed);
            let params = SvmParams {
                c: 10.0,
                kernel: Kernel::Linear,
                tol: 1e-5,
                max_passes: 300,
            };
            let model = smo_train(&xs, &ys, &params).map_err(lib)?;

            for &a in &model.alphas {
                if !(0.0..=params.c).contains(&a) {
                    return Err(format!("seed {seed}: multiplier {a} leaves [0, C]"));
                }
            }
            worst_sum = worst_sum.max(model.sum_alpha_y().abs());
            worst_kkt = worst_kkt.max(model.kkt_violation(params.c, 1e-8));
            let dual = model.dual_objective();
            let primal = model.primal_objective(params.c);
            worst_gap = worst_gap.max((primal - dual).abs() / primal.abs().max(1.0));
        }
        if worst_sum > SVM_SUM_TOL {
            return Err(format!("|sum a_i y_i| = {worst_sum:.3e} exceeds {SVM_SUM_TOL:.0e}"));
        }
        if worst_kkt > SVM_KKT_TOL {
            return Err(format!("KKT violation {worst_kkt:.3e} exceeds {SVM_KKT_TOL:.0e}"));
        }
        if worst_gap > SVM_GAP_TOL {
            return Err(format!("duality gap {worst_gap:.3e} exceeds {SVM_GAP_TOL:.0e}"));
        }

        // Part B: tiny problems where every active set can be enumerated.
        // Small boxes force bound multipliers; the overlapping points force
        // slack.
        type TinyProblem = (Vec<Vec<f64>>, Vec<f64>, f64, Kernel);
        let tiny: Vec<TinyProblem> = vec![
            (
                vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.2, 0.1], vec![0.9, -0.1]],
                vec![-1.0, 1.0, 1.0, -1.0],
                1.5,
                Kernel::Linear,
            ),
            (
                vec![
                    vec![-1.0, 0.0],
                    vec![-2.0, 1.0],
                    vec![1.0, 0.0],
                    vec![2.0, -1.0],
                    vec![0.1, 0.3],
                ],
                vec![-1.0, -1.0, 1.0, 1.0, -1.0],
                1.0,
                Kernel::Linear,
            ),
            (
                vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![-1.0, -1.0, 1.0, 1.0],
                5.0,
                Kernel::Rbf { gamma: 0.5 },
            ),
            (
                vec![
                    vec![-2.0],
                    vec![-1.0],
                    vec![1.0],
                    vec![2.0],
                    vec![0.2],
                    vec![-0.2],
                ],
                vec![-1.0, -1.0, 1.0, 1.0, 1.0, -1.0],
                2.0,
                Kernel::Linear,
            ),
            (
                vec![vec![0.0, 1.0], vec![1.0, 2.0], vec![2.0, 0.0]],
                vec![1.0, 1.0, -1.0],
                10.0,
                Kernel::Linear,
            ),
        ];
        let mut worst_oracle = 0.0f64;
        for (idx, (xs, ys, c, kernel)) in tiny.iter().enumerate() {
            let params = SvmParams {
                c: *c,
                kernel: *kernel,
                tol: 1e-6,
                max_passes: 500,
            };
            let model = smo_train(xs, ys, &params).map_err(lib)?;
            let optimum = common::oracle_dual_optimum(xs, ys, *c, kernel);
            let reached = model.dual_objective();
            if reached > optimum + 1e-9 {
                return Err(format!(
                    "problem {idx}: trainer objective {reached} exceeds the enumerated \
                     optimum {optimum}; the oracle itself is broken"
                ));
            }
            worst_oracle = worst_oracle.max((optimum - reached).abs() / optimum.abs().max(1.0));
        }
        if worst_oracle > SVM_ORACLE_TOL {
            return Err(format!(
                "dual objective misses the enumerated optimum by {worst_oracle:.3e} \
                 (allowed {SVM_ORACLE_TOL:.0e})"
            ));
        }
        Ok(format!(
            "20 separable problems: |sum ay| <= {worst_sum:.1e}, KKT <= {worst_kkt:.1e}, \
             gap <= {worst_gap:.1e}; 5 enumerable problems: oracle error <= {worst_oracle:.1e}"
        ))
    })();
    common::report("c02", "SMO certifies feasibility, KKT, gap, and the enumerated optimum", outcome);
}

// --------------------------------------------------------------------------
// c03: the parallel engine reproduces the serial engine bit for bit at every
// worker count.
// --------------------------------------------------------------------------

#[test]
fn c03_parallel_engine_is_bit_identical() {
    let outcome = (|| {
        let config = HybridConfig::default();
        let mut runs = 0usize;
        for seed in [101u64, 202, 303, 404, 505] {
            let full = gen_blobs(400, 3, 4, 3.0, seed).map_err(lib)?;
            let (train, test) = shuffle_split(
                &full,
                &SplitSpec {
                    train_fraction: 0.8,
                    seed,
                },
            )
            .map_err(lib)?;
            let (masked, _) = mask_labels(&train, 0.8, seed).map_err(lib)?;
            let serial = hybrid_fit(&masked, &config).map_err(lib)?;
            let serial_preds: Vec<usize> = test
                .records()
                .iter()
                .map(|r| serial.model.predict(&r.features))
                .collect::<Result<_, _>>()
                .map_err(lib)?;
            for tasks in [1usize, 2, 4, 8] {
                let par =
                    parallel_hybrid_fit(&masked, &config, &ParallelConfig::new(tasks))
                        .map_err(lib)?;
                if par.dataset != serial.dataset {
                    return Err(format!("seed {seed}, tasks {tasks}: final labels differ"));
                }
                if par.model != serial.model {
                    return Err(format!("seed {seed}, tasks {tasks}: final models differ"));
                }
                if par.termination != serial.termination {
                    return Err(format!("seed {seed}, tasks {tasks}: terminations differ"));
                }
                if par.iterations.len() != serial.iterations.len()
                    || par
                        .iterations
                        .iter()
                        .zip(&serial.iterations)
                        .any(|(a, b)| a.events != b.events || a.newly_labeled != b.newly_labeled)
                {
                    return Err(format!("seed {seed}, tasks {tasks}: event streams differ"));
                }
                let par_preds: Vec<usize> = test
                    .records()
                    .iter()
                    .map(|r| par.model.predict(&r.features))
                    .collect::<Result<_, _>>()
                    .map_err(lib)?;
                if par_preds != serial_preds {
                    return Err(format!("seed {seed}, tasks {tasks}: test predictions differ"));
                }
                runs += 1;
            }
        }
        Ok(format!(
            "{runs} parallel runs (5 seeds x tasks 1/2/4/8, n=400) matched serial exactly, \
             test predictions included"
        ))
    })();
    common::report("c03", "parallel and serial engines agree bit for bit", outcome);
}

// --------------------------------------------------------------------------
// c04: on held-out test data, the model the loop produces scores at least as
// well as the propagation-alone baseline (the same classifier family fit on
// propagation's labels) on a clear majority of seeds.
//
// KNOWN NOT TO HOLD on this synthetic family, and asserted anyway so the
// verdict line reports the measured truth instead of a rigged pass.
// Isotropic unit-variance blobs are propagation's ideal case: the RBF graph
// matches the generator exactly and the kernel vote exploits the unlabeled
// density, so propagation's labels are near-optimal. A classifier fit on
// them (full coverage, ~95% clean) consistently edges out the gated refit
// (~87% coverage, ~99% clean) by one to two test records per seed — the
// gate's purity cannot pay for the boundary records it withholds. The margin
// stays slightly negative under every honest variation tried: transductive
// and inductive scoring, dimensions 2 through 64, linear and RBF kernels,
// thresholds 0.5 through 0.95 including best-of selection, and three
// disjoint seed sets. The gate earns its keep when the graph is a poor model
// of the data — a regime this generator cannot produce.
// --------------------------------------------------------------------------

/// Wall-clock budget for all five comparisons together, in seconds.
const HYBRID_TIME_BUDGET_S: f64 = 60.0;
/// Seeds (out of 5) on which the loop must match or beat the baseline.
const HYBRID_MIN_WINS: usize = 4;

#[test]
fn c04_loop_matches_or_beats_propagation_alone() {
    let outcome = (|| {
        let start = Instant::now();
        let mut wins = 0usize;
        let mut details = Vec::new();
        for seed in [11u64, 22, 33, 44, 55] {
            let spec = ExperimentSpec {
                name: format!("compare-{seed}"),
                source: DatasetSource::Blobs {
                    n: 600,
                    classes: 3,
                    dim: 8,
                    separation: 4.0,
                },
                unlabeled_fraction: 0.8,
                seed,
                ..ExperimentSpec::default()
            };
            let rows = compare_baselines(&spec, None).map_err(lib)?;
            let f_hybrid = rows[0]
                .test_macro_f1
                .ok_or("hybrid row is missing test scores")?;
            let f_lp = rows[1]
                .test_macro_f1
                .ok_or("propagation row is missing test scores")?;
            if f_hybrid >= f_lp {
                wins += 1;
            }
            details.push(format!("seed {seed}: loop {f_hybrid:.3} vs lp {f_lp:.3}"));
        }
        let elapsed = start.elapsed().as_secs_f64();
        if elapsed > HYBRID_TIME_BUDGET_S {
            return Err(format!(
                "took {elapsed:.1}s, budget {HYBRID_TIME_BUDGET_S}s"
            ));
        }
        if wins < HYBRID_MIN_WINS {
            return Err(format!(
                "the loop matched or beat propagation alone on {wins}/5 seeds, needing \
                 {HYBRID_MIN_WINS} ({}). This data family is propagation's best case — its \
                 graph models the generator exactly — so its labels are near-optimal here and \
                 the property inverts by a one-to-two-record margin; see the test's comment \
                 for the full analysis",
                details.join("; ")
            ));
        }
        Ok(format!("{wins}/5 seeds ({})", details.join("; ")))
    })();
    common::report(
        "c04",
        "the loop matches or beats propagation alone on test data",
        outcome,
    );
}

// --------------------------------------------------------------------------
// c05: the gate threshold is not a knife edge — macro F stays within a
// narrow band across the whole plausible range.
// --------------------------------------------------------------------------

/// Largest tolerated spread of macro F across thresholds.
const THRESHOLD_SPREAD_TOL: f64 = 0.15;

#[test]
fn c05_gate_threshold_is_not_a_knife_edge() {
    let outcome = (|| {
        let seeds = [7u64, 17, 27];
        let mut prepared = Vec::new();
        for &seed in &seeds {
            let full = gen_blobs(240, 3, 2, 4.0, seed).map_err(lib)?;
            prepared.push(mask_labels(&full, 0.8, seed).map_err(lib)?);
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut scores = Vec::new();
        for &threshold in &[0.5, 0.6, 0.7, 0.8, 0.9, 0.95] {
            let config = HybridConfig {
                threshold,
                ..HybridConfig::default()
            };
            // Seed-averaged so one lucky or unlucky draw cannot decide the
            // verdict.
            let mut total = 0.0;
            for (masked, truth) in &prepared {
                let result = hybrid_fit(masked, &config).map_err(lib)?;
                total += masked_macro_f1(&result, truth)?;
            }
            let f = total / seeds.len() as f64;
            lo = lo.min(f);
            hi = hi.max(f);
            scores.push(format!("{threshold}: {f:.3}"));
        }
        let spread = hi - lo;
        if spread > THRESHOLD_SPREAD_TOL {
            return Err(format!(
                "macro F spread {spread:.3} exceeds {THRESHOLD_SPREAD_TOL} ({})",
                scores.join(", ")
            ));
        }
        Ok(format!("spread {spread:.3} ({})", scores.join(", ")))
    })();
    common::report("c05", "macro F is stable across gate thresholds", outcome);
}

// --------------------------------------------------------------------------
// c06: hiding more labels never helps — rank correlation between the hidden
// fraction and mean macro F is non-positive.
// --------------------------------------------------------------------------

/// Floating-point slack on the non-positivity of the rank correlation.
const RHO_SLACK: f64 = 1e-12;

#[test]
fn c06_more_hidden_labels_never_help() {
    let outcome = (|| {
        let fractions = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95];
        let config = HybridConfig::default();
        let mut means = Vec::new();
        for &fraction in &fractions {
            let mut total = 0.0;
            let mut count = 0usize;
            for seed in [1u64, 2, 3, 4, 5] {
                // Mild class overlap so the label budget genuinely matters.
                let full = gen_blobs(180, 3, 2, 3.0, seed).map_err(lib)?;
                let (masked, truth) = mask_labels(&full, fraction, seed).map_err(lib)?;
                let result = hybrid_fit(&masked, &config).map_err(lib)?;
                total += masked_macro_f1(&result, &truth)?;
                count += 1;
            }
            means.push(total / count as f64);
        }
        let rho = spearman_rho(&fractions, &means).map_err(lib)?;
        if rho > RHO_SLACK {
            return Err(format!(
                "rank correlation {rho:.4} is positive; mean macro F by fraction: {means:?}"
            ));
        }
        Ok(format!(
            "rank correlation {rho:.4} <= 0; mean macro F by fraction: {}",
            fractions
                .iter()
                .zip(&means)
                .map(|(f, m)| format!("{f}: {m:.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        ))
    })();
    common::report("c06", "hiding more labels never improves macro F", outcome);
}

// --------------------------------------------------------------------------
// c07: acceptance counts shrink after the first sweep, and the loop honors
// its hard iteration bound.
// --------------------------------------------------------------------------

/// Seeds (out of 5) whose first iteration must accept at least as many
/// records as their second.
const DECAY_MIN_SEEDS: usize = 4;

#[test]
fn c07_acceptances_decay_and_the_loop_is_bounded() {
    let outcome = (|| {
        let config = HybridConfig {
            threshold: 0.8,
            ..HybridConfig::default()
        };
        let mut decaying = 0usize;
        let mut details = Vec::new();
        for seed in [3u64, 13, 23, 33, 43] {
            let full = gen_blobs(200, 3, 2, 3.5, seed).map_err(lib)?;
            let (masked, _) = mask_labels(&full, 0.8, seed).map_err(lib)?;
            let unlabeled = masked.unlabeled_count();
            let result = hybrid_fit(&masked, &config).map_err(lib)?;

            if result.iterations.len() > unlabeled + 1 {
                return Err(format!(
                    "seed {seed}: {} iterations exceeds the hard bound of {}",
                    result.iterations.len(),
                    unlabeled + 1
                ));
            }
            let first_two: Vec<usize> = result
                .iterations
                .iter()
                .take(2)
                .map(|log| log.newly_labeled)
                .collect();
            // A run that finishes in one sweep satisfies the decay claim
            // vacuously.
            if first_two.len() < 2 || first_two[0] >= first_two[1] {
                decaying += 1;
            }
            details.push(format!(
                "seed {seed}: accepted per iteration {:?}",
                result
                    .iterations
                    .iter()
                    .map(|log| log.newly_labeled)
                    .collect::<Vec<_>>()
            ));
        }
        if decaying < DECAY_MIN_SEEDS {
            return Err(format!(
                "first sweep outpaced the second on only {decaying}/5 seeds ({})",
                details.join("; ")
            ));
        }
        Ok(format!("{decaying}/5 seeds decay ({})", details.join("; ")))
    })();
    common::report("c07", "acceptance counts decay and iterations stay bounded", outcome);
}

// --------------------------------------------------------------------------
// c08: every acceptance recorded in the run logs respects the gate —
// committed class equals the classifier's proposal and the propagated
// probability clears the threshold.
// --------------------------------------------------------------------------

#[test]
fn c08_logged_acceptances_all_respect_the_gate() {
    let outcome = (|| {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let spec = ExperimentSpec {
            name: "gate-audit".into(),
            source: DatasetSource::Blobs {
                n: 150,
                classes: 3,
                dim: 2,
                separation: 4.0,
            },
            seed: 42,
            ..ExperimentSpec::default()
        };
        let threshold = spec.hybrid.threshold;
        let out = OutputOptions {
            dir: Some(dir.path().to_path_buf()),
            ..OutputOptions::default()
        };
        run_experiment(&spec, &out).map_err(lib)?;

        let jsonl = std::fs::read_to_string(dir.path().join("iterations.jsonl"))
            .map_err(|e| e.to_string())?;
        let mut audited = 0usize;
        for (line_no, line) in jsonl.lines().enumerate() {
            let log: IterationLog =
                serde_json::from_str(line).map_err(|e| format!("line {line_no}: {e}"))?;
            if log.events.len() != log.newly_labeled {
                return Err(format!(
                    "iteration {}: {} events but newly_labeled = {}",
                    log.iteration,
                    log.events.len(),
                    log.newly_labeled
                ));
            }
            for event in &log.events {
                if event.class != event.classifier_out {
                    return Err(format!(
                        "iteration {}, record {}: committed class {} differs from the \
                         classifier's {}",
                        log.iteration, event.id, event.class, event.classifier_out
                    ));
                }
                if event.lp_prob < threshold {
                    return Err(format!(
                        "iteration {}, record {}: propagated probability {} is below the \
                         threshold {}",
                        log.iteration, event.id, event.lp_prob, threshold
                    ));
                }
                audited += 1;
            }
        }
        if audited == 0 {
            return Err("the run accepted no records, so the audit is vacuous".into());
        }
        Ok(format!("{audited} logged acceptances audited, all sound"))
    })();
    common::report("c08", "every logged acceptance respects the agreement gate", outcome);
}

// --------------------------------------------------------------------------
// c09: the logistic-regression gradient matches central finite differences.
// --------------------------------------------------------------------------

/// Largest tolerated relative error between analytic and numeric gradients.
const GRAD_REL_TOL: f64 = 1e-4;

#[test]
fn c09_logreg_gradient_matches_finite_differences() {
    let outcome = (|| {
        let h = 1e-6;
        let l2 = 0.01;
        let mut worst = 0.0f64;
        for (dataset_seed, n, dim) in [(1u64, 20usize, 2usize), (2, 30, 4), (3, 40, 3)] {
            let mut rng = ChaCha8Rng::seed_from_u64(dataset_seed);
            let xs: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
                .collect();
            let ts: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_bool(0.5))).collect();

            for _point in 0..5 {
                let weights: Vec<f64> = (0..dim)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let bias: f64 = rng.sample(StandardNormal);

                let (_, grad_w, grad_b) = loss_and_gradient(&weights, bias, &xs, &ts, l2);

                let mut numeric = Vec::with_capacity(dim + 1);
                for k in 0..dim {
                    let mut plus = weights.clone();
                    let mut minus = weights.clone();
                    plus[k] += h;
                    minus[k] -= h;
                    let (lp, _, _) = loss_and_gradient(&plus, bias, &xs, &ts, l2);
                    let (lm, _, _) = loss_and_gradient(&minus, bias, &xs, &ts, l2);
                    numeric.push((lp - lm) / (2.0 * h));
                }
                let (lp, _, _) = loss_and_gradient(&weights, bias + h, &xs, &ts, l2);
                let (lm, _, _) = loss_and_gradient(&weights, bias - h, &xs, &ts, l2);
                numeric.push((lp - lm) / (2.0 * h));

                let mut analytic = grad_w.clone();
                analytic.push(grad_b);
                let diff: f64 = analytic
                    .iter()
                    .zip(&numeric)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let scale: f64 = numeric.iter().map(|g| g * g).sum::<f64>().sqrt();
                worst = worst.max(diff / scale.max(1.0));
            }
        }
        if worst > GRAD_REL_TOL {
            return Err(format!(
                "relative gradient error {worst:.3e} exceeds {GRAD_REL_TOL:.0e}"
            ));
        }
        Ok(format!(
            "15 probes (5 points x 3 datasets): relative error <= {worst:.3e}"
        ))
    })();
    common::report("c09", "the analytic gradient matches finite differences", outcome);
}

// --------------------------------------------------------------------------
// c10: a heavily skewed corpus runs the full pipeline to completion and the
// report carries both averaging modes.
// --------------------------------------------------------------------------

#[test]
fn c10_skewed_pipeline_completes_with_both_averages() {
    let outcome = (|| {
        let full = gen_blobs(270, 3, 2, 4.0, 5).map_err(lib)?;
        let skewed = make_skewed(&full, 8.0, 5).map_err(lib)?;
        let counts = skewed.class_counts();
        let largest = *counts.iter().max().unwrap();
        let smallest = *counts.iter().min().unwrap();
        if (largest as f64) < 8.0 * smallest as f64 {
            return Err(format!("class counts {counts:?} are not skewed 8:1"));
        }

        let (masked, truth) = mask_labels(&skewed, 0.7, 5).map_err(lib)?;
        let result = hybrid_fit(&masked, &HybridConfig::default()).map_err(lib)?;

        let mut truths = Vec::new();
        let mut preds = Vec::new();
        for (id, true_label) in truth.iter() {
            let rec = result.dataset.by_id(id).unwrap();
            let pred = match rec.label {
                Some(label) => label,
                None => result.model.predict(&rec.features).map_err(lib)?,
            };
            truths.push(true_label);
            preds.push(pred);
        }
        let report = evaluate(&truths, &preds, skewed.n_classes()).map_err(lib)?;
        for (label, value) in [
            ("macro", report.macro_f1),
            ("micro", report.micro_f1),
        ] {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(format!("{label} F = {value} is not a valid score"));
            }
        }
        Ok(format!(
            "class counts {counts:?}: macro F {:.3}, micro F {:.3}, terminated {}",
            report.macro_f1, report.micro_f1, result.termination
        ))
    })();
    common::report("c10", "an 8:1 skewed corpus completes with both averaging modes", outcome);
}
