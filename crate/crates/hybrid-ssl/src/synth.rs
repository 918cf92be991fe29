//! Synthetic multiclass datasets: isotropic Gaussian blobs with controllable
//! separation.
//!
//! Cluster centers sit at the vertices of a regular simplex, so every pair
//! of classes is exactly `separation` apart — class difficulty is uniform by
//! construction, and a single scalar controls how much the unit-variance
//! clouds overlap.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{Dataset, Record};
use crate::error::{Error, Result};

/// Vertices of a regular simplex with `classes` corners and pairwise vertex
/// distance `separation`, embedded in `dim` dimensions (zero-padded beyond
/// the first `classes - 1` coordinates).
pub fn simplex_centers(classes: usize, dim: usize, separation: f64) -> Result<Vec<Vec<f64>>> {
    if classes < 2 {
        return Err(Error::ClassCount { found: classes });
    }
    if dim < classes - 1 {
        return Err(Error::InvalidConfig(format!(
            "{classes} equidistant centers need at least {} dimensions, got {dim}",
            classes - 1
        )));
    }
    if !(separation.is_finite() && separation > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "separation must be finite and positive, got {separation}"
        )));
    }

    // Build the simplex with unit circumradius: |v_i| = 1 and
    // v_i . v_j = -1/m for i != j, where m = classes - 1. Column k is fixed
    // by vertex k's unit norm and the dot-product constraint against every
    // later vertex.
    let m = classes - 1;
    let target_dot = -1.0 / m as f64;
    let mut verts = vec![vec![0.0f64; m]; classes];
    for k in 0..m {
        let prior_sq: f64 = verts[k][..k].iter().map(|v| v * v).sum();
        let diag = (1.0 - prior_sq).sqrt();
        verts[k][k] = diag;
        for later in (k + 1)..classes {
            let prior_dot: f64 = verts[k][..k]
                .iter()
                .zip(&verts[later][..k])
                .map(|(a, b)| a * b)
                .sum();
            verts[later][k] = (target_dot - prior_dot) / diag;
        }
    }

    // Unit circumradius gives side length sqrt(2(m+1)/m); rescale so the
    // side becomes `separation`, then embed in the requested dimension.
    let side = (2.0 * (m as f64 + 1.0) / m as f64).sqrt();
    let scale = separation / side;
    Ok(verts
        .into_iter()
        .map(|v| {
            let mut center = vec![0.0; dim];
            for (j, value) in v.into_iter().enumerate() {
                center[j] = value * scale;
            }
            center
        })
        .collect())
}

/// Generates `n` records in `classes` unit-variance Gaussian clusters whose
/// centers are pairwise `separation` apart.
///
/// Counts are balanced: every class receives `n / classes` records and the
/// first `n % classes` classes one extra. Records are emitted class by
/// class with ids `0..n-1`, fully labeled. The same arguments always
/// produce the same dataset.
pub fn gen_blobs(
    n: usize,
    classes: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if n < classes {
        return Err(Error::InvalidConfig(format!(
            "cannot spread {n} records over {classes} classes"
        )));
    }
    let centers = simplex_centers(classes, dim, separation)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = n / classes;
    let extra = n % classes;
    let mut records = Vec::with_capacity(n);
    for (class, center) in centers.iter().enumerate() {
        let count = base + usize::from(class < extra);
        for _ in 0..count {
            let features = center
                .iter()
                .map(|&c| {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    c + noise
                })
                .collect();
            records.push(Record {
                id: records.len(),
                features,
                label: Some(class),
            });
        }
    }
    Dataset::new(records, classes)
}
