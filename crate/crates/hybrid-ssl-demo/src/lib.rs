//! Interactive browser front end for the agreement-gated labeling loop.
//!
//! Three operations are exported to the page: generate a two-dimensional
//! dataset with most labels hidden, advance the loop one iteration at a
//! time, and rasterize the current model's decision regions. All state stays
//! on the Rust side; the page receives plain JSON strings and draws them.
//!
//! Everything lives in [`Engine`], an ordinary Rust struct the unit tests
//! drive directly; [`Demo`] is the thin wasm-bindgen shim over it. Build the
//! browser package with `wasm-pack build --target web`.

use std::collections::HashMap;

use hybrid_ssl::classifiers::{self, ClassifierSpec, TrainedModel};
use hybrid_ssl::data::{mask_labels, Dataset, GroundTruth, Record};
use hybrid_ssl::graph_lp::{
    build_weights, default_sigma, propagate, row_normalize, LpParams, TransitionMatrix,
};
use hybrid_ssl::hybrid::label_step;
use hybrid_ssl::synth::gen_blobs;
use hybrid_ssl::Error;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// One record as the page draws it.
#[derive(Serialize)]
struct PointView {
    id: usize,
    x: f64,
    y: f64,
    /// Current label; `null` until the loop accepts the record.
    label: Option<usize>,
    /// Generator's class, shown on demand and used to mark wrong commits.
    truth: usize,
    /// Whether the label was visible from the start.
    given: bool,
}

/// What one call to `step` did.
#[derive(Serialize)]
struct StepView {
    iteration: usize,
    newly_labeled: usize,
    /// Labeled records after this step, and the dataset size.
    labeled: usize,
    total: usize,
    /// Fraction of the initially hidden records labeled so far.
    coverage: f64,
    /// Fraction of those commitments that match the generator.
    committed_accuracy: f64,
    done: bool,
    termination: Option<String>,
    events: Vec<EventView>,
}

#[derive(Serialize)]
struct EventView {
    id: usize,
    class: usize,
    lp_prob: f64,
    correct: bool,
}

/// Decision regions on a regular grid, row-major from the bottom-left.
#[derive(Serialize)]
struct MapView {
    cols: usize,
    rows: usize,
    x0: f64,
    y0: f64,
    dx: f64,
    dy: f64,
    classes: Vec<usize>,
}

/// The demo's whole state: current labels, the fixed propagation graph, and
/// the model from the most recent iteration.
pub struct Engine {
    records: Vec<Record>,
    n_classes: usize,
    truth: GroundTruth,
    hidden: usize,
    transition: TransitionMatrix,
    lp: LpParams,
    threshold: f64,
    classifier: ClassifierSpec,
    model: Option<TrainedModel>,
    iterations: usize,
    termination: Option<&'static str>,
    /// What the most recent iteration committed, for the status report.
    last_events: Vec<EventView>,
    bounds: (f64, f64, f64, f64),
}

impl Engine {
    pub fn new(
        n: usize,
        classes: usize,
        separation: f64,
        unlabeled_fraction: f64,
        threshold: f64,
        seed: u64,
    ) -> Result<Engine, Error> {
        let full = gen_blobs(n, classes, 2, separation, seed)?;
        let (masked, truth) = mask_labels(&full, unlabeled_fraction, seed)?;
        let sigma = default_sigma(&masked)?;
        let lp = LpParams {
            sigma: Some(sigma),
            ..LpParams::default()
        };
        let transition = row_normalize(&build_weights(&masked, sigma)?)?;
        let bounds = feature_bounds(masked.records());
        Ok(Engine {
            records: masked.records().to_vec(),
            n_classes: masked.n_classes(),
            hidden: truth.len(),
            truth,
            transition,
            lp,
            threshold,
            classifier: ClassifierSpec::default(),
            model: None,
            iterations: 0,
            termination: None,
            last_events: Vec::new(),
            bounds,
        })
    }

    pub fn points_json(&self) -> String {
        let views: Vec<PointView> = self
            .records
            .iter()
            .map(|rec| PointView {
                id: rec.id,
                x: rec.features[0],
                y: rec.features[1],
                label: rec.label,
                truth: self
                    .truth
                    .get(rec.id)
                    .or(rec.label)
                    .expect("every record has an origin class"),
                given: self.truth.get(rec.id).is_none(),
            })
            .collect();
        serde_json::to_string(&views).expect("views serialize")
    }

    /// One loop iteration: propagate, fit, gate, commit. Idempotent once the
    /// loop has terminated.
    pub fn step_json(&mut self) -> Result<String, Error> {
        if self.termination.is_none() {
            self.advance()?;
        }
        let view = self.status();
        Ok(serde_json::to_string(&view).expect("status serializes"))
    }

    fn advance(&mut self) -> Result<(), Error> {
        let labeled_before = self.records.iter().filter(|r| r.label.is_some()).count();
        if labeled_before == self.records.len() {
            self.termination = Some("all_labeled");
            return Ok(());
        }

        let labels: Vec<Option<usize>> = self.records.iter().map(|r| r.label).collect();
        let lp = propagate(
            &self.transition,
            &labels,
            self.n_classes,
            self.lp.tol,
            self.lp.max_iter,
        )?;
        let current = Dataset::new(self.records.clone(), self.n_classes)?;
        let model = classifiers::train(&self.classifier, &current)?;
        let events = label_step(&self.records, &lp.probabilities, &model, self.threshold)?;

        let pos_by_id: HashMap<usize, usize> = self
            .records
            .iter()
            .enumerate()
            .map(|(pos, r)| (r.id, pos))
            .collect();
        self.last_events = events
            .iter()
            .map(|e| EventView {
                id: e.id,
                class: e.class,
                lp_prob: e.lp_prob,
                correct: self.truth.get(e.id) == Some(e.class),
            })
            .collect();
        for event in &events {
            self.records[pos_by_id[&event.id]].label = Some(event.class);
        }
        self.model = Some(model);
        self.iterations += 1;
        if events.is_empty() {
            self.termination = Some("no_progress");
        } else if self.records.iter().all(|r| r.label.is_some()) {
            self.termination = Some("all_labeled");
        }
        Ok(())
    }

    fn status(&self) -> StepView {
        let labeled = self.records.iter().filter(|r| r.label.is_some()).count();
        let mut committed = 0usize;
        let mut correct = 0usize;
        for (id, true_label) in self.truth.iter() {
            let rec = self
                .records
                .iter()
                .find(|r| r.id == id)
                .expect("hidden record exists");
            if let Some(label) = rec.label {
                committed += 1;
                if label == true_label {
                    correct += 1;
                }
            }
        }
        StepView {
            iteration: self.iterations,
            newly_labeled: self.last_events.len(),
            labeled,
            total: self.records.len(),
            coverage: if self.hidden == 0 {
                1.0
            } else {
                committed as f64 / self.hidden as f64
            },
            committed_accuracy: if committed == 0 {
                1.0
            } else {
                correct as f64 / committed as f64
            },
            done: self.termination.is_some(),
            termination: self.termination.map(str::to_string),
            events: self
                .last_events
                .iter()
                .map(|e| EventView {
                    id: e.id,
                    class: e.class,
                    lp_prob: e.lp_prob,
                    correct: e.correct,
                })
                .collect(),
        }
    }

    /// Class of every cell center on a `cols` × `rows` grid spanning the
    /// data's bounding box (with margin). Fits a model first if the loop has
    /// not run yet.
    pub fn decision_map_json(&mut self, cols: usize, rows: usize) -> Result<String, Error> {
        if cols == 0 || rows == 0 {
            return Err(Error::InvalidConfig(
                "decision map needs at least one cell per axis".into(),
            ));
        }
        if self.model.is_none() {
            let current = Dataset::new(self.records.clone(), self.n_classes)?;
            self.model = Some(classifiers::train(&self.classifier, &current)?);
        }
        let model = self.model.as_ref().expect("model fitted above");
        let (x0, x1, y0, y1) = self.bounds;
        let dx = (x1 - x0) / cols as f64;
        let dy = (y1 - y0) / rows as f64;
        let mut classes = Vec::with_capacity(cols * rows);
        for row in 0..rows {
            let y = y0 + (row as f64 + 0.5) * dy;
            for col in 0..cols {
                let x = x0 + (col as f64 + 0.5) * dx;
                classes.push(model.predict(&[x, y])?);
            }
        }
        let view = MapView {
            cols,
            rows,
            x0,
            y0,
            dx,
            dy,
            classes,
        };
        Ok(serde_json::to_string(&view).expect("map serializes"))
    }
}

fn feature_bounds(records: &[Record]) -> (f64, f64, f64, f64) {
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for rec in records {
        x0 = x0.min(rec.features[0]);
        x1 = x1.max(rec.features[0]);
        y0 = y0.min(rec.features[1]);
        y1 = y1.max(rec.features[1]);
    }
    let margin_x = 0.1 * (x1 - x0).max(1e-9);
    let margin_y = 0.1 * (y1 - y0).max(1e-9);
    (x0 - margin_x, x1 + margin_x, y0 - margin_y, y1 + margin_y)
}

/// The browser-facing handle: construction generates the data, `step`
/// advances the loop, `decision_map` rasterizes the model, and `points`
/// reports what to draw.
#[wasm_bindgen]
pub struct Demo {
    engine: Engine,
}

#[wasm_bindgen]
impl Demo {
    /// Generates a fresh two-dimensional dataset and resets the loop.
    #[wasm_bindgen(constructor)]
    pub fn new(
        n: u32,
        classes: u32,
        separation: f64,
        unlabeled_fraction: f64,
        threshold: f64,
        seed: u32,
    ) -> Result<Demo, JsError> {
        let engine = Engine::new(
            n as usize,
            classes as usize,
            separation,
            unlabeled_fraction,
            threshold,
            seed as u64,
        )
        .map_err(|e| JsError::new(&e.to_string()))?;
        Ok(Demo { engine })
    }

    /// Current points as JSON: `[{id, x, y, label, truth, given}, ...]`.
    pub fn points(&self) -> String {
        self.engine.points_json()
    }

    /// Runs one iteration and returns its JSON status report.
    pub fn step(&mut self) -> Result<String, JsError> {
        self.engine
            .step_json()
            .map_err(|e| JsError::new(&e.to_string()))
    }

    /// Rasterizes the current model's decision regions as JSON.
    pub fn decision_map(&mut self, cols: u32, rows: u32) -> Result<String, JsError> {
        self.engine
            .decision_map_json(cols as usize, rows as usize)
            .map_err(|e| JsError::new(&e.to_string()))
    }
}
