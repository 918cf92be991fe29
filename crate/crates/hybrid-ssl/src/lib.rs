//! Semi-supervised learning that labels records only when two independent
//! views agree: a graph-based label propagation pass over all records, and a
//! supervised classifier fit on the currently labeled subset. Each iteration
//! the classifier proposes a class for every unlabeled record and the proposal
//! is accepted only if label propagation assigns that same class a probability
//! at or above a confidence threshold. Newly accepted records join the labeled
//! pool and the loop repeats until nothing moves.
//!
//! # Modules
//!
//! | module            | contents                                                        |
//! |-------------------|-----------------------------------------------------------------|
//! | [`data`]          | dataset container, CSV / sparse loaders, splits, masking, scaling |
//! | [`graph_lp`]      | RBF similarity graph and clamped label propagation              |
//! | [`classifiers`]   | SMO-trained SVM (one-vs-one) and logistic regression            |
//! | [`hybrid`]        | the agreement-gated labeling loop                               |
//! | [`parallel`]      | multi-threaded variant producing bit-identical results          |
//! | [`eval`]          | confusion matrices, F-measure, trajectory helpers               |
//! | [`synth`]         | synthetic Gaussian-blob generator                               |
//! | [`experiment`]    | experiment runner: sweeps, baselines, CSV/JSONL outputs         |
//!
//! # Quick start
//!
//! ```
//! use hybrid_ssl::data::mask_labels;
//! use hybrid_ssl::hybrid::{hybrid_fit, HybridConfig};
//! use hybrid_ssl::synth::gen_blobs;
//!
//! let full = gen_blobs(90, 3, 2, 6.0, 7).unwrap();
//! let (masked, truth) = mask_labels(&full, 0.8, 7).unwrap();
//! let result = hybrid_fit(&masked, &HybridConfig::default()).unwrap();
//! let correct = result
//!     .dataset
//!     .records()
//!     .iter()
//!     .filter(|r| r.label.is_some() && r.label == truth.get(r.id))
//!     .count();
//! assert!(correct > 0);
//! ```

pub mod classifiers;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod graph_lp;
pub mod hybrid;
pub mod parallel;
pub mod synth;
pub mod timing;

pub use error::{Error, Result};
