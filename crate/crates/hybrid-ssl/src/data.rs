//! Dataset container and the record-level plumbing around it: delimited and
//! sparse loaders, deterministic shuffle splits, label masking with a shadow
//! ground-truth store, min-max feature scaling, and class-imbalance
//! downsampling.
//!
//! Class labels read from files are remapped to dense indices `0..C-1` in
//! order of first appearance, so the rest of the crate only ever sees
//! contiguous class ids. Record ids are assigned in file order at load time
//! and are preserved verbatim by every transformation in this module.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observation: a feature vector plus an optional class label.
///
/// `label` is `None` for records the learner has not labeled yet. `id` is
/// stable across splits, masking, and scaling, so logs and ground-truth
/// lookups can always refer back to the original record.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub id: usize,
    pub features: Vec<f64>,
    pub label: Option<usize>,
}

/// An immutable collection of records with consistent dimensionality and a
/// fixed class count.
///
/// Invariants enforced by [`Dataset::new`]:
/// - at least one record, all with the same feature dimension,
/// - all features finite,
/// - record ids unique,
/// - every present label in `0..n_classes`, with `n_classes >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<Record>,
    n_classes: usize,
    dim: usize,
}

impl Dataset {
    pub fn new(records: Vec<Record>, n_classes: usize) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidConfig("dataset has no records".into()));
        }
        if n_classes < 2 {
            return Err(Error::ClassCount { found: n_classes });
        }
        let dim = records[0].features.len();
        let mut seen = HashSet::with_capacity(records.len());
        for rec in &records {
            if rec.features.len() != dim {
                return Err(Error::FeatureDim {
                    expected: dim,
                    got: rec.features.len(),
                });
            }
            if rec.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: "dataset features",
                });
            }
            if !seen.insert(rec.id) {
                return Err(Error::Invariant(format!("duplicate record id {}", rec.id)));
            }
            if let Some(label) = rec.label {
                if label >= n_classes {
                    return Err(Error::Invariant(format!(
                        "record {} has label {} but dataset has {} classes",
                        rec.id, label, n_classes
                    )));
                }
            }
        }
        Ok(Dataset {
            records,
            n_classes,
            dim,
        })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn by_id(&self, id: usize) -> Option<&Record> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn labeled_count(&self) -> usize {
        self.records.iter().filter(|r| r.label.is_some()).count()
    }

    pub fn unlabeled_count(&self) -> usize {
        self.len() - self.labeled_count()
    }

    pub fn fully_labeled(&self) -> bool {
        self.unlabeled_count() == 0
    }

    /// Ids of unlabeled records, ascending.
    pub fn unlabeled_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .records
            .iter()
            .filter(|r| r.label.is_none())
            .map(|r| r.id)
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Number of labeled records per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for rec in &self.records {
            if let Some(label) = rec.label {
                counts[label] += 1;
            }
        }
        counts
    }
}

/// On-disk representations the loaders and writers understand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// Comma-separated values, one record per line, label in the last column.
    /// `?` in the label column marks an unlabeled record.
    Csv { has_header: bool },
    /// Sparse `label idx:value ...` lines with 1-based, strictly increasing
    /// feature indices. Unstored indices are zero. `?` marks unlabeled.
    Libsvm,
}

/// Parameters for [`shuffle_split`].
#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    /// Fraction of records assigned to the first (train) side, in (0, 1).
    pub train_fraction: f64,
    pub seed: u64,
}

/// Labels removed by [`mask_labels`], keyed by record id. Kept outside the
/// dataset so nothing downstream can accidentally peek at them; evaluation
/// code joins on id when scoring.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    map: BTreeMap<usize, usize>,
}

impl GroundTruth {
    pub fn get(&self, id: usize) -> Option<usize> {
        self.map.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.map.iter().map(|(&id, &label)| (id, label))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), self)
            .map_err(|e| Error::io(path, e.into()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::io(path, e.into()))
    }
}

/// Reads a dataset from `path`.
///
/// Labels are remapped to `0..C-1` in order of first appearance over the
/// labeled lines; the original spelling is otherwise forgotten. Record ids
/// are assigned `0..n-1` in line order. Fails with a line-numbered error on
/// malformed input, and with [`Error::ClassCount`] when fewer than two
/// distinct classes appear.
pub fn load_dataset(path: &Path, format: DataFormat) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    // (line number, raw label token, features) for each data line.
    let mut rows: Vec<(usize, Option<String>, Vec<f64>)> = Vec::new();
    let mut max_sparse_dim = 0usize;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if idx == 0 {
            if let DataFormat::Csv { has_header: true } = format {
                continue;
            }
        }
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let (label, features) = match format {
            DataFormat::Csv { .. } => parse_csv_line(trimmed, line_no)?,
            DataFormat::Libsvm => {
                let (label, feats) = parse_libsvm_line(trimmed, line_no)?;
                if let Some((last_idx, _)) = feats.last() {
                    max_sparse_dim = max_sparse_dim.max(*last_idx);
                }
                (label, densify_later(feats))
            }
        };
        rows.push((line_no, label, features));
    }

    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: "file contains no data lines".into(),
        });
    }

    // Densify sparse rows now that the overall dimension is known, and check
    // dense rows for a consistent width.
    let dim = match format {
        DataFormat::Libsvm => max_sparse_dim,
        DataFormat::Csv { .. } => rows[0].2.len(),
    };
    let mut class_names: Vec<String> = Vec::new();
    let mut records = Vec::with_capacity(rows.len());
    for (id, (line_no, label, mut features)) in rows.into_iter().enumerate() {
        match format {
            DataFormat::Libsvm => features.resize(dim, 0.0),
            DataFormat::Csv { .. } => {
                if features.len() != dim {
                    return Err(Error::Dimension {
                        line: line_no,
                        expected: dim,
                        found: features.len(),
                    });
                }
            }
        }
        let label = label.map(|token| {
            match class_names.iter().position(|known| *known == token) {
                Some(class) => class,
                None => {
                    class_names.push(token);
                    class_names.len() - 1
                }
            }
        });
        records.push(Record {
            id,
            features,
            label,
        });
    }

    if class_names.len() < 2 {
        return Err(Error::ClassCount {
            found: class_names.len(),
        });
    }
    Dataset::new(records, class_names.len())
}

/// CSV data line: `f1,f2,...,fd,label`.
fn parse_csv_line(line: &str, line_no: usize) -> Result<(Option<String>, Vec<f64>)> {
    let tokens: Vec<&str> = line.split(',').map(str::trim).collect();
    if tokens.len() < 2 {
        return Err(Error::Parse {
            line: line_no,
            msg: "expected at least one feature column and a label column".into(),
        });
    }
    let (label_token, feature_tokens) = tokens.split_last().expect("len >= 2");
    let mut features = Vec::with_capacity(feature_tokens.len());
    for token in feature_tokens {
        let value: f64 = token.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("cannot parse feature value {token:?}"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("non-finite feature value {token:?}"),
            });
        }
        features.push(value);
    }
    let label = parse_label_token(label_token, line_no)?;
    Ok((label, features))
}

/// A parsed sparse line: the label token (if any) and its
/// `(1-based index, value)` pairs.
type SparseLine = (Option<String>, Vec<(usize, f64)>);

/// Sparse line: `label idx:value idx:value ...` with ascending 1-based idx.
fn parse_libsvm_line(line: &str, line_no: usize) -> Result<SparseLine> {
    let mut tokens = line.split_whitespace();
    let label_token = tokens.next().expect("line is non-empty");
    let label = parse_label_token(label_token, line_no)?;

    let mut pairs: Vec<(usize, f64)> = Vec::new();
    for token in tokens {
        let (idx_str, val_str) = token.split_once(':').ok_or_else(|| Error::Parse {
            line: line_no,
            msg: format!("expected index:value, found {token:?}"),
        })?;
        let idx: usize = idx_str.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("cannot parse feature index {idx_str:?}"),
        })?;
        if idx == 0 {
            return Err(Error::Parse {
                line: line_no,
                msg: "feature indices are 1-based; found index 0".into(),
            });
        }
        if let Some((prev, _)) = pairs.last() {
            if idx <= *prev {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("feature indices must be strictly increasing ({prev} then {idx})"),
                });
            }
        }
        let value: f64 = val_str.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("cannot parse feature value {val_str:?}"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("non-finite feature value {val_str:?}"),
            });
        }
        pairs.push((idx, value));
    }
    Ok((label, pairs))
}

fn parse_label_token(token: &str, line_no: usize) -> Result<Option<String>> {
    if token == "?" {
        Ok(None)
    } else if token.is_empty() {
        Err(Error::Parse {
            line: line_no,
            msg: "empty label column (use ? for unlabeled records)".into(),
        })
    } else {
        Ok(Some(token.to_string()))
    }
}

/// Spreads `(idx, value)` pairs into a dense prefix vector; the caller
/// resizes to the full dimension once it is known.
fn densify_later(pairs: Vec<(usize, f64)>) -> Vec<f64> {
    let mut dense = Vec::new();
    for (idx, value) in pairs {
        if idx > dense.len() {
            dense.resize(idx, 0.0);
        }
        dense[idx - 1] = value;
    }
    dense
}

/// Writes `dataset` to `path`. Labels are written as their dense class
/// indices and `?` for unlabeled records, so a written file loads back into
/// an equal dataset whenever classes first appear in index order (always the
/// case for datasets produced by the loaders or the blob generator).
///
/// The sparse writer stores every component, zeros included, so the feature
/// dimension survives the round trip.
pub fn write_dataset(dataset: &Dataset, path: &Path, format: DataFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(path, e);

    match format {
        DataFormat::Csv { has_header } => {
            if has_header {
                let mut header: Vec<String> =
                    (1..=dataset.dim()).map(|i| format!("f{i}")).collect();
                header.push("label".into());
                writeln!(out, "{}", header.join(",")).map_err(io_err)?;
            }
            for rec in dataset.records() {
                for value in &rec.features {
                    write!(out, "{value},").map_err(io_err)?;
                }
                match rec.label {
                    Some(label) => writeln!(out, "{label}").map_err(io_err)?,
                    None => writeln!(out, "?").map_err(io_err)?,
                }
            }
        }
        DataFormat::Libsvm => {
            for rec in dataset.records() {
                match rec.label {
                    Some(label) => write!(out, "{label}").map_err(io_err)?,
                    None => write!(out, "?").map_err(io_err)?,
                }
                for (i, value) in rec.features.iter().enumerate() {
                    write!(out, " {}:{}", i + 1, value).map_err(io_err)?;
                }
                writeln!(out).map_err(io_err)?;
            }
        }
    }
    out.flush().map_err(io_err)
}

/// Shuffles the records with a seeded generator and splits them in two. The
/// first side receives `floor(train_fraction * n)` records; both sides keep
/// the shuffled order and the original record ids. The same spec always
/// produces the same split.
pub fn shuffle_split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train_fraction must lie in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    let n = dataset.len();
    let n_train = (spec.train_fraction * n as f64).floor() as usize;
    if n_train == 0 {
        return Err(Error::EmptySplit { side: "train" });
    }
    if n_train == n {
        return Err(Error::EmptySplit { side: "test" });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);

    let pick = |positions: &[usize]| -> Vec<Record> {
        positions
            .iter()
            .map(|&p| dataset.records()[p].clone())
            .collect()
    };
    let train = Dataset::new(pick(&order[..n_train]), dataset.n_classes())?;
    let test = Dataset::new(pick(&order[n_train..]), dataset.n_classes())?;
    Ok((train, test))
}

/// Hides the labels of `round(fraction * n)` records chosen at random,
/// returning the masked dataset together with the removed labels keyed by
/// record id.
///
/// The input must be fully labeled. The selection is retried (bounded, each
/// attempt deterministic in `seed`) until every class keeps at least one
/// labeled record; if no attempt succeeds the call fails rather than produce
/// a class that label propagation could never seed.
pub fn mask_labels(dataset: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, GroundTruth)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidConfig(format!(
            "mask fraction must lie in [0, 1], got {fraction}"
        )));
    }
    if !dataset.fully_labeled() {
        return Err(Error::Invariant(
            "mask_labels requires a fully labeled dataset".into(),
        ));
    }
    let n = dataset.len();
    let n_mask = (fraction * n as f64).round() as usize;
    if n_mask == 0 {
        return Ok((dataset.clone(), GroundTruth::default()));
    }
    // Each class needs a labeled survivor, so more than n - C masked records
    // can never work.
    if n_mask > n.saturating_sub(dataset.n_classes()) {
        return Err(Error::Masking {
            requested: n_mask,
            total: n,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const ATTEMPTS: usize = 100;
    for _ in 0..ATTEMPTS {
        let mut positions: Vec<usize> = (0..n).collect();
        positions.shuffle(&mut rng);
        let masked: HashSet<usize> = positions[..n_mask].iter().copied().collect();

        let mut survivors = vec![false; dataset.n_classes()];
        for (pos, rec) in dataset.records().iter().enumerate() {
            if !masked.contains(&pos) {
                survivors[rec.label.expect("fully labeled")] = true;
            }
        }
        if !survivors.iter().all(|&s| s) {
            continue;
        }

        let mut truth = BTreeMap::new();
        let mut records = Vec::with_capacity(n);
        for (pos, rec) in dataset.records().iter().enumerate() {
            let mut rec = rec.clone();
            if masked.contains(&pos) {
                truth.insert(rec.id, rec.label.take().expect("fully labeled"));
            }
            records.push(rec);
        }
        let masked_ds = Dataset::new(records, dataset.n_classes())?;
        return Ok((masked_ds, GroundTruth { map: truth }));
    }
    Err(Error::Masking {
        requested: n_mask,
        total: n,
    })
}

/// Per-column min-max parameters fit on one dataset and applied to others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    min: Vec<f64>,
    range: Vec<f64>,
}

impl ScaleParams {
    /// Column minima and ranges of `dataset`.
    pub fn fit(dataset: &Dataset) -> Self {
        let dim = dataset.dim();
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for rec in dataset.records() {
            for (j, &v) in rec.features.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        let range = min.iter().zip(&max).map(|(lo, hi)| hi - lo).collect();
        ScaleParams { min, range }
    }

    /// Maps each feature through `(x - min) / range`. Columns that were
    /// constant in the fitting data map to zero. Values outside the fitted
    /// range are extrapolated, not clipped, so a test set scaled with train
    /// parameters may leave `[0, 1]`.
    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset> {
        if dataset.dim() != self.min.len() {
            return Err(Error::FeatureDim {
                expected: self.min.len(),
                got: dataset.dim(),
            });
        }
        let records = dataset
            .records()
            .iter()
            .map(|rec| {
                let features = rec
                    .features
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        if self.range[j] == 0.0 {
                            0.0
                        } else {
                            (v - self.min[j]) / self.range[j]
                        }
                    })
                    .collect();
                Record {
                    id: rec.id,
                    features,
                    label: rec.label,
                }
            })
            .collect();
        Dataset::new(records, dataset.n_classes())
    }
}

/// Scales `train` to `[0, 1]` per column and applies the same parameters to
/// `test`.
pub fn min_max_scale(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset)> {
    let params = ScaleParams::fit(train);
    Ok((params.apply(train)?, params.apply(test)?))
}

/// Downsamples every class except the largest so the largest-to-smallest
/// count ratio reaches at least `ratio`.
///
/// Classes already smaller than the target `floor(max_count / ratio)` are
/// left alone, and a dataset whose imbalance already meets the ratio is
/// returned unchanged. Fails if the target would be zero records.
pub fn make_skewed(dataset: &Dataset, ratio: f64, seed: u64) -> Result<Dataset> {
    if !(ratio >= 1.0 && ratio.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "skew ratio must be a finite value >= 1, got {ratio}"
        )));
    }
    if !dataset.fully_labeled() {
        return Err(Error::Invariant(
            "make_skewed requires a fully labeled dataset".into(),
        ));
    }
    let counts = dataset.class_counts();
    if counts.contains(&0) {
        return Err(Error::Skew {
            ratio,
            reason: "a class has no records".into(),
        });
    }
    let max_count = *counts.iter().max().expect("at least two classes");
    let min_count = *counts.iter().min().expect("at least two classes");
    if max_count as f64 / min_count as f64 >= ratio {
        return Ok(dataset.clone());
    }
    let target = (max_count as f64 / ratio).floor() as usize;
    if target == 0 {
        return Err(Error::Skew {
            ratio,
            reason: format!("largest class has only {max_count} records"),
        });
    }
    let largest_class = counts
        .iter()
        .position(|&c| c == max_count)
        .expect("nonempty");

    // For each downsampled class pick `target` survivors at random, then keep
    // the original record order.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![true; dataset.len()];
    for (class, &count) in counts.iter().enumerate() {
        if class == largest_class || count <= target {
            continue;
        }
        let mut positions: Vec<usize> = dataset
            .records()
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label == Some(class))
            .map(|(pos, _)| pos)
            .collect();
        positions.shuffle(&mut rng);
        for &pos in &positions[target..] {
            keep[pos] = false;
        }
    }
    let records = dataset
        .records()
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(rec, _)| rec.clone())
        .collect();
    Dataset::new(records, dataset.n_classes())
}
