//! Tabular dataset ingestion and the deterministic perturbations used by the
//! benchmark protocol: min-max scaling, k-fold plans and label noise.
//!
//! Two input formats are understood:
//!
//! * CSV (RFC 4180, UTF-8). The first row is treated as a header when any of
//!   its feature cells is non-numeric. Lines starting with `#` are comments.
//! * Sparse index:value rows, `<label> <index>:<value> ...`, 1-based indices.
//!   Absent indices are zero.
//!
//! Missing values (empty cells, `?`, `NA`, non-finite numbers) are rejected at
//! parse time.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bipolar class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn value(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }

    pub fn from_sign(v: f64) -> Option<Label> {
        if v == 1.0 {
            Some(Label::Positive)
        } else if v == -1.0 {
            Some(Label::Negative)
        } else {
            None
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Positive => f.write_str("1"),
            Label::Negative => f.write_str("-1"),
        }
    }
}

/// Feature matrix (n x d) plus bipolar labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: Vec<Label>,
    feature_names: Option<Vec<String>>,
    source_id: String,
}

impl Dataset {
    pub fn new(
        features: DMatrix<f64>,
        labels: Vec<Label>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "feature matrix contains NaN or infinite values".into(),
            ));
        }
        Ok(Dataset {
            features,
            labels,
            feature_names: None,
            source_id: source_id.into(),
        })
    }

    /// Builds a dataset from row slices. Convenient in tests and examples.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<Label>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Shape("ragged rows".into()));
        }
        let features = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Dataset::new(features, labels, "inline")
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features() {
            return Err(Error::Shape(format!(
                "{} feature names for {} columns",
                names.len(),
                self.n_features()
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.features.row(i).iter().copied().collect()
    }

    /// (positive count, negative count)
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self
            .labels
            .iter()
            .filter(|&&l| l == Label::Positive)
            .count();
        (pos, self.labels.len() - pos)
    }

    pub fn has_both_classes(&self) -> bool {
        let (p, n) = self.class_counts();
        p > 0 && n > 0
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let d = self.n_features();
        let features = DMatrix::from_fn(indices.len(), d, |i, j| self.features[(indices[i], j)]);
        Dataset {
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            source_id: self.source_id.clone(),
        }
    }

    pub fn with_labels(&self, labels: Vec<Label>) -> Result<Dataset> {
        if labels.len() != self.n_samples() {
            return Err(Error::Shape("label vector length differs".into()));
        }
        let mut out = self.clone();
        out.labels = labels;
        Ok(out)
    }

    /// Writes the dataset as CSV with a header row and the label in the last
    /// column. Values use the shortest representation that round-trips.
    pub fn write_csv<W: Write>(&self, mut w: W, comment: Option<&str>) -> Result<()> {
        let io = |e| Error::io("<writer>", e);
        if let Some(c) = comment {
            writeln!(w, "# {c}").map_err(io)?;
        }
        let names: Vec<String> = match &self.feature_names {
            Some(n) => n.clone(),
            None => (1..=self.n_features()).map(|j| format!("x{j}")).collect(),
        };
        writeln!(w, "{},label", names.join(",")).map_err(io)?;
        for i in 0..self.n_samples() {
            let mut line = String::new();
            for j in 0..self.n_features() {
                line.push_str(&format!("{},", self.features[(i, j)]));
            }
            line.push_str(&self.labels[i].to_string());
            writeln!(w, "{line}").map_err(io)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_csv(&mut w, comment)?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Format {
    Csv,
    Sparse,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Last,
    Index(usize),
    Name(String),
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) if s == "last" => LabelColumn::Last,
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub format: Format,
    pub label_column: LabelColumn,
    /// Raw value mapped to +1. Defaults to the larger of the two raw labels
    /// (numeric order when both parse as numbers, lexicographic otherwise).
    pub positive_label: Option<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            format: Format::Csv,
            label_column: LabelColumn::Last,
            positive_label: None,
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ds = match opts.format {
        Format::Csv => parse_csv(file, opts)?,
        Format::Sparse => parse_sparse(BufReader::new(file), opts)?,
    };
    Ok(ds.with_source_id(source_id))
}

fn is_missing(t: &str) -> bool {
    t.is_empty() || t == "?" || t.eq_ignore_ascii_case("na")
}

fn parse_cell(raw: &str, line: u64) -> Result<f64> {
    let t = raw.trim();
    if is_missing(t) {
        return Err(Error::parse(line, format!("missing value {t:?}")));
    }
    let v: f64 = t
        .parse()
        .map_err(|_| Error::parse(line, format!("not a number: {t:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite value {t:?}")));
    }
    Ok(v)
}

/// A first-row cell that is neither numeric nor a missing-value marker.
fn is_header_cell(c: &str) -> bool {
    let t = c.trim();
    !is_missing(t) && t.parse::<f64>().is_err()
}

pub fn parse_csv<R: Read>(reader: R, opts: &LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        records.push((line, rec));
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let width = records[0].1.len();
    if width < 2 {
        return Err(Error::parse(
            records[0].0,
            "need at least one feature and a label column",
        ));
    }

    let first: Vec<String> = records[0].1.iter().map(str::to_string).collect();
    let label_idx = match &opts.label_column {
        LabelColumn::Last => width - 1,
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => {
            return Err(Error::Label(format!(
                "label column {i} out of range (width {width})"
            )))
        }
        LabelColumn::Name(name) => first
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Label(format!("label column {name:?} not found in header")))?,
    };
    let has_header = matches!(opts.label_column, LabelColumn::Name(_))
        || first
            .iter()
            .enumerate()
            .any(|(j, c)| j != label_idx && is_header_cell(c));

    let body = if has_header {
        &records[1..]
    } else {
        &records[..]
    };
    if body.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let d = width - 1;
    let mut values = Vec::with_capacity(body.len() * d);
    let mut raw_labels = Vec::with_capacity(body.len());
    for (line, rec) in body {
        if rec.len() != width {
            return Err(Error::parse(
                *line,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        for (j, cell) in rec.iter().enumerate() {
            if j == label_idx {
                if cell.is_empty() {
                    return Err(Error::parse(*line, "missing label"));
                }
                raw_labels.push(cell.to_string());
            } else {
                values.push(parse_cell(cell, *line)?);
            }
        }
    }

    let labels = map_labels(&raw_labels, opts.positive_label.as_deref())?;
    let features = DMatrix::from_row_slice(body.len(), d, &values);
    let ds = Dataset::new(features, labels, "csv")?;
    if has_header {
        let names = first
            .into_iter()
            .enumerate()
            .filter(|(j, _)| *j != label_idx)
            .map(|(_, n)| n)
            .collect();
        ds.with_feature_names(names)
    } else {
        Ok(ds)
    }
}

/// Reads an unlabeled numeric CSV: every column is a feature. A first row
/// with any non-numeric cell is a header.
pub fn parse_feature_csv<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let (mut width, mut rows, mut values) = (None, 0usize, Vec::new());
    for (k, rec) in rdr.records().enumerate() {
        let rec =
            rec.map_err(|e| Error::parse(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if k == 0 && rec.iter().any(is_header_cell) {
            width = Some(rec.len());
            continue;
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::parse(
                line,
                format!("expected {w} fields, found {}", rec.len()),
            ));
        }
        for cell in rec.iter() {
            values.push(parse_cell(cell, line)?);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(DMatrix::from_row_slice(rows, width.unwrap_or(0), &values))
}

pub fn load_features(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    parse_feature_csv(File::open(path).map_err(|e| Error::io(path, e))?)
}

pub fn parse_sparse<R: BufRead>(reader: R, opts: &LoadOptions) -> Result<Dataset> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut raw_labels = Vec::new();
    let mut d = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno as u64 + 1;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut toks = t.split_whitespace();
        let label = toks.next().expect("non-empty line has a token");
        let mut row = Vec::new();
        for tok in toks {
            let (idx, val) = tok.split_once(':').ok_or_else(|| {
                Error::parse(lineno, format!("expected index:value, got {tok:?}"))
            })?;
            let idx: usize = idx
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad index {idx:?}")))?;
            if idx == 0 {
                return Err(Error::parse(lineno, "indices are 1-based"));
            }
            row.push((idx - 1, parse_cell(val, lineno)?));
            d = d.max(idx);
        }
        raw_labels.push(label.to_string());
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let labels = map_labels(&raw_labels, opts.positive_label.as_deref())?;
    let mut features = DMatrix::zeros(rows.len(), d);
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            features[(i, j)] = v;
        }
    }
    Dataset::new(features, labels, "sparse")
}

/// Maps raw label strings onto {+1, -1}. Exactly two distinct raw values are
/// required.
fn map_labels(raw: &[String], positive: Option<&str>) -> Result<Vec<Label>> {
    let numeric: Option<Vec<f64>> = raw.iter().map(|s| s.trim().parse::<f64>().ok()).collect();

    if let Some(nums) = numeric {
        let mut distinct: Vec<f64> = nums.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() != 2 {
            return Err(Error::Label(format!(
                "expected exactly 2 distinct labels, found {}",
                distinct.len()
            )));
        }
        let pos = match positive {
            Some(p) => {
                let p: f64 = p
                    .trim()
                    .parse()
                    .map_err(|_| Error::Label(format!("positive label {p:?} not present")))?;
                if !distinct.contains(&p) {
                    return Err(Error::Label(format!("positive label {p} not present")));
                }
                p
            }
            None => distinct[1],
        };
        return Ok(nums
            .into_iter()
            .map(|v| {
                if v == pos {
                    Label::Positive
                } else {
                    Label::Negative
                }
            })
            .collect());
    }

    let mut distinct: BTreeMap<&str, ()> = BTreeMap::new();
    for s in raw {
        distinct.insert(s.as_str(), ());
    }
    if distinct.len() != 2 {
        return Err(Error::Label(format!(
            "expected exactly 2 distinct labels, found {}",
            distinct.len()
        )));
    }
    let pos = match positive {
        Some(p) if distinct.contains_key(p) => p,
        Some(p) => return Err(Error::Label(format!("positive label {p:?} not present"))),
        None => *distinct.keys().next_back().expect("two keys"),
    };
    Ok(raw
        .iter()
        .map(|s| {
            if s == pos {
                Label::Positive
            } else {
                Label::Negative
            }
        })
        .collect())
}

/// Per-column affine map onto [0, 1]. Constant columns map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(features: &DMatrix<f64>) -> Self {
        let (min, max) = features.column_iter().map(|c| (c.min(), c.max())).unzip();
        MinMaxScaler { min, max }
    }

    pub fn transform_value(&self, j: usize, x: f64) -> f64 {
        let range = self.max[j] - self.min[j];
        if range > 0.0 {
            (x - self.min[j]) / range
        } else {
            0.0
        }
    }

    pub fn transform(&self, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if features.ncols() != self.min.len() {
            return Err(Error::DimensionMismatch {
                expected: self.min.len(),
                got: features.ncols(),
            });
        }
        Ok(DMatrix::from_fn(
            features.nrows(),
            features.ncols(),
            |i, j| self.transform_value(j, features[(i, j)]),
        ))
    }

    pub fn transform_row(&self, row: &mut [f64]) {
        for (j, x) in row.iter_mut().enumerate() {
            *x = self.transform_value(j, *x);
        }
    }
}

pub fn normalize_min_max(ds: &Dataset) -> Dataset {
    let scaler = MinMaxScaler::fit(&ds.features);
    let mut out = ds.clone();
    out.features = scaler
        .transform(&ds.features)
        .expect("scaler fitted on the same matrix");
    out
}

/// Assignment of each sample to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub assignments: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl FoldPlan {
    pub fn n_samples(&self) -> usize {
        self.assignments.len()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<writer>", e);
        writeln!(w, "# seed={} k={}", self.seed, self.k).map_err(io)?;
        writeln!(w, "index,fold").map_err(io)?;
        for (i, f) in self.assignments.iter().enumerate() {
            writeln!(w, "{i},{f}").map_err(io)?;
        }
        Ok(())
    }
}

fn check_folds(n: usize, k: usize) -> Result<()> {
    if k < 2 || n < k {
        return Err(Error::InvalidFoldCount { k, n });
    }
    Ok(())
}

/// Unstratified k-fold plan: a seeded shuffle dealt round-robin, so fold
/// sizes differ by at most one and the first `n mod k` folds get the extra.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    check_folds(n, k)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignments = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignments[i] = pos % k;
    }
    Ok(FoldPlan {
        assignments,
        k,
        seed,
    })
}

/// Per-class balanced variant: each class is shuffled separately and the
/// concatenation is dealt round-robin.
pub fn make_stratified_folds(labels: &[Label], k: usize, seed: u64) -> Result<FoldPlan> {
    let n = labels.len();
    check_folds(n, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<usize> = (0..n).filter(|&i| labels[i] == Label::Positive).collect();
    let mut neg: Vec<usize> = (0..n).filter(|&i| labels[i] == Label::Negative).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut assignments = vec![0; n];
    for (slot, &i) in pos.iter().chain(neg.iter()).enumerate() {
        assignments[i] = slot % k;
    }
    Ok(FoldPlan {
        assignments,
        k,
        seed,
    })
}

/// Label-noise specification: flip `round(rate * n)` labels chosen uniformly
/// without replacement by a seeded generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub rate: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..0.5).contains(&rate) {
            return Err(Error::InvalidConfig(format!(
                "noise rate {rate} outside [0, 0.5)"
            )));
        }
        Ok(NoiseSpec { rate, seed })
    }

    /// Round-half-up of rate * n.
    pub fn flip_count(&self, n: usize) -> usize {
        (self.rate * n as f64 + 0.5).floor() as usize
    }

    /// Sorted indices to flip for a dataset of `n` rows.
    pub fn indices(&self, n: usize) -> Vec<usize> {
        let count = self.flip_count(n).min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut idx = rand::seq::index::sample(&mut rng, n, count).into_vec();
        idx.sort_unstable();
        idx
    }

    pub fn metadata_comment(&self) -> String {
        format!("seed={} rate={}", self.seed, self.rate)
    }
}

pub fn inject_label_noise(ds: &Dataset, spec: &NoiseSpec) -> Dataset {
    let mut labels = ds.labels.clone();
    for i in spec.indices(labels.len()) {
        labels[i] = labels[i].flipped();
    }
    let mut out = ds.clone();
    out.labels = labels;
    out
}

/// Writes a noisy copy of `ds` with the `# seed=<u64> rate=<f64>` metadata line.
pub fn write_noisy_dataset(ds: &Dataset, spec: &NoiseSpec, path: impl AsRef<Path>) -> Result<()> {
    inject_label_noise(ds, spec).save_csv(path, Some(&spec.metadata_comment()))
}
