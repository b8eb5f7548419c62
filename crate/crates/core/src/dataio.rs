//! Labeled datasets: CSV ingestion, min–max scaling, and seeded row splits.

use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::{Error, Result};

/// An `N x M` instance matrix with one class label per row.
///
/// Labels are stored as indices into `class_ids`, which keeps the class
/// names in first-appearance order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    instances: Array2<f64>,
    labels: Vec<usize>,
    feature_names: Vec<String>,
    class_ids: Vec<String>,
}

impl Dataset {
    /// Builds a dataset and checks `N >= 2`, `M >= 2`, `C >= 2` and that
    /// every label indexes `class_ids`.
    pub fn new(
        instances: Array2<f64>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_ids: Vec<String>,
    ) -> Result<Self> {
        let (n, m) = instances.dim();
        if n < 2 {
            return Err(Error::InvalidDataset(format!("need at least 2 instances, got {n}")));
        }
        if m < 2 {
            return Err(Error::InvalidDataset(format!("need at least 2 features, got {m}")));
        }
        if class_ids.len() < 2 {
            return Err(Error::TooFewClasses(class_ids.len()));
        }
        Self::checked(instances, labels, feature_names, class_ids)
    }

    /// Builds a dataset from per-row label strings; classes are numbered in
    /// order of first appearance.
    pub fn from_labeled<S: AsRef<str>>(
        instances: Array2<f64>,
        labels: &[S],
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let mut class_ids: Vec<String> = Vec::new();
        let encoded = labels
            .iter()
            .map(|l| {
                let l = l.as_ref();
                match class_ids.iter().position(|c| c == l) {
                    Some(i) => i,
                    None => {
                        class_ids.push(l.to_string());
                        class_ids.len() - 1
                    }
                }
            })
            .collect();
        Self::new(instances, encoded, feature_names, class_ids)
    }

    fn checked(
        instances: Array2<f64>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_ids: Vec<String>,
    ) -> Result<Self> {
        let (n, m) = instances.dim();
        if labels.len() != n {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {n} instances",
                labels.len()
            )));
        }
        if feature_names.len() != m {
            return Err(Error::InvalidDataset(format!(
                "{} feature names for {m} features",
                feature_names.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_ids.len()) {
            return Err(Error::InvalidDataset(format!("label index {bad} out of range")));
        }
        Ok(Self { instances, labels, feature_names, class_ids })
    }

    pub fn instances(&self) -> &Array2<f64> {
        &self.instances
    }

    /// Class index of every row.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_ids(&self) -> &[String] {
        &self.class_ids
    }

    pub fn n_instances(&self) -> usize {
        self.instances.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.instances.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_ids.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows in the given order. The class list is kept as is, so some
    /// classes may end up without samples.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            instances: self.instances.select(Axis(0), rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            feature_names: self.feature_names.clone(),
            class_ids: self.class_ids.clone(),
        }
    }

    /// Columns in the given order. A single column is allowed here so that
    /// one-feature subsets can still be evaluated.
    pub fn select_features(&self, features: &[usize]) -> Dataset {
        Dataset {
            instances: self.instances.select(Axis(1), features),
            labels: self.labels.clone(),
            feature_names: features.iter().map(|&f| self.feature_names[f].clone()).collect(),
            class_ids: self.class_ids.clone(),
        }
    }

    /// Drops classes that have no rows, renumbering the rest in their
    /// existing order. Fails if fewer than two classes remain.
    pub fn with_present_classes(&self) -> Result<Dataset> {
        let counts = self.class_counts();
        let mut remap = vec![usize::MAX; counts.len()];
        let mut class_ids = Vec::new();
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                remap[c] = class_ids.len();
                class_ids.push(self.class_ids[c].clone());
            }
        }
        if class_ids.len() < 2 {
            return Err(Error::TooFewClasses(class_ids.len()));
        }
        Ok(Dataset {
            instances: self.instances.clone(),
            labels: self.labels.iter().map(|&l| remap[l]).collect(),
            feature_names: self.feature_names.clone(),
            class_ids,
        })
    }
}

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl LabelColumn {
    /// Interprets a command-line value: an exact header match wins, then a
    /// zero-based index.
    pub fn parse(raw: &str) -> Self {
        match raw.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(raw.to_string()),
        }
    }

    fn resolve(&self, headers: &[String]) -> Result<usize> {
        match self {
            LabelColumn::Name(name) => headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingLabelColumn(name.clone())),
            LabelColumn::Index(i) => {
                let as_name = i.to_string();
                if let Some(p) = headers.iter().position(|h| *h == as_name) {
                    return Ok(p);
                }
                if *i < headers.len() {
                    Ok(*i)
                } else {
                    Err(Error::MissingLabelColumn(as_name))
                }
            }
        }
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Name(n) => f.write_str(n),
            LabelColumn::Index(i) => write!(f, "{i}"),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_csv(file, label)
}

/// Parses a headed CSV document. Every non-label cell must be a real
/// number; the label column may hold arbitrary text.
pub fn parse_csv<R: Read>(reader: R, label: &LabelColumn) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if let Some((i, h)) = headers.iter().enumerate().find(|&(i, h)| headers[..i].contains(h)) {
        return Err(Error::InvalidDataset(format!("column {} repeats the header '{h}'", i + 1)));
    }
    let label_idx = label.resolve(&headers)?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::InvalidDataset(format!(
                "row {} has {} fields, header has {}",
                r + 1,
                record.len(),
                headers.len()
            )));
        }
        for (i, cell) in record.iter().enumerate() {
            if i == label_idx {
                labels.push(cell.to_string());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Cell {
                row: r + 1,
                column: headers[i].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::Cell { row: r + 1, column: headers[i].clone(), value: cell.to_string() });
            }
            values.push(v);
        }
    }

    let n = labels.len();
    let m = feature_names.len();
    let instances = Array2::from_shape_vec((n, m), values)
        .map_err(|e| Error::InvalidDataset(e.to_string()))?;
    let distinct = {
        let mut seen: Vec<&str> = Vec::new();
        for l in &labels {
            if !seen.contains(&l.as_str()) {
                seen.push(l);
            }
        }
        seen.len()
    };
    if distinct < 2 {
        return Err(Error::TooFewClasses(distinct));
    }
    Dataset::from_labeled(instances, &labels, feature_names)
}

/// Rescales every column to `[0, 1]`; constant columns become all zeros.
pub fn minmax_normalize(d: &Dataset) -> Dataset {
    let mut out = d.clone();
    for mut col in out.instances.columns_mut() {
        let (lo, hi) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let range = hi - lo;
        if range > 0.0 {
            col.mapv_inplace(|v| (v - lo) / range);
        } else {
            col.fill(0.0);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub fold_count: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.75, fold_count: 5, seed: 0 }
    }
}

impl SplitSpec {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidSplit(format!(
                "train fraction {} outside (0, 1)",
                self.train_fraction
            )));
        }
        if self.fold_count < 2 {
            return Err(Error::InvalidSplit(format!("fold count {} below 2", self.fold_count)));
        }
        if self.train_fraction * (n as f64) < self.fold_count as f64 {
            return Err(Error::InvalidSplit(format!(
                "{} training rows cannot fill {} folds",
                self.train_fraction * n as f64,
                self.fold_count
            )));
        }
        Ok(())
    }
}

fn shuffled_rows(n: usize, seed: u64) -> Vec<usize> {
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut rng::seeded(seed));
    rows
}

/// Row indices of a uniform random train/test split. Each side is sorted.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidSplit(format!(
            "train fraction {} outside (0, 1)",
            spec.train_fraction
        )));
    }
    let n_train = (spec.train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::InvalidSplit(format!(
            "fraction {} of {n} rows leaves an empty side",
            spec.train_fraction
        )));
    }
    let rows = shuffled_rows(n, spec.seed);
    let mut train = rows[..n_train].to_vec();
    let mut test = rows[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split_train_test(d: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(d.n_instances(), spec)?;
    Ok((d.select_rows(&train), d.select_rows(&test)))
}

/// Validation row sets of a seeded k-fold partition. Fold sizes differ by
/// at most one; each set is sorted.
pub fn fold_indices(n: usize, fold_count: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if fold_count < 2 {
        return Err(Error::InvalidSplit(format!("fold count {fold_count} below 2")));
    }
    if fold_count > n {
        return Err(Error::InvalidSplit(format!("{fold_count} folds for {n} rows")));
    }
    let rows = shuffled_rows(n, seed);
    let base = n / fold_count;
    let extra = n % fold_count;
    let mut folds = Vec::with_capacity(fold_count);
    let mut start = 0;
    for f in 0..fold_count {
        let len = base + usize::from(f < extra);
        let mut fold = rows[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(folds)
}

/// `(train_part, validation_part)` for every fold.
pub fn make_folds(d: &Dataset, spec: &SplitSpec) -> Result<Vec<(Dataset, Dataset)>> {
    let n = d.n_instances();
    let folds = fold_indices(n, spec.fold_count, spec.seed)?;
    Ok(folds
        .iter()
        .map(|validation| {
            let mut in_val = vec![false; n];
            for &r in validation {
                in_val[r] = true;
            }
            let train: Vec<usize> = (0..n).filter(|&r| !in_val[r]).collect();
            (d.select_rows(&train), d.select_rows(validation))
        })
        .collect())
}
