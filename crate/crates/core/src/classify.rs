//! KNN evaluation of feature subsets.

use std::time::Instant;

use ndarray::{ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Dataset, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub n_neighbors: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { n_neighbors: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub balanced_f: f64,
    /// Seconds spent predicting the test set, including the column copy.
    pub predict_time: f64,
    pub subset: Vec<usize>,
    pub config: KnnConfig,
    pub predictions: Vec<usize>,
    pub truth: Vec<usize>,
}

fn check_subset(subset: &[usize], m: usize) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::InvalidParameter("empty feature subset".into()));
    }
    if let Some(&f) = subset.iter().find(|&&f| f >= m) {
        return Err(Error::InvalidParameter(format!("feature {f} out of range for {m} features")));
    }
    Ok(())
}

fn squared_euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Majority label among the `n_neighbors` nearest train rows, using only
/// the `subset` columns. Labels are indices into the shared class list.
pub fn knn_predict(
    train: &Dataset,
    test: &Dataset,
    subset: &[usize],
    n_neighbors: usize,
) -> Result<Vec<usize>> {
    if train.class_ids() != test.class_ids() {
        return Err(Error::InvalidDataset("train and test use different class lists".into()));
    }
    if train.n_features() != test.n_features() {
        return Err(Error::InvalidDataset(format!(
            "train has {} features, test has {}",
            train.n_features(),
            test.n_features()
        )));
    }
    check_subset(subset, train.n_features())?;
    if n_neighbors == 0 || n_neighbors > train.n_instances() {
        return Err(Error::InvalidParameter(format!(
            "n_neighbors = {n_neighbors} outside [1, {}]",
            train.n_instances()
        )));
    }
    let xtr = train.instances().select(Axis(1), subset);
    let xte = test.instances().select(Axis(1), subset);
    let labels = train.labels();
    let n_classes = train.n_classes();

    let predictions = (0..xte.nrows())
        .into_par_iter()
        .map(|t| {
            let row = xte.row(t);
            let mut near: Vec<(f64, usize)> = xtr
                .rows()
                .into_iter()
                .enumerate()
                .map(|(i, r)| (squared_euclidean(row, r), i))
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if n_neighbors < near.len() {
                near.select_nth_unstable_by(n_neighbors - 1, cmp);
                near.truncate(n_neighbors);
            }
            near.sort_by(cmp);

            let mut votes = vec![0usize; n_classes];
            for &(_, i) in &near {
                votes[labels[i]] += 1;
            }
            let top = votes.iter().copied().max().unwrap_or(0);
            near.iter().map(|&(_, i)| labels[i]).find(|&l| votes[l] == top).unwrap_or(0)
        })
        .collect();
    Ok(predictions)
}

fn check_lengths(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidParameter(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidParameter("no predictions".into()));
    }
    Ok(())
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Macro-averaged F1 over the classes present in either `pred` or `truth`.
pub fn balanced_f(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let n_classes = pred.iter().chain(truth).copied().max().unwrap_or(0) + 1;
    let mut tp = vec![0usize; n_classes];
    let mut predicted = vec![0usize; n_classes];
    let mut actual = vec![0usize; n_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        predicted[p] += 1;
        actual[t] += 1;
        if p == t {
            tp[p] += 1;
        }
    }
    let mut total = 0.0;
    let mut classes = 0;
    for c in 0..n_classes {
        if predicted[c] == 0 && actual[c] == 0 {
            continue;
        }
        classes += 1;
        // 2PR/(P+R) written over counts
        let denom = predicted[c] + actual[c];
        if denom > 0 && tp[c] > 0 {
            total += 2.0 * tp[c] as f64 / denom as f64;
        }
    }
    Ok(total / classes as f64)
}

pub fn evaluate(train: &Dataset, test: &Dataset, subset: &[usize], cfg: &KnnConfig) -> Result<EvalReport> {
    let start = Instant::now();
    let predictions = knn_predict(train, test, subset, cfg.n_neighbors)?;
    let predict_time = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
    let truth = test.labels().to_vec();
    Ok(EvalReport {
        accuracy: accuracy(&predictions, &truth)?,
        balanced_f: balanced_f(&predictions, &truth)?,
        predict_time,
        subset: subset.to_vec(),
        config: *cfg,
        predictions,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn one_d(values: &[f64], labels: &[&str], classes: &[&str]) -> Dataset {
        // a constant second column keeps the dataset valid without moving
        // any distance
        let x = Array2::from_shape_fn((values.len(), 2), |(i, j)| if j == 0 { values[i] } else { 0.0 });
        let index: Vec<usize> =
            labels.iter().map(|l| classes.iter().position(|c| c == l).unwrap()).collect();
        Dataset::new(
            x,
            index,
            vec!["f0".into(), "pad".into()],
            classes.iter().map(|c| c.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn nearest_and_majority() {
        let train = one_d(&[0.0, 1.0, 10.0], &["A", "A", "B"], &["A", "B"]);
        let test = one_d(&[9.0, 9.0], &["B", "B"], &["A", "B"]);
        assert_eq!(knn_predict(&train, &test, &[0], 1).unwrap(), vec![1, 1]);
        assert_eq!(knn_predict(&train, &test, &[0], 3).unwrap(), vec![0, 0]);
    }

    #[test]
    fn identical_row_wins() {
        let train = one_d(&[0.0, 4.0, 2.0], &["A", "B", "B"], &["A", "B"]);
        let test = one_d(&[4.0, 0.0], &["B", "A"], &["A", "B"]);
        assert_eq!(knn_predict(&train, &test, &[0], 1).unwrap(), vec![1, 0]);
    }

    #[test]
    fn tie_breaks() {
        // equidistant neighbors: the lower train index wins
        let train = one_d(&[1.0, -1.0], &["B", "A"], &["A", "B"]);
        let test = one_d(&[0.0, 0.0], &["A", "A"], &["A", "B"]);
        assert_eq!(knn_predict(&train, &test, &[0], 1).unwrap(), vec![1, 1]);
        // one vote each: the class of the nearest neighbor wins
        let train = one_d(&[0.5, -2.0], &["B", "A"], &["A", "B"]);
        assert_eq!(knn_predict(&train, &test, &[0], 2).unwrap(), vec![1, 1]);
    }

    #[test]
    fn invalid_inputs() {
        let train = one_d(&[0.0, 1.0], &["A", "B"], &["A", "B"]);
        assert!(knn_predict(&train, &train, &[], 1).is_err());
        assert!(knn_predict(&train, &train, &[2], 1).is_err());
        assert!(knn_predict(&train, &train, &[0], 3).is_err());
        assert!(accuracy(&[0], &[0, 1]).is_err());
        assert!(balanced_f(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn metric_examples() {
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 1, 0]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 0], &[0, 1]).unwrap(), 0.0);
        assert_eq!(accuracy(&[0, 1, 1, 1], &[0, 1, 1, 0]).unwrap(), 0.75);
        assert_eq!(balanced_f(&[2, 0, 1], &[2, 0, 1]).unwrap(), 1.0);
        let f = balanced_f(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap();
        assert!((f - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(balanced_f(&[3, 3], &[3, 3]).unwrap(), 1.0);
    }

    #[test]
    fn evaluate_is_consistent() {
        let x = array![[0.0, 5.0], [0.2, 1.0], [1.0, 3.0], [0.9, 2.0], [0.1, 4.0], [0.8, 0.0]];
        let d = Dataset::from_labeled(x, &["a", "a", "b", "b", "a", "b"], vec!["p".into(), "q".into()])
            .unwrap();
        let r = evaluate(&d, &d, &[0, 1], &KnnConfig { n_neighbors: 1 }).unwrap();
        assert_eq!(r.accuracy, accuracy(&r.predictions, &r.truth).unwrap());
        assert_eq!(r.balanced_f, balanced_f(&r.predictions, &r.truth).unwrap());
        assert_eq!(r.accuracy, 1.0);
        assert!(r.predict_time > 0.0);
    }
}
