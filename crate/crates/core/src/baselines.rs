//! Filter methods that pick a fixed number of features: Fisher score,
//! ReliefF, correlation-based feature selection (CFS), and random choice.

use rand::seq::index;
use rand::seq::SliceRandom;

use crate::rng;
use crate::separability::VAR_FLOOR;
use crate::{Dataset, Error, Result};

/// Feature scores plus the feature order by descending score (ties by
/// ascending index).
#[derive(Debug, Clone, PartialEq)]
pub struct RankedFeatures {
    pub scores: Vec<f64>,
    pub order: Vec<usize>,
}

impl RankedFeatures {
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Self { scores, order }
    }

    /// The `k` best features, ascending by index.
    pub fn top(&self, k: usize) -> Result<Vec<usize>> {
        check_k(self.scores.len(), k)?;
        let mut top = self.order[..k].to_vec();
        top.sort_unstable();
        Ok(top)
    }
}

fn check_k(m: usize, k: usize) -> Result<()> {
    if k == 0 || k > m {
        return Err(Error::InvalidParameter(format!("k = {k} outside [1, {m}]")));
    }
    Ok(())
}

/// `sum_c n_c (mu_c - mu)^2 / sum_c n_c sigma_c^2`, variances biased and
/// floored.
pub fn fisher_scores(d: &Dataset) -> RankedFeatures {
    let counts = d.class_counts();
    let x = d.instances();
    let labels = d.labels();
    let n = d.n_instances() as f64;
    let scores = x
        .columns()
        .into_iter()
        .map(|col| {
            let mut sums = vec![0.0; counts.len()];
            for (&v, &l) in col.iter().zip(labels) {
                sums[l] += v;
            }
            let overall = sums.iter().sum::<f64>() / n;
            let means: Vec<f64> = sums
                .iter()
                .zip(&counts)
                .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
                .collect();
            let mut sq = vec![0.0; counts.len()];
            for (&v, &l) in col.iter().zip(labels) {
                sq[l] += (v - means[l]).powi(2);
            }
            let mut between = 0.0;
            let mut within = 0.0;
            for c in 0..counts.len() {
                if counts[c] == 0 {
                    continue;
                }
                let nc = counts[c] as f64;
                between += nc * (means[c] - overall).powi(2);
                within += nc * (sq[c] / nc).max(VAR_FLOOR);
            }
            between / within
        })
        .collect();
    RankedFeatures::from_scores(scores)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReliefConfig {
    pub neighbors: usize,
    /// Number of sampled instances; `None` visits every instance once.
    pub sample_count: Option<usize>,
    pub seed: u64,
}

impl Default for ReliefConfig {
    fn default() -> Self {
        Self { neighbors: 10, sample_count: None, seed: 0 }
    }
}

/// ReliefF with `neighbors` nearest hits and, for every other class,
/// `neighbors` nearest misses weighted by that class's prior. Feature
/// differences are scaled by the feature's range; neighbor distances are
/// the sum of those scaled differences.
pub fn relieff_weights(d: &Dataset, cfg: &ReliefConfig) -> Result<RankedFeatures> {
    let (n, m) = d.instances().dim();
    let k = cfg.neighbors;
    if k == 0 {
        return Err(Error::InvalidParameter("ReliefF needs at least one neighbor".into()));
    }
    let counts = d.class_counts();
    if let Some(c) = counts.iter().position(|&c| c > 0 && c <= k) {
        return Err(Error::InvalidParameter(format!(
            "class '{}' has {} samples, ReliefF needs more than {k}",
            d.class_ids()[c],
            counts[c]
        )));
    }
    let x = d.instances();
    let labels = d.labels();
    let ranges: Vec<f64> = x
        .columns()
        .into_iter()
        .map(|c| {
            let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        })
        .collect();
    let diff = |a: usize, b: usize, f: usize| {
        if ranges[f] > 0.0 {
            (x[[a, f]] - x[[b, f]]).abs() / ranges[f]
        } else {
            0.0
        }
    };
    let priors: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();

    let samples: Vec<usize> = match cfg.sample_count {
        None => (0..n).collect(),
        Some(s) if s == 0 || s > n => {
            return Err(Error::InvalidParameter(format!("sample count {s} outside [1, {n}]")))
        }
        Some(s) => {
            let mut rows: Vec<usize> = (0..n).collect();
            rows.shuffle(&mut rng::seeded(cfg.seed));
            rows.truncate(s);
            rows
        }
    };
    let scale = (samples.len() * k) as f64;

    let mut weights = vec![0.0; m];
    for &r in &samples {
        let mut by_distance: Vec<(f64, usize)> = (0..n)
            .filter(|&o| o != r)
            .map(|o| ((0..m).map(|f| diff(r, o, f)).sum(), o))
            .collect();
        by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let own = labels[r];
        for c in 0..counts.len() {
            if counts[c] == 0 {
                continue;
            }
            let nearest = by_distance.iter().filter(|&&(_, o)| labels[o] == c).take(k);
            let factor = if c == own { -1.0 } else { priors[c] / (1.0 - priors[own]) };
            for &(_, o) in nearest {
                for (f, w) in weights.iter_mut().enumerate() {
                    *w += factor * diff(r, o, f) / scale;
                }
            }
        }
    }
    Ok(RankedFeatures::from_scores(weights))
}

fn pearson_abs(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va > 0.0 && vb > 0.0 {
        (cov / (va * vb).sqrt()).abs()
    } else {
        0.0
    }
}

/// CFS merit of a subset: `k r_cf / sqrt(k + k (k - 1) r_ff)` with mean
/// feature–class and mean feature–feature absolute correlations.
pub fn cfs_merit(class_corr: &[f64], pair_corr_sum: f64, subset_len: usize) -> f64 {
    let k = subset_len as f64;
    let r_cf = class_corr.iter().sum::<f64>() / k;
    let pairs = k * (k - 1.0) / 2.0;
    let r_ff = if pairs > 0.0 { pair_corr_sum / pairs } else { 0.0 };
    k * r_cf / (k + k * (k - 1.0) * r_ff).sqrt()
}

/// Greedy forward CFS that stops at exactly `k` features. The class is
/// encoded by its first-appearance index.
pub fn cfs_select(d: &Dataset, k: usize) -> Result<Vec<usize>> {
    let m = d.n_features();
    check_k(m, k)?;
    let columns: Vec<Vec<f64>> = d.instances().columns().into_iter().map(|c| c.to_vec()).collect();
    let label: Vec<f64> = d.labels().iter().map(|&l| l as f64).collect();
    let class_corr: Vec<f64> = columns.iter().map(|c| pearson_abs(c, &label)).collect();

    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut in_subset = vec![false; m];
    // running sum of |r| between each candidate and the selected features
    let mut corr_to_selected = vec![0.0; m];
    let mut pair_sum = 0.0;
    let mut subset_corr: Vec<f64> = Vec::with_capacity(k);

    while selected.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for f in (0..m).filter(|&f| !in_subset[f]) {
            subset_corr.push(class_corr[f]);
            let merit = cfs_merit(&subset_corr, pair_sum + corr_to_selected[f], selected.len() + 1);
            subset_corr.pop();
            if best.map_or(true, |(_, b)| merit > b) {
                best = Some((f, merit));
            }
        }
        let (f, _) = best.expect("k <= m leaves a candidate");
        selected.push(f);
        in_subset[f] = true;
        subset_corr.push(class_corr[f]);
        pair_sum += corr_to_selected[f];
        for g in (0..m).filter(|&g| !in_subset[g]) {
            corr_to_selected[g] += pearson_abs(&columns[f], &columns[g]);
        }
    }
    Ok(selected)
}

/// `k` distinct indices drawn uniformly from `0..m`, ascending.
pub fn random_select(m: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    check_k(m, k)?;
    let mut picked = index::sample(&mut rng::seeded(seed), m, k).into_vec();
    picked.sort_unstable();
    Ok(picked)
}
