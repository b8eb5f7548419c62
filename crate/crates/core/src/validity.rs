//! Clustering validity indices.
//!
//! * Silhouette: pairwise, `(b - a) / max(a, b)` with `a` the mean distance
//!   to the own cluster and `b` the mean distance to the closest other one.
//! * Simplified silhouette (SS): the same ratio with distances to medoids.
//! * Mean simplified silhouette (MSS): `1 - a / b` where `a` is the distance
//!   to the own medoid and `b` the *average* distance to all other medoids.
//!   Points in singleton clusters are left out of the aggregate.
//!
//! Silhouette and SS give singleton clusters a coefficient of 0.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::kmedoids::ClusteringResult;
use crate::{Error, Result};

/// Per-point coefficients plus their mean. `None` marks an excluded point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub per_point: Vec<Option<f64>>,
    /// Mean of the included coefficients; `None` when every point was
    /// excluded.
    pub aggregate: Option<f64>,
}

impl IndexReport {
    fn from_values(per_point: Vec<Option<f64>>) -> Self {
        let (sum, count) = per_point
            .iter()
            .flatten()
            .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        let aggregate = (count > 0).then(|| sum / count as f64);
        Self { per_point, aggregate }
    }
}

fn euclid(points: ArrayView2<'_, f64>, i: usize, j: usize) -> f64 {
    points
        .row(i)
        .iter()
        .zip(points.row(j))
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn check(n_points: usize, clustering: &ClusteringResult) -> Result<()> {
    if clustering.k() < 2 {
        return Err(Error::InvalidParameter("validity indices need at least 2 clusters".into()));
    }
    if clustering.assignment.len() != n_points {
        return Err(Error::InvalidParameter(format!(
            "assignment covers {} points, expected {n_points}",
            clustering.assignment.len()
        )));
    }
    Ok(())
}

fn ratio(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m > 0.0 {
        (b - a) / m
    } else {
        0.0
    }
}

pub fn silhouette(points: ArrayView2<'_, f64>, clustering: &ClusteringResult) -> Result<IndexReport> {
    let n = points.nrows();
    check(n, clustering)?;
    let k = clustering.k();
    let sizes = clustering.cluster_sizes();
    let per_point = (0..n)
        .map(|i| {
            let own = clustering.assignment[i];
            if sizes[own] <= 1 {
                return Some(0.0);
            }
            let mut sums = vec![0.0; k];
            for j in 0..n {
                if j != i {
                    sums[clustering.assignment[j]] += euclid(points, i, j);
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            Some(ratio(a, b))
        })
        .collect();
    Ok(IndexReport::from_values(per_point))
}

pub fn simplified_silhouette(
    points: ArrayView2<'_, f64>,
    clustering: &ClusteringResult,
) -> Result<IndexReport> {
    let n = points.nrows();
    check(n, clustering)?;
    let sizes = clustering.cluster_sizes();
    let per_point = (0..n)
        .map(|i| {
            let own = clustering.assignment[i];
            if sizes[own] <= 1 {
                return Some(0.0);
            }
            let a = euclid(points, i, clustering.medoids[own]);
            let b = clustering
                .medoids
                .iter()
                .enumerate()
                .filter(|&(c, _)| c != own)
                .map(|(_, &m)| euclid(points, i, m))
                .fold(f64::INFINITY, f64::min);
            Some(ratio(a, b))
        })
        .collect();
    Ok(IndexReport::from_values(per_point))
}

/// MSS with Euclidean distances between rows of `points`.
pub fn mss(points: ArrayView2<'_, f64>, clustering: &ClusteringResult) -> Result<IndexReport> {
    check(points.nrows(), clustering)?;
    Ok(mss_with_distance(points.nrows(), clustering, |i, m| euclid(points, i, m)))
}

/// Medoid slots that enter the `b` average of a point in cluster `own`.
/// Singleton clusters still count here; only their own points are excluded
/// from the aggregate.
fn reference_slots(k: usize, own: usize) -> impl Iterator<Item = usize> {
    (0..k).filter(move |&c| c != own)
}

/// MSS over an arbitrary dissimilarity `dist(point, medoid_point)`.
/// Evaluates exactly `n_points * k` distances.
pub fn mss_with_distance(
    n_points: usize,
    clustering: &ClusteringResult,
    mut dist: impl FnMut(usize, usize) -> f64,
) -> IndexReport {
    let k = clustering.k();
    let sizes = clustering.cluster_sizes();
    let mut to_medoids = vec![0.0; k];
    let per_point = (0..n_points)
        .map(|i| {
            for (slot, &m) in to_medoids.iter_mut().zip(&clustering.medoids) {
                *slot = dist(i, m);
            }
            let own = clustering.assignment[i];
            if sizes[own] <= 1 {
                return None;
            }
            let a = to_medoids[own];
            let (sum, count) = reference_slots(k, own)
                .fold((0.0, 0usize), |(s, c), slot| (s + to_medoids[slot], c + 1));
            let b = sum / count as f64;
            Some(if b > 0.0 { 1.0 - a / b } else { 0.0 })
        })
        .collect();
    IndexReport::from_values(per_point)
}
