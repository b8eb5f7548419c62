//! K-medoids clustering: k-means++ seeding followed by PAM swap refinement.

use ndarray::ArrayView2;
use rand::Rng as _;
use rayon::prelude::*;

use crate::rng::{self, Rng};
use crate::{Error, Result};

/// Safeguard on the number of PAM swap rounds.
pub const MAX_SWAP_ROUNDS: usize = 300;

/// Dense symmetric Euclidean distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn euclidean(points: ArrayView2<'_, f64>) -> Result<Self> {
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite coordinates".into()));
        }
        let n = points.nrows();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        points
                            .row(i)
                            .iter()
                            .zip(points.row(j))
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect()
            })
            .collect();
        Ok(Self { n, data: rows.concat() })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    /// Point indices of the medoids, ascending.
    pub medoids: Vec<usize>,
    /// Cluster (position in `medoids`) of every point.
    pub assignment: Vec<usize>,
    /// Sum over points of the distance to their medoid.
    pub cost: f64,
}

impl ClusteringResult {
    pub fn k(&self) -> usize {
        self.medoids.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }

    /// Nearest-medoid assignment for an arbitrary medoid set. Medoids are
    /// sorted; each medoid owns its own cluster and other ties go to the
    /// lowest medoid index.
    pub fn from_medoids(
        n_points: usize,
        medoids: &[usize],
        dist: impl Fn(usize, usize) -> f64,
    ) -> Self {
        let mut medoids = medoids.to_vec();
        medoids.sort_unstable();
        let mut assignment = vec![0; n_points];
        let mut cost = 0.0;
        for (i, slot) in assignment.iter_mut().enumerate() {
            if let Some(own) = medoids.iter().position(|&m| m == i) {
                *slot = own;
                continue;
            }
            let (best, d) = medoids
                .iter()
                .enumerate()
                .map(|(s, &m)| (s, dist(i, m)))
                .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
            *slot = best;
            cost += d;
        }
        Self { medoids, assignment, cost }
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!("k = {k} outside [2, {n}]")));
    }
    Ok(())
}

/// k-means++ seeding on the rows of `points`.
pub fn kmeanspp_init(points: ArrayView2<'_, f64>, k: usize, seed: u64) -> Result<Vec<usize>> {
    check_k(points.nrows(), k)?;
    let dist = DistanceMatrix::euclidean(points)?;
    Ok(kmeanspp_with(&dist, k, &mut rng::seeded(seed)))
}

/// The first center is uniform; each later one is drawn with probability
/// proportional to its squared distance to the nearest chosen center. If
/// every remaining weight is zero the draw is uniform over unchosen points.
pub fn kmeanspp_with(dist: &DistanceMatrix, k: usize, rng: &mut Rng) -> Vec<usize> {
    let n = dist.len();
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut weight: Vec<f64> = (0..n).map(|i| dist.get(i, first).powi(2)).collect();

    while chosen.len() < k {
        let total: f64 = weight.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in weight.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total weight")
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        taken[next] = true;
        for (i, w) in weight.iter_mut().enumerate() {
            *w = w.min(dist.get(i, next).powi(2));
        }
        weight[next] = 0.0;
    }
    chosen
}

/// Output of a PAM run, including the cost after every accepted swap.
#[derive(Debug, Clone)]
pub struct PamOutcome {
    pub clustering: ClusteringResult,
    /// Cost at initialization followed by the cost after each swap round.
    pub cost_trace: Vec<f64>,
}

pub fn pam_cluster(points: ArrayView2<'_, f64>, k: usize, seed: u64) -> Result<ClusteringResult> {
    check_k(points.nrows(), k)?;
    let dist = DistanceMatrix::euclidean(points)?;
    Ok(pam_with_distances(&dist, k, seed)?.clustering)
}

struct Nearest {
    slot: Vec<usize>,
    first: Vec<f64>,
    second: Vec<f64>,
}

fn nearest_two(dist: &DistanceMatrix, medoids: &[usize]) -> Nearest {
    let n = dist.len();
    let mut slot = vec![0; n];
    let mut first = vec![f64::INFINITY; n];
    let mut second = vec![f64::INFINITY; n];
    for o in 0..n {
        for (s, &m) in medoids.iter().enumerate() {
            let d = dist.get(o, m);
            if d < first[o] {
                second[o] = first[o];
                first[o] = d;
                slot[o] = s;
            } else if d < second[o] {
                second[o] = d;
            }
        }
    }
    Nearest { slot, first, second }
}

/// PAM from a k-means++ start. Each round evaluates every (medoid,
/// non-medoid) swap and applies the single best one while it lowers the
/// total cost.
pub fn pam_with_distances(dist: &DistanceMatrix, k: usize, seed: u64) -> Result<PamOutcome> {
    let n = dist.len();
    check_k(n, k)?;
    let mut medoids = kmeanspp_with(dist, k, &mut rng::seeded(seed));
    let mut is_medoid = vec![false; n];
    for &m in &medoids {
        is_medoid[m] = true;
    }

    let mut near = nearest_two(dist, &medoids);
    let mut cost: f64 = near.first.iter().sum();
    let mut cost_trace = vec![cost];

    for _ in 0..MAX_SWAP_ROUNDS {
        // For candidate h the change from swapping out slot s is
        // shared(h) + removal(h)[s]; see the loop body.
        let best = (0..n)
            .into_par_iter()
            .filter(|&h| !is_medoid[h])
            .map(|h| {
                let mut shared = 0.0;
                let mut removal = vec![0.0; k];
                for o in 0..n {
                    let doh = dist.get(o, h);
                    let dn = near.first[o];
                    if doh < dn {
                        shared += doh - dn;
                    } else {
                        removal[near.slot[o]] += doh.min(near.second[o]) - dn;
                    }
                }
                let (slot, delta) = removal
                    .iter()
                    .enumerate()
                    .map(|(s, r)| (s, shared + r))
                    .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
                (h, slot, delta)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(None, |acc: Option<(usize, usize, f64)>, cur| match acc {
                Some(a) if a.2 <= cur.2 => Some(a),
                _ => Some(cur),
            });

        let Some((h, slot, delta)) = best else { break };
        if delta >= -1e-12 * cost.max(1.0) {
            break;
        }
        is_medoid[medoids[slot]] = false;
        is_medoid[h] = true;
        medoids[slot] = h;
        near = nearest_two(dist, &medoids);
        cost = near.first.iter().sum();
        cost_trace.push(cost);
    }

    let clustering = ClusteringResult::from_medoids(n, &medoids, |i, j| dist.get(i, j));
    Ok(PamOutcome { clustering, cost_trace })
}
