//! Exact (quadratic) t-SNE.
//!
//! The feature space has at most a few hundred points, so the full `M x M`
//! affinity matrices are used directly; there is no tree approximation.

use ndarray::{Array2, ArrayView2, Axis};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::separability::SeparabilityMatrix;
use crate::{Error, Result};

/// Smallest affinity allowed into a logarithm.
pub const AFFINITY_FLOOR: f64 = 1e-12;
/// Tolerance on the achieved perplexity of each conditional row.
pub const PERPLEXITY_TOLERANCE: f64 = 1e-5;
const MAX_BISECTION_STEPS: usize = 50;
const MAX_BRACKET_STEPS: usize = 200;
const MIN_GAIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub output_dim: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub momentum_initial: f64,
    pub momentum_final: f64,
    pub momentum_switch_iter: usize,
    /// Variance of the isotropic Gaussian the initial points are drawn from.
    pub init_variance: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            output_dim: 2,
            learning_rate: 200.0,
            early_exaggeration: 4.0,
            exaggeration_iters: 100,
            momentum_initial: 0.5,
            momentum_final: 0.8,
            momentum_switch_iter: 250,
            init_variance: 1e-4,
            seed: 0,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n_points: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if n_points < 3 {
            return bad(format!("t-SNE needs at least 3 points, got {n_points}"));
        }
        if !(self.perplexity >= 1.0 && self.perplexity < n_points as f64) {
            return bad(format!(
                "perplexity {} must lie in [1, {})",
                self.perplexity, n_points
            ));
        }
        if self.output_dim == 0 {
            return bad("output dimension must be at least 1".into());
        }
        if self.iterations == 0 {
            return bad("iterations must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.early_exaggeration > 0.0 && self.init_variance > 0.0) {
            return bad("learning rate, exaggeration and init variance must be positive".into());
        }
        for m in [self.momentum_initial, self.momentum_final] {
            if !(0.0..1.0).contains(&m) {
                return bad(format!("momentum {m} outside [0, 1)"));
            }
        }
        Ok(())
    }

    /// Perplexity clamped to what `n_points` can support.
    pub fn effective_perplexity(&self, n_points: usize) -> f64 {
        let cap = (n_points.saturating_sub(1)) as f64;
        let p = self.perplexity.min((cap - 1.0).max(1.0));
        if p < self.perplexity {
            log::warn!(
                "perplexity {} too large for {n_points} points, using {p}",
                self.perplexity
            );
        }
        p
    }
}

/// Low-dimensional coordinates, one row per embedded point.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    coords: Array2<f64>,
}

impl Embedding {
    pub fn new(coords: Array2<f64>) -> Result<Self> {
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("embedding has non-finite coordinates".into()));
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &Array2<f64> {
        &self.coords
    }

    pub fn n_points(&self) -> usize {
        self.coords.nrows()
    }
}

/// Result of the per-row bandwidth search.
#[derive(Debug, Clone)]
pub struct ConditionalAffinities {
    /// Row `i` holds `p_{j|i}`; rows sum to one, the diagonal is zero.
    pub matrix: Array2<f64>,
    /// Gaussian precision `1 / (2 sigma_i^2)` chosen for each row.
    pub precision: Vec<f64>,
    /// `2^H(P_i)` actually reached for each row.
    pub achieved_perplexity: Vec<f64>,
    /// Rows whose target perplexity could not be matched; they keep the
    /// closest precision found.
    pub unconverged: Vec<usize>,
}

pub fn squared_distances(points: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = points.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let s: f64 = points
                .row(i)
                .iter()
                .zip(points.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[[i, j]] = s;
            d[[j, i]] = s;
        }
    }
    d
}

/// Entropy (nats) and probabilities of one row at a given precision.
/// `shifted` holds the row's squared distances minus their minimum.
fn row_entropy(shifted: &[f64], precision: f64, probs: &mut [f64]) -> f64 {
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (p, &d) in probs.iter_mut().zip(shifted) {
        *p = (-precision * d).exp();
        sum += *p;
        weighted += d * *p;
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
    sum.ln() + precision * weighted / sum
}

/// Gaussian conditional affinities `p_{j|i}`, with each row's bandwidth
/// bisected until its perplexity matches the target.
pub fn conditional_affinities(
    points: ArrayView2<'_, f64>,
    perplexity: f64,
) -> Result<ConditionalAffinities> {
    let n = points.nrows();
    if n < 2 {
        return Err(Error::InvalidParameter("need at least 2 points".into()));
    }
    if !(perplexity >= 1.0 && perplexity <= (n - 1) as f64) {
        return Err(Error::InvalidParameter(format!(
            "perplexity {perplexity} outside [1, {}]",
            n - 1
        )));
    }
    let dist = squared_distances(points);
    if let Some(row) = dist.rows().into_iter().position(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::Numerical(format!("non-finite distance in row {row}")));
    }

    let rows: Vec<(Vec<f64>, f64, f64, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let others: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist[[i, j]]).collect();
            let min = others.iter().copied().fold(f64::INFINITY, f64::min);
            let shifted: Vec<f64> = others.iter().map(|d| d - min).collect();
            let (probs, precision, achieved, ok) = search_precision(&shifted, perplexity);
            let mut full = Vec::with_capacity(n);
            full.extend_from_slice(&probs[..i]);
            full.push(0.0);
            full.extend_from_slice(&probs[i..]);
            (full, precision, achieved, ok)
        })
        .collect();

    let mut matrix = Array2::zeros((n, n));
    let mut precision = Vec::with_capacity(n);
    let mut achieved_perplexity = Vec::with_capacity(n);
    let mut unconverged = Vec::new();
    for (i, (row, beta, achieved, ok)) in rows.into_iter().enumerate() {
        matrix.row_mut(i).assign(&ndarray::Array1::from(row));
        precision.push(beta);
        achieved_perplexity.push(achieved);
        if !ok {
            log::warn!(
                "row {i}: perplexity {perplexity} unreachable, using {achieved:.6}"
            );
            unconverged.push(i);
        }
    }
    Ok(ConditionalAffinities { matrix, precision, achieved_perplexity, unconverged })
}

fn search_precision(shifted: &[f64], perplexity: f64) -> (Vec<f64>, f64, f64, bool) {
    let mut probs = vec![0.0; shifted.len()];
    let mut beta = 1.0;
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    let mut best = (f64::INFINITY, beta);
    let mut bracket_steps = 0;
    let mut bisect_steps = 0;
    loop {
        let achieved = row_entropy(shifted, beta, &mut probs).exp();
        let err = achieved - perplexity;
        if err.abs() < best.0 {
            best = (err.abs(), beta);
        }
        if err.abs() < PERPLEXITY_TOLERANCE {
            return (probs, beta, achieved, true);
        }
        if err > 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        let bracketed = lo > 0.0 && hi.is_finite();
        if bracketed {
            bisect_steps += 1;
            if bisect_steps > MAX_BISECTION_STEPS {
                break;
            }
            beta = 0.5 * (lo + hi);
        } else {
            bracket_steps += 1;
            if bracket_steps > MAX_BRACKET_STEPS {
                break;
            }
            beta = if hi.is_infinite() { beta * 2.0 } else { beta / 2.0 };
        }
    }
    let achieved = row_entropy(shifted, best.1, &mut probs).exp();
    let ok = (achieved - perplexity).abs() < PERPLEXITY_TOLERANCE;
    (probs, best.1, achieved, ok)
}

/// Raises off-diagonal entries below the floor and renormalizes, leaving
/// the matrix untouched when nothing is below the floor.
fn apply_floor(m: &mut Array2<f64>) {
    let n = m.nrows();
    let mut floored = false;
    for i in 0..n {
        for j in 0..n {
            if i != j && m[[i, j]] < AFFINITY_FLOOR {
                m[[i, j]] = AFFINITY_FLOOR;
                floored = true;
            }
        }
    }
    if floored {
        let total = ordered_sum(m);
        m.mapv_inplace(|v| v / total);
    }
}

fn ordered_sum(m: &Array2<f64>) -> f64 {
    m.rows().into_iter().map(|r| r.sum()).sum()
}

/// Joint affinities `p_ij = (p_{j|i} + p_{i|j}) / 2M`.
pub fn symmetrize_affinities(conditional: &Array2<f64>) -> Array2<f64> {
    let n = conditional.nrows();
    let denom = 2.0 * n as f64;
    let mut p = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (conditional[[i, j]] + conditional[[j, i]]) / denom;
            p[[i, j]] = v;
            p[[j, i]] = v;
        }
    }
    apply_floor(&mut p);
    p
}

/// Student-t affinities of the embedded points.
pub fn low_dim_affinities(coords: &Array2<f64>) -> Array2<f64> {
    let mut q = squared_distances(coords.view());
    let n = q.nrows();
    for i in 0..n {
        for j in 0..n {
            q[[i, j]] = if i == j { 0.0 } else { 1.0 / (1.0 + q[[i, j]]) };
        }
    }
    let total = ordered_sum(&q);
    q.mapv_inplace(|v| v / total);
    apply_floor(&mut q);
    q
}

/// `KL(P || Q)` in nats over the off-diagonal entries.
pub fn kl_divergence(p: &Array2<f64>, q: &Array2<f64>) -> f64 {
    let n = p.nrows();
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let pij = p[[i, j]].max(AFFINITY_FLOOR);
            let qij = q[[i, j]].max(AFFINITY_FLOOR);
            kl += pij * (pij / qij).ln();
        }
    }
    kl
}

/// Gradient of `KL(exaggeration * P || Q(coords))` with respect to the
/// coordinates: `4 sum_j (p_ij - q_ij)(y_i - y_j) / (1 + |y_i - y_j|^2)`.
pub fn kl_gradient(p: &Array2<f64>, coords: &Array2<f64>, exaggeration: f64) -> Array2<f64> {
    let (n, dim) = coords.dim();
    let mut kernel = squared_distances(coords.view());
    kernel.map_inplace(|d| *d = 1.0 / (1.0 + *d));
    for i in 0..n {
        kernel[[i, i]] = 0.0;
    }
    let total = ordered_sum(&kernel);

    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut g = vec![0.0; dim];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let k = kernel[[i, j]];
                let coeff = (exaggeration * p[[i, j]] - k / total) * k;
                for (d, gd) in g.iter_mut().enumerate() {
                    *gd += coeff * (coords[[i, d]] - coords[[j, d]]);
                }
            }
            g.iter().map(|v| 4.0 * v).collect()
        })
        .collect();
    let mut grad = Array2::zeros((n, dim));
    for (i, row) in rows.into_iter().enumerate() {
        grad.row_mut(i).assign(&ndarray::Array1::from(row));
    }
    grad
}

/// An embedding together with the objective before and after optimization.
#[derive(Debug, Clone)]
pub struct TsneRun {
    pub embedding: Embedding,
    pub initial_kl: f64,
    pub final_kl: f64,
    pub unconverged_rows: Vec<usize>,
}

/// Embeds the rows of the separability matrix.
pub fn embed(z: &SeparabilityMatrix, cfg: &TsneConfig) -> Result<Embedding> {
    Ok(embed_points(z.matrix().view(), cfg)?.embedding)
}

pub fn random_init(n: usize, cfg: &TsneConfig) -> Array2<f64> {
    let mut rng = rng::seeded(cfg.seed);
    let normal = Normal::new(0.0, cfg.init_variance.sqrt()).expect("positive variance");
    Array2::from_shape_simple_fn((n, cfg.output_dim), || normal.sample(&mut rng))
}

pub fn embed_points(points: ArrayView2<'_, f64>, cfg: &TsneConfig) -> Result<TsneRun> {
    let init = random_init(points.nrows(), cfg);
    embed_from(points, cfg, init)
}

/// Runs the optimizer from the given initial coordinates.
pub fn embed_from(points: ArrayView2<'_, f64>, cfg: &TsneConfig, init: Array2<f64>) -> Result<TsneRun> {
    let n = points.nrows();
    cfg.validate(n)?;
    if init.dim() != (n, cfg.output_dim) {
        return Err(Error::InvalidParameter(format!(
            "initial coordinates are {:?}, expected ({n}, {})",
            init.dim(),
            cfg.output_dim
        )));
    }
    let cond = conditional_affinities(points, cfg.perplexity)?;
    let p = symmetrize_affinities(&cond.matrix);

    let mut y = init;
    let initial_kl = kl_divergence(&p, &low_dim_affinities(&y));
    let mut update = Array2::<f64>::zeros(y.dim());
    let mut gains = Array2::<f64>::ones(y.dim());

    for iter in 0..cfg.iterations {
        let exaggeration = if iter < cfg.exaggeration_iters { cfg.early_exaggeration } else { 1.0 };
        let momentum =
            if iter < cfg.momentum_switch_iter { cfg.momentum_initial } else { cfg.momentum_final };
        let grad = kl_gradient(&p, &y, exaggeration);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical(format!("non-finite t-SNE gradient at iteration {iter}")));
        }
        ndarray::Zip::from(&mut gains).and(&grad).and(&update).for_each(|gain, &g, &u| {
            *gain = if (g > 0.0) != (u > 0.0) { *gain + 0.2 } else { *gain * 0.8 };
            if *gain < MIN_GAIN {
                *gain = MIN_GAIN;
            }
        });
        ndarray::Zip::from(&mut update).and(&gains).and(&grad).for_each(|u, &gain, &g| {
            *u = momentum * *u - cfg.learning_rate * gain * g;
        });
        y += &update;
        let mean = y.mean_axis(Axis(0)).expect("non-empty");
        y -= &mean;
    }

    let final_kl = kl_divergence(&p, &low_dim_affinities(&y));
    Ok(TsneRun { embedding: Embedding::new(y)?, initial_kl, final_kl, unconverged_rows: cond.unconverged })
}
