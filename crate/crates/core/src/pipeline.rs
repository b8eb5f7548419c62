//! GB-AFS end to end.
//!
//! 1. Build the JM feature space of the training data and embed it.
//! 2. For every `k` in `[2, k_max]`, cluster the embedded features with
//!    k-medoids and score the clustering with MSS.
//! 3. Repeat over cross-validation folds, average the curves, and take the
//!    knee as `k_min`.
//! 4. Cluster the full training set at `k_min`; the medoids are the
//!    selected features.
//!
//! Fold scores are computed on the validation part of each fold. Because a
//! t-SNE embedding cannot place new data, the validation part is scored in
//! its own raw JM space: the medoid features chosen on the training part
//! keep their identities, every feature is assigned to the nearest of them
//! by Euclidean distance between JM rows, and MSS is taken there. The
//! [`ValidationScorer`] trait isolates that choice.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{make_folds, Dataset, SplitSpec};
use crate::kmedoids::{pam_with_distances, ClusteringResult, DistanceMatrix};
use crate::knee::{kneedle, max_difference_point, Curve};
use crate::rng::derive_seed;
use crate::separability::{build_feature_space, SeparabilityMatrix};
use crate::tsne::{embed_points, Embedding, TsneConfig};
use crate::validity::{mss, mss_with_distance, silhouette, simplified_silhouette};
use crate::{Error, Result};

const FINAL_FIT: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// t-SNE settings; the seed field is replaced by per-run seeds derived
    /// from `seed`.
    pub tsne: TsneConfig,
    pub fold_count: usize,
    /// Largest `k` on the MSS curve; `None` means the number of features.
    pub k_max: Option<usize>,
    pub knee_sensitivity: f64,
    pub knee_smoothing: usize,
    /// Seeded k-medoids runs per `k`; the lowest-cost one is kept.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tsne: TsneConfig::default(),
            fold_count: 5,
            k_max: None,
            knee_sensitivity: 1.0,
            knee_smoothing: 0,
            restarts: 1,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    fn validate(&self) -> Result<()> {
        if self.fold_count < 2 {
            return Err(Error::InvalidParameter(format!("fold count {} below 2", self.fold_count)));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("restarts must be at least 1".into()));
        }
        if !(self.knee_sensitivity > 0.0) {
            return Err(Error::InvalidParameter("knee sensitivity must be positive".into()));
        }
        if let Some(k) = self.k_max {
            if k < 2 {
                return Err(Error::InvalidParameter(format!("k_max {k} below 2")));
            }
        }
        Ok(())
    }

    fn ks(&self, n_features: usize) -> Vec<usize> {
        let hi = self.k_max.unwrap_or(n_features).min(n_features);
        (2..=hi).collect()
    }

    fn tsne_for(&self, n_points: usize, seed: u64) -> TsneConfig {
        let perplexity = self.tsne.effective_perplexity(n_points);
        TsneConfig { perplexity, seed, ..self.tsne.clone() }
    }
}

/// Scores a set of medoid features on a held-out part of the data.
pub trait ValidationScorer: Sync {
    type Prepared: Sync;

    fn prepare(&self, validation: &Dataset) -> Result<Self::Prepared>;

    /// `None` when the index is undefined for this medoid set.
    fn score(&self, prepared: &Self::Prepared, medoids: &[usize]) -> Option<f64>;
}

/// MSS in the validation part's own JM space (see the module docs).
#[derive(Debug, Clone, Copy, Default)]
pub struct RawJmScorer;

impl ValidationScorer for RawJmScorer {
    type Prepared = DistanceMatrix;

    fn prepare(&self, validation: &Dataset) -> Result<DistanceMatrix> {
        let z = build_feature_space(&validation.with_present_classes()?)?;
        DistanceMatrix::euclidean(z.matrix().view())
    }

    fn score(&self, dist: &DistanceMatrix, medoids: &[usize]) -> Option<f64> {
        let clustering = ClusteringResult::from_medoids(dist.len(), medoids, |i, j| dist.get(i, j));
        mss_with_distance(dist.len(), &clustering, |i, j| dist.get(i, j)).aggregate
    }
}

/// Cross-validated MSS values over `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MssCurve {
    pub ks: Vec<usize>,
    /// `fold_values[f][j]` is fold `f`'s score at `ks[j]`.
    pub fold_values: Vec<Vec<Option<f64>>>,
    /// Mean over the folds where the score is defined.
    pub averaged: Vec<Option<f64>>,
}

impl MssCurve {
    pub fn from_folds(ks: Vec<usize>, fold_values: Vec<Vec<Option<f64>>>) -> Self {
        let averaged = (0..ks.len())
            .map(|j| {
                let (sum, n) = fold_values
                    .iter()
                    .filter_map(|f| f[j])
                    .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
                (n > 0).then(|| sum / n as f64)
            })
            .collect();
        Self { ks, fold_values, averaged }
    }

    /// `(k, averaged)` pairs where the average is defined.
    pub fn defined(&self) -> Vec<(usize, f64)> {
        self.ks.iter().zip(&self.averaged).filter_map(|(&k, v)| v.map(|v| (k, v))).collect()
    }
}

/// Embedded feature space of one dataset.
#[derive(Debug, Clone)]
pub struct FeatureEmbedding {
    pub feature_space: SeparabilityMatrix,
    pub embedding: Embedding,
    pub distances: DistanceMatrix,
}

/// JM feature space plus t-SNE embedding of `d`.
pub fn embed_features(d: &Dataset, cfg: &PipelineConfig, seed: u64) -> Result<FeatureEmbedding> {
    let d = d.with_present_classes()?;
    let feature_space = build_feature_space(&d)?;
    let tsne = cfg.tsne_for(feature_space.n_features(), seed);
    let run = embed_points(feature_space.matrix().view(), &tsne)?;
    let distances = DistanceMatrix::euclidean(run.embedding.coords().view())?;
    Ok(FeatureEmbedding { feature_space, embedding: run.embedding, distances })
}

/// Best of `cfg.restarts` seeded PAM runs at `k`.
pub fn cluster_at(
    distances: &DistanceMatrix,
    k: usize,
    cfg: &PipelineConfig,
    seed_path: &[u64],
) -> Result<ClusteringResult> {
    let mut best: Option<ClusteringResult> = None;
    for r in 0..cfg.restarts {
        let mut path = seed_path.to_vec();
        path.extend([k as u64, r as u64]);
        let c = pam_with_distances(distances, k, derive_seed(cfg.seed, &path))?.clustering;
        if best.as_ref().map_or(true, |b| c.cost < b.cost) {
            best = Some(c);
        }
    }
    Ok(best.expect("at least one restart"))
}

pub fn mss_curve_cv(train: &Dataset, cfg: &PipelineConfig) -> Result<MssCurve> {
    mss_curve_cv_with(train, cfg, &RawJmScorer)
}

pub fn mss_curve_cv_with<S: ValidationScorer>(
    train: &Dataset,
    cfg: &PipelineConfig,
    scorer: &S,
) -> Result<MssCurve> {
    cfg.validate()?;
    let ks = cfg.ks(train.n_features());
    if ks.is_empty() {
        return Err(Error::InvalidParameter("no k values to evaluate".into()));
    }
    let split = SplitSpec { train_fraction: 0.75, fold_count: cfg.fold_count, seed: cfg.seed };
    let folds = make_folds(train, &split)?;

    let fold_values = folds
        .par_iter()
        .enumerate()
        .map(|(f, (fit_part, validation))| -> Result<Vec<Option<f64>>> {
            let fitted = embed_features(fit_part, cfg, cfg.seed.wrapping_add(f as u64))?;
            let prepared = scorer.prepare(validation)?;
            ks.par_iter()
                .map(|&k| {
                    let c = cluster_at(&fitted.distances, k, cfg, &[f as u64])?;
                    Ok(scorer.score(&prepared, &c.medoids))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MssCurve::from_folds(ks, fold_values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KneeSource {
    /// Kneedle found a knee.
    Kneedle,
    /// No knee was detected; the point farthest from the chord was used.
    MaxDifference,
    /// Too few defined points for a knee; the best MSS value was used.
    BestScore,
}

#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub k_min: usize,
    /// Medoid feature indices, ascending.
    pub selected_features: Vec<usize>,
    pub selected_names: Vec<String>,
    pub embedding: Embedding,
    pub clustering: ClusteringResult,
    pub curve: MssCurve,
    pub knee_source: KneeSource,
    pub config: PipelineConfig,
}

/// Picks `k_min` from an averaged curve.
pub fn knee_of(curve: &MssCurve, cfg: &PipelineConfig) -> Result<(usize, KneeSource)> {
    let defined = curve.defined();
    if defined.is_empty() {
        return Err(Error::Numerical("MSS is undefined for every k".into()));
    }
    if defined.len() < 3 {
        log::warn!("only {} defined MSS values; using the best one", defined.len());
        let best = defined
            .iter()
            .fold(defined[0], |acc, &cur| if cur.1 > acc.1 { cur } else { acc });
        return Ok((best.0, KneeSource::BestScore));
    }
    let knee_curve = Curve::new(
        defined.iter().map(|&(k, _)| k as f64).collect(),
        defined.iter().map(|&(_, v)| v).collect(),
    )
    .with_sensitivity(cfg.knee_sensitivity)
    .with_smoothing(cfg.knee_smoothing);
    match kneedle(&knee_curve)? {
        Some(knee) => Ok((defined[knee.index].0, KneeSource::Kneedle)),
        None => {
            let p = max_difference_point(&knee_curve)?;
            log::warn!("no knee on the MSS curve; falling back to k = {}", defined[p.index].0);
            Ok((defined[p.index].0, KneeSource::MaxDifference))
        }
    }
}

/// Clusters the full training set's embedded features at `k`.
pub fn final_clustering(fitted: &FeatureEmbedding, k: usize, cfg: &PipelineConfig) -> Result<ClusteringResult> {
    cluster_at(&fitted.distances, k, cfg, &[FINAL_FIT])
}

/// Embeds the full training set with the seed used for the final fit.
pub fn embed_full(train: &Dataset, cfg: &PipelineConfig) -> Result<FeatureEmbedding> {
    embed_features(train, cfg, cfg.seed)
}

pub fn select_features(train: &Dataset, cfg: &PipelineConfig) -> Result<SelectionResult> {
    Ok(select_with_fit(train, cfg)?.0)
}

/// Like [`select_features`], also handing back the full-data embedding so
/// callers can run [`index_sweep`] without embedding twice.
pub fn select_with_fit(train: &Dataset, cfg: &PipelineConfig) -> Result<(SelectionResult, FeatureEmbedding)> {
    let curve = mss_curve_cv(train, cfg)?;
    let (k_min, knee_source) = knee_of(&curve, cfg)?;
    let fitted = embed_full(train, cfg)?;
    let clustering = final_clustering(&fitted, k_min, cfg)?;
    let result = assemble(train, cfg, k_min, knee_source, fitted.embedding.clone(), clustering, curve);
    Ok((result, fitted))
}

/// Final fit at a fixed `k`, skipping the cross-validated curve.
pub fn select_at_k(train: &Dataset, cfg: &PipelineConfig, k: usize) -> Result<SelectionResult> {
    cfg.validate()?;
    if k < 2 || k > train.n_features() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} outside [2, {}]",
            train.n_features()
        )));
    }
    let fitted = embed_full(train, cfg)?;
    let clustering = final_clustering(&fitted, k, cfg)?;
    let curve = MssCurve::from_folds(vec![], vec![]);
    Ok(assemble(train, cfg, k, KneeSource::BestScore, fitted.embedding, clustering, curve))
}

fn assemble(
    train: &Dataset,
    cfg: &PipelineConfig,
    k_min: usize,
    knee_source: KneeSource,
    embedding: Embedding,
    clustering: ClusteringResult,
    curve: MssCurve,
) -> SelectionResult {
    let selected_features = clustering.medoids.clone();
    let selected_names =
        selected_features.iter().map(|&f| train.feature_names()[f].clone()).collect();
    SelectionResult {
        k_min,
        selected_features,
        selected_names,
        embedding,
        clustering,
        curve,
        knee_source,
        config: cfg.clone(),
    }
}

/// Silhouette, SS and MSS of the final-fit clustering at one `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k: usize,
    pub medoids: Vec<usize>,
    pub silhouette: Option<f64>,
    pub simplified_silhouette: Option<f64>,
    pub mss: Option<f64>,
}

/// Clusters the embedded features for each `k` with the final-fit seeds
/// and scores every clustering with all three indices.
pub fn index_sweep(fitted: &FeatureEmbedding, ks: &[usize], cfg: &PipelineConfig) -> Result<Vec<SweepPoint>> {
    let coords: &Array2<f64> = fitted.embedding.coords();
    ks.par_iter()
        .map(|&k| {
            let c = final_clustering(fitted, k, cfg)?;
            Ok(SweepPoint {
                k,
                silhouette: silhouette(coords.view(), &c)?.aggregate,
                simplified_silhouette: simplified_silhouette(coords.view(), &c)?.aggregate,
                mss: mss(coords.view(), &c)?.aggregate,
                medoids: c.medoids,
            })
        })
        .collect()
}
