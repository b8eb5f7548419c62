//! Repeated train/test comparison of GB-AFS and the baseline filters at a
//! common subset size.

use gbafs::baselines::{cfs_select, fisher_scores, random_select, relieff_weights, ReliefConfig};
use gbafs::classify::{evaluate, EvalReport, KnnConfig};
use gbafs::dataio::{split_train_test, SplitSpec};
use gbafs::pipeline::select_at_k;
use gbafs::report::{MethodSummary, TimingComparison};
use gbafs::rng::derive_seed;
use gbafs::{Dataset, Error, PipelineConfig, Result};

use crate::Method;

pub const ALL_METHODS: [Method; 6] =
    [Method::Gbafs, Method::Relieff, Method::Fisher, Method::Cfs, Method::Random, Method::All];

#[derive(Debug, Clone)]
pub struct CompareConfig {
    pub pipeline: PipelineConfig,
    pub repetitions: usize,
    pub train_fraction: f64,
    pub knn: KnnConfig,
    pub relief_neighbors: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
}

impl CompareConfig {
    pub fn new(pipeline: PipelineConfig, seed: u64) -> Self {
        Self {
            pipeline,
            repetitions: 10,
            train_fraction: 0.75,
            knn: KnnConfig::default(),
            relief_neighbors: 10,
            seed,
            methods: ALL_METHODS.to_vec(),
        }
    }
}

/// Evaluations of every method on one split.
#[derive(Debug, Clone)]
pub struct Repetition {
    pub split_seed: u64,
    pub results: Vec<(Method, EvalReport)>,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub k: usize,
    pub repetitions: Vec<Repetition>,
}

impl Comparison {
    pub fn reports(&self, method: Method) -> Vec<&EvalReport> {
        self.repetitions
            .iter()
            .filter_map(|r| r.results.iter().find(|(m, _)| *m == method).map(|(_, e)| e))
            .collect()
    }

    pub fn summaries(&self, methods: &[Method]) -> Vec<MethodSummary> {
        methods
            .iter()
            .map(|&m| {
                let reports = self.reports(m);
                let n = reports.len().max(1) as f64;
                let acc: Vec<f64> = reports.iter().map(|e| e.accuracy).collect();
                let f: Vec<f64> = reports.iter().map(|e| e.balanced_f).collect();
                MethodSummary {
                    method: m.to_string(),
                    k: reports.first().map_or(self.k, |e| e.subset.len()),
                    accuracy: acc.iter().sum::<f64>() / n,
                    balanced_f: f.iter().sum::<f64>() / n,
                    predict_seconds: reports.iter().map(|e| e.predict_time).sum::<f64>() / n,
                    per_repetition_accuracy: acc,
                    per_repetition_balanced_f: f,
                }
            })
            .collect()
    }

    /// Total prediction time of the GB-AFS subsets against all features.
    pub fn timing(&self) -> Option<TimingComparison> {
        let subset: f64 = self.reports(Method::Gbafs).iter().map(|e| e.predict_time).sum();
        let all: f64 = self.reports(Method::All).iter().map(|e| e.predict_time).sum();
        (subset > 0.0 && all > 0.0).then(|| TimingComparison {
            subset_seconds: subset,
            all_features_seconds: all,
            saved_fraction: 1.0 - subset / all,
        })
    }
}

/// ReliefF neighbors that every class of `d` can supply.
fn relief_neighbors(d: &Dataset, wanted: usize) -> Result<usize> {
    let smallest = d.class_counts().into_iter().filter(|&c| c > 0).min().unwrap_or(0);
    let k = wanted.min(smallest.saturating_sub(1));
    if k == 0 {
        return Err(Error::InvalidDataset("a class has a single training row; ReliefF cannot run".into()));
    }
    if k < wanted {
        log::warn!("ReliefF neighbors lowered from {wanted} to {k} for the smallest class");
    }
    Ok(k)
}

pub fn subset_for(method: Method, train: &Dataset, k: usize, cfg: &CompareConfig, rep: u64) -> Result<Vec<usize>> {
    match method {
        Method::Gbafs => {
            let pipeline = PipelineConfig { seed: derive_seed(cfg.seed, &[1, rep]), ..cfg.pipeline.clone() };
            Ok(select_at_k(train, &pipeline, k)?.selected_features)
        }
        Method::Relieff => {
            let relief = ReliefConfig { neighbors: relief_neighbors(train, cfg.relief_neighbors)?, ..Default::default() };
            relieff_weights(train, &relief)?.top(k)
        }
        Method::Fisher => fisher_scores(train).top(k),
        Method::Cfs => cfs_select(train, k),
        Method::Random => random_select(train.n_features(), k, derive_seed(cfg.seed, &[2, rep])),
        Method::All => Ok((0..train.n_features()).collect()),
    }
}

/// Runs every configured method on `cfg.repetitions` seeded splits.
pub fn compare(data: &Dataset, k: usize, cfg: &CompareConfig) -> Result<Comparison> {
    if cfg.repetitions == 0 {
        return Err(Error::InvalidParameter("at least one repetition is needed".into()));
    }
    let mut repetitions = Vec::with_capacity(cfg.repetitions);
    for rep in 0..cfg.repetitions as u64 {
        let split_seed = derive_seed(cfg.seed, &[0, rep]);
        let spec = SplitSpec { train_fraction: cfg.train_fraction, fold_count: cfg.pipeline.fold_count, seed: split_seed };
        let (train, test) = split_train_test(data, &spec)?;
        let mut results = Vec::with_capacity(cfg.methods.len());
        for &method in &cfg.methods {
            let subset = subset_for(method, &train, k, cfg, rep)?;
            results.push((method, evaluate(&train, &test, &subset, &cfg.knn)?));
        }
        log::info!("repetition {rep} done");
        repetitions.push(Repetition { split_seed, results });
    }
    Ok(Comparison { k, repetitions })
}
