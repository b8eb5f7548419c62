//! Synthetic datasets with groups of redundant features.
//!
//! Each group is driven by one latent signal whose mean depends on the class;
//! every feature in the group is a noisy copy of that signal. Selecting one
//! feature per group recovers all of the class information, which makes
//! these datasets handy for exercising selection end to end.

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::rng;
use crate::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct RedundantGroups {
    pub n_instances: usize,
    pub n_classes: usize,
    pub groups: usize,
    pub copies: usize,
    /// Standard deviation of the per-copy noise relative to the unit-variance
    /// latent noise.
    pub copy_noise: f64,
    /// Extra features with no class signal, appended after the groups.
    pub noise_features: usize,
    /// Class means of each latent signal are drawn from `[0, separation]`.
    pub separation: f64,
    pub seed: u64,
}

impl Default for RedundantGroups {
    fn default() -> Self {
        Self {
            n_instances: 300,
            n_classes: 4,
            groups: 5,
            copies: 3,
            copy_noise: 0.1,
            noise_features: 2,
            separation: 3.0,
            seed: 0,
        }
    }
}

/// Features are laid out group by group (`g{group}_c{copy}`), then the
/// noise features (`noise{i}`). Labels cycle through the classes.
pub fn redundant_groups(spec: &RedundantGroups) -> Dataset {
    let mut rng = rng::seeded(spec.seed);
    let n = spec.n_instances;
    let m = spec.groups * spec.copies + spec.noise_features;
    let means: Vec<Vec<f64>> = (0..spec.groups)
        .map(|_| (0..spec.n_classes).map(|_| rng.random::<f64>() * spec.separation).collect())
        .collect();
    let labels: Vec<usize> = (0..n).map(|i| i % spec.n_classes).collect();

    let mut x = Array2::zeros((n, m));
    for i in 0..n {
        for (g, class_means) in means.iter().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            let latent = class_means[labels[i]] + z;
            for c in 0..spec.copies {
                let e: f64 = StandardNormal.sample(&mut rng);
                x[[i, g * spec.copies + c]] = latent + spec.copy_noise * e;
            }
        }
        for j in 0..spec.noise_features {
            x[[i, spec.groups * spec.copies + j]] = StandardNormal.sample(&mut rng);
        }
    }
    let mut names = Vec::with_capacity(m);
    for g in 0..spec.groups {
        for c in 0..spec.copies {
            names.push(format!("g{g}_c{c}"));
        }
    }
    names.extend((0..spec.noise_features).map(|j| format!("noise{j}")));
    let class_ids = (0..spec.n_classes).map(|c| format!("class{c}")).collect();
    Dataset::new(x, labels, names, class_ids).expect("generator produces a valid dataset")
}
