//! Per-feature class separability.
//!
//! Each feature is modelled as a Gaussian per class. The Bhattacharyya
//! distance between two class Gaussians is mapped to the bounded
//! Jeffries–Matusita distance `JM = 2 (1 - exp(-B))`, giving a `C x C`
//! matrix per feature. Flattening those matrices row-major and stacking them
//! yields the `M x C²` feature space that the rest of the pipeline embeds
//! and clusters.

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;

use crate::{Dataset, Error, Result};

/// Lower bound applied to every class variance.
pub const VAR_FLOOR: f64 = 1e-10;

/// Per-feature, per-class Gaussian parameters (`M x C` each).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub mean: Array2<f64>,
    /// Biased (divide by `n_c`) variance, clamped to [`VAR_FLOOR`].
    pub variance: Array2<f64>,
}

impl ClassStats {
    pub fn n_features(&self) -> usize {
        self.mean.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.mean.ncols()
    }
}

pub fn class_stats(d: &Dataset) -> Result<ClassStats> {
    let counts = d.class_counts();
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::EmptyClass(d.class_ids()[c].clone()));
    }
    let (m, c) = (d.n_features(), d.n_classes());
    let x = d.instances();
    let labels = d.labels();

    let mut mean = Array2::<f64>::zeros((m, c));
    for (row, &l) in x.rows().into_iter().zip(labels) {
        for (f, &v) in row.iter().enumerate() {
            mean[[f, l]] += v;
        }
    }
    for f in 0..m {
        for k in 0..c {
            mean[[f, k]] /= counts[k] as f64;
        }
    }

    // Two-pass variance around the class means.
    let mut variance = Array2::<f64>::zeros((m, c));
    for (row, &l) in x.rows().into_iter().zip(labels) {
        for (f, &v) in row.iter().enumerate() {
            let dev = v - mean[[f, l]];
            variance[[f, l]] += dev * dev;
        }
    }
    for f in 0..m {
        for k in 0..c {
            variance[[f, k]] = (variance[[f, k]] / counts[k] as f64).max(VAR_FLOOR);
        }
    }
    Ok(ClassStats { mean, variance })
}

/// Bhattacharyya distance between two univariate Gaussians given by mean
/// and variance.
pub fn bhattacharyya(mean_a: f64, var_a: f64, mean_b: f64, var_b: f64) -> f64 {
    let sum = var_a + var_b;
    let gap = mean_a - mean_b;
    let mahalanobis = gap * gap * 2.0 / sum / 8.0;
    let spread = 0.5 * (sum / (2.0 * (var_a * var_b).sqrt())).ln();
    mahalanobis + spread
}

pub fn jeffries_matusita(b: f64) -> f64 {
    2.0 * -(-b).exp_m1()
}

/// The symmetric `C x C` JM matrix of one feature (zero diagonal).
pub fn jm_matrix(stats: &ClassStats, feature: usize) -> Array2<f64> {
    jm_row(stats, feature)
        .into_shape_with_order((stats.n_classes(), stats.n_classes()))
        .expect("row has C² entries")
}

fn jm_row(stats: &ClassStats, feature: usize) -> ndarray::Array1<f64> {
    let c = stats.n_classes();
    let mean = stats.mean.row(feature);
    let var = stats.variance.row(feature);
    let mut row = ndarray::Array1::zeros(c * c);
    for a in 0..c {
        for b in (a + 1)..c {
            let jm = jeffries_matusita(bhattacharyya(mean[a], var[a], mean[b], var[b]));
            row[a * c + b] = jm;
            row[b * c + a] = jm;
        }
    }
    row
}

/// The `M x C²` feature space: row `i` is feature `i`'s JM matrix flattened
/// row-major, so column `a * C + b` holds the pair `(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparabilityMatrix {
    z: Array2<f64>,
    n_classes: usize,
}

impl SeparabilityMatrix {
    pub fn from_rows(z: Array2<f64>, n_classes: usize) -> Result<Self> {
        if z.ncols() != n_classes * n_classes {
            return Err(Error::InvalidParameter(format!(
                "{} columns is not {n_classes}²",
                z.ncols()
            )));
        }
        Ok(Self { z, n_classes })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.z
    }

    pub fn n_features(&self) -> usize {
        self.z.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, feature: usize) -> ArrayView1<'_, f64> {
        self.z.row(feature)
    }

    /// Column headers `pair_<a>_<b>` using one-based class positions.
    pub fn column_names(&self) -> Vec<String> {
        let c = self.n_classes;
        (0..c * c).map(|j| format!("pair_{}_{}", j / c + 1, j % c + 1)).collect()
    }
}

pub fn build_feature_space(d: &Dataset) -> Result<SeparabilityMatrix> {
    let stats = class_stats(d)?;
    let c = stats.n_classes();
    let rows: Vec<ndarray::Array1<f64>> =
        (0..stats.n_features()).into_par_iter().map(|f| jm_row(&stats, f)).collect();
    let mut z = Array2::zeros((stats.n_features(), c * c));
    for (f, row) in rows.into_iter().enumerate() {
        z.row_mut(f).assign(&row);
    }
    SeparabilityMatrix::from_rows(z, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn stats_from(mean: Vec<f64>, var: Vec<f64>) -> ClassStats {
        let c = mean.len();
        ClassStats {
            mean: Array2::from_shape_vec((1, c), mean).unwrap(),
            variance: Array2::from_shape_vec((1, c), var).unwrap(),
        }
    }

    #[test]
    fn two_point_stats() {
        let x = array![[0.0, 5.0], [2.0, 5.0], [7.0, 1.0]];
        let d = Dataset::from_labeled(x, &["a", "a", "b"], vec!["f".into(), "g".into()]).unwrap();
        let s = class_stats(&d).unwrap();
        assert_eq!(s.mean[[0, 0]], 1.0);
        assert_eq!(s.variance[[0, 0]], 1.0);
        // singleton class and constant feature fall back to the floor
        assert_eq!(s.mean[[0, 1]], 7.0);
        assert_eq!(s.variance[[0, 1]], VAR_FLOOR);
        assert_eq!(s.variance[[1, 0]], VAR_FLOOR);
    }

    #[test]
    fn empty_class_is_an_error() {
        let x = array![[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]];
        let d = Dataset::from_labeled(x, &["a", "b", "a"], vec!["f".into(), "g".into()]).unwrap();
        let sub = d.select_rows(&[0, 2]);
        assert!(matches!(class_stats(&sub), Err(Error::EmptyClass(c)) if c == "b"));
    }

    #[test]
    fn identical_distributions_have_zero_jm() {
        let m = jm_matrix(&stats_from(vec![0.3, 0.3], vec![0.2, 0.2]), 0);
        assert_eq!(m[[0, 1]], 0.0);
    }

    #[test]
    fn unit_gap_unit_variance() {
        // B = (1/8)·1·(2/2) + (1/2)·ln(2/2) = 0.125; JM = 2(1 - e^-0.125)
        let m = jm_matrix(&stats_from(vec![0.0, 1.0], vec![1.0, 1.0]), 0);
        assert!((m[[0, 1]] - 0.235_006_194_830_809_1).abs() < 1e-12);
        assert_eq!(m[[0, 1]], m[[1, 0]]);
        assert_eq!(m[[0, 0]], 0.0);
    }

    #[test]
    fn far_apart_classes_approach_two() {
        let m = jm_matrix(&stats_from(vec![0.0, 1.0], vec![1e-4, 1e-4]), 0);
        assert!(m[[0, 1]] < 2.0 || m[[0, 1]] == 2.0);
        assert!(m[[0, 1]] > 2.0 - 1e-12);
    }

    #[test]
    fn feature_space_layout() {
        let x = array![
            [0.0, 0.5, 0.0],
            [0.1, 0.5, 0.0],
            [0.9, 0.5, 0.1],
            [1.0, 0.5, 0.1],
        ];
        let d = Dataset::from_labeled(x, &["a", "a", "b", "b"], vec!["f".into(), "k".into(), "g".into()])
            .unwrap();
        let z = build_feature_space(&d).unwrap();
        assert_eq!(z.matrix().dim(), (3, 4));
        for f in 0..3 {
            assert_eq!(z.row(f)[0], 0.0);
            assert_eq!(z.row(f)[3], 0.0);
            assert_eq!(z.row(f)[1], z.row(f)[2]);
        }
        // constant feature carries no separability
        assert!(z.row(1).iter().all(|&v| v == 0.0));
        assert!(z.row(0)[1] > 1.9);
        assert_eq!(z.column_names(), ["pair_1_1", "pair_1_2", "pair_2_1", "pair_2_2"]);
    }

    #[test]
    fn duplicate_columns_give_identical_rows() {
        let x = array![[0.0, 0.0, 0.3], [0.2, 0.2, 0.9], [0.7, 0.7, 0.1], [0.8, 0.8, 0.4]];
        let d = Dataset::from_labeled(x, &["a", "a", "b", "b"], vec!["f".into(), "f2".into(), "g".into()])
            .unwrap();
        let z = build_feature_space(&d).unwrap();
        assert_eq!(z.row(0), z.row(1));
    }

    #[test]
    fn jm_increases_with_mean_gap() {
        let mut last = -1.0;
        for step in 0..50 {
            let gap = step as f64 * 0.05;
            let jm = jm_matrix(&stats_from(vec![0.0, gap], vec![0.3, 0.3]), 0)[[0, 1]];
            if step > 0 {
                assert!(jm > last, "gap {gap}: {jm} <= {last}");
            }
            last = jm;
        }
    }

    proptest! {
        #[test]
        fn jm_bounds_and_symmetry(
            means in prop::collection::vec(-5.0f64..5.0, 3),
            vars in prop::collection::vec(1e-6f64..4.0, 3),
        ) {
            let m = jm_matrix(&stats_from(means, vars), 0);
            for a in 0..3 {
                prop_assert_eq!(m[[a, a]], 0.0);
                for b in 0..3 {
                    prop_assert_eq!(m[[a, b]], m[[b, a]]);
                    prop_assert!(m[[a, b]] >= 0.0 && m[[a, b]] <= 2.0);
                }
            }
        }

        #[test]
        fn jm_is_scale_invariant(
            means in prop::collection::vec(-2.0f64..2.0, 2),
            vars in prop::collection::vec(0.01f64..2.0, 2),
            scale in 0.1f64..10.0,
        ) {
            let base = jm_matrix(&stats_from(means.clone(), vars.clone()), 0)[[0, 1]];
            let scaled = jm_matrix(
                &stats_from(
                    means.iter().map(|m| m * scale).collect(),
                    vars.iter().map(|v| v * scale * scale).collect(),
                ),
                0,
            )[[0, 1]];
            prop_assert!((base - scaled).abs() < 1e-10);
        }
    }
}
