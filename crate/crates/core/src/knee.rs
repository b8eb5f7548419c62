//! Kneedle knee detection on discrete curves.
//!
//! The curve is normalized to the unit square and oriented so that it is
//! increasing and concave. Knees are then local maxima of the difference
//! `y - x` between the curve and the chord joining its endpoints; a local
//! maximum is accepted once the difference drops below a threshold before
//! the curve rises to the next maximum.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Moving-average window; 0 or 1 disables smoothing.
    pub smoothing_window: usize,
    pub sensitivity: f64,
}

impl Curve {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        Self { xs, ys, smoothing_window: 0, sensitivity: 1.0 }
    }

    pub fn with_sensitivity(mut self, s: f64) -> Self {
        self.sensitivity = s;
        self
    }

    pub fn with_smoothing(mut self, window: usize) -> Self {
        self.smoothing_window = window;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.xs.len() != self.ys.len() {
            return Err(Error::InvalidParameter(format!(
                "{} xs for {} ys",
                self.xs.len(),
                self.ys.len()
            )));
        }
        if self.xs.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "a knee needs at least 3 points, got {}",
                self.xs.len()
            )));
        }
        if self.xs.iter().chain(&self.ys).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("curve has non-finite values".into()));
        }
        if self.xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("xs must be strictly increasing".into()));
        }
        if !(self.sensitivity > 0.0) {
            return Err(Error::InvalidParameter("sensitivity must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Concave,
    Convex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Knee {
    pub x: f64,
    pub index: usize,
}

/// The curve after normalization and orientation, indexed like the input.
#[derive(Debug, Clone)]
pub struct DifferenceCurve {
    /// `y - x` in the oriented unit square, one entry per input point.
    pub values: Vec<f64>,
    pub direction: Direction,
    pub shape: Shape,
    mean_gap: f64,
    /// Input indices in the order the oriented curve visits them.
    order: Vec<usize>,
}

fn moving_average(ys: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 {
        return ys.to_vec();
    }
    let half = window / 2;
    (0..ys.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + window - half).min(ys.len());
            ys[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

fn unit_scale(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    v.iter().map(|x| if range > 0.0 { (x - lo) / range } else { 0.0 }).collect()
}

/// Smooths, normalizes and orients the curve, returning its chord
/// difference.
pub fn difference_curve(curve: &Curve) -> Result<DifferenceCurve> {
    curve.validate()?;
    let n = curve.xs.len();
    let x = unit_scale(&curve.xs);
    let y = unit_scale(&moving_average(&curve.ys, curve.smoothing_window));

    let direction = if y[n - 1] >= y[0] { Direction::Increasing } else { Direction::Decreasing };
    let chord = |i: usize| match direction {
        Direction::Increasing => y[0] + (y[n - 1] - y[0]) * x[i],
        Direction::Decreasing => y[0] - (y[0] - y[n - 1]) * x[i],
    };
    let residual = (0..n).map(|i| y[i] - chord(i)).sum::<f64>() / n as f64;
    let shape = if residual > 0.0 { Shape::Concave } else { Shape::Convex };

    // Map every orientation onto increasing-concave. Reversed cases walk
    // the input from the end and mirror x.
    let (reversed, flip_y) = match (direction, shape) {
        (Direction::Increasing, Shape::Concave) => (false, false),
        (Direction::Decreasing, Shape::Convex) => (false, true),
        (Direction::Decreasing, Shape::Concave) => (true, false),
        (Direction::Increasing, Shape::Convex) => (true, true),
    };
    let order: Vec<usize> = if reversed { (0..n).rev().collect() } else { (0..n).collect() };
    let mut values = vec![0.0; n];
    for &i in &order {
        let xo = if reversed { 1.0 - x[i] } else { x[i] };
        let yo = if flip_y { 1.0 - y[i] } else { y[i] };
        values[i] = yo - xo;
    }
    let mean_gap = 1.0 / (n - 1) as f64 * (x[n - 1] - x[0]);
    Ok(DifferenceCurve { values, direction, shape, mean_gap, order })
}

/// First knee of the curve, or `None` when no local maximum of the chord
/// difference is followed by a sufficient drop.
pub fn kneedle(curve: &Curve) -> Result<Option<Knee>> {
    let diff = difference_curve(curve)?;
    let d: Vec<f64> = diff.order.iter().map(|&i| diff.values[i]).collect();
    let n = d.len();
    let maxima: Vec<usize> =
        (1..n - 1).filter(|&i| d[i] > d[i - 1] && d[i] >= d[i + 1]).collect();
    let step = curve.sensitivity * diff.mean_gap;

    for (m, &i) in maxima.iter().enumerate() {
        let threshold = d[i] - step;
        let stop = maxima.get(m + 1).copied().unwrap_or(n - 1);
        if ((i + 1)..=stop).any(|j| d[j] < threshold) {
            let index = diff.order[i];
            return Ok(Some(Knee { x: curve.xs[index], index }));
        }
    }
    Ok(None)
}

/// Point with the largest chord difference; the first one on ties.
pub fn max_difference_point(curve: &Curve) -> Result<Knee> {
    let diff = difference_curve(curve)?;
    let mut best = diff.order[0];
    for &i in &diff.order {
        if diff.values[i] > diff.values[best] {
            best = i;
        }
    }
    Ok(Knee { x: curve.xs[best], index: best })
}
