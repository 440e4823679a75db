use chrono::{Datelike, NaiveDate};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ols;

/// Natural cubic regression spline with one knot per calendar month.
///
/// Time is measured in days from the first observation. Knots sit on the
/// first day of each month in the sample, the first one clamped to day 0.
/// Beyond the boundary knots the curve is linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineFit {
    pub knot_positions: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub fitted_values: Vec<f64>,
    scale: f64,
}

impl SplineFit {
    /// Spline level at day offset `t` (fractional offsets allowed).
    pub fn evaluate(&self, t: f64) -> f64 {
        natural_basis(t / self.scale, &self.scaled_knots())
            .iter()
            .zip(&self.coefficients)
            .map(|(b, c)| b * c)
            .sum()
    }

    fn scaled_knots(&self) -> Vec<f64> {
        self.knot_positions.iter().map(|k| k / self.scale).collect()
    }

    /// Second derivative at `t`, used to check the natural boundary condition.
    pub fn second_derivative(&self, t: f64) -> f64 {
        let h = 1e-3;
        (self.evaluate(t + h) - 2.0 * self.evaluate(t) + self.evaluate(t - h)) / (h * h)
    }
}

/// Knot offsets: first day of every month covered by `dates`.
pub fn month_knots(dates: &[NaiveDate]) -> Vec<f64> {
    let mut knots = Vec::new();
    let mut last = None;
    for (i, d) in dates.iter().enumerate() {
        let key = (d.year(), d.month());
        if last != Some(key) {
            knots.push(if knots.is_empty() { 0.0 } else { i as f64 });
            last = Some(key);
        }
    }
    knots
}

/// Truncated-power natural spline basis with `knots.len()` functions.
fn natural_basis(x: f64, knots: &[f64]) -> Vec<f64> {
    let k = knots.len();
    let mut b = Vec::with_capacity(k);
    b.push(1.0);
    b.push(x);
    if k > 2 {
        let cube = |v: f64| if v > 0.0 { v * v * v } else { 0.0 };
        let last = knots[k - 1];
        let d = |j: usize| (cube(x - knots[j]) - cube(x - last)) / (last - knots[j]);
        let d_pen = d(k - 2);
        for j in 0..k - 2 {
            b.push(d(j) - d_pen);
        }
    }
    b
}

/// Least-squares natural cubic spline of `y` on time with monthly knots.
pub fn spline_fit(y: &[f64], dates: &[NaiveDate]) -> Result<SplineFit> {
    if y.len() != dates.len() {
        return Err(Error::Alignment("values and dates differ in length".into()));
    }
    let knots = month_knots(dates);
    if knots.len() < 2 {
        return Err(Error::Validation("spline needs a sample spanning at least two calendar months".into()));
    }
    let scale = (y.len().max(2) - 1) as f64;
    let scaled: Vec<f64> = knots.iter().map(|k| k / scale).collect();
    let n = y.len();
    let rows: Vec<Vec<f64>> = (0..n).map(|t| natural_basis(t as f64 / scale, &scaled)).collect();
    let x = DMatrix::from_fn(n, knots.len(), |i, j| rows[i][j]);
    let fit = ols(&x, &DVector::from_column_slice(y))?;
    Ok(SplineFit {
        knot_positions: knots,
        coefficients: fit.coefficients.iter().copied().collect(),
        fitted_values: fit.fitted.iter().copied().collect(),
        scale,
    })
}
