//! Periodic AR(2): intercept and both AR coefficients depend on the day of
//! the week. Each weekday equation is estimated by OLS; the innovation
//! variance is pooled.

use nalgebra::{DMatrix, DVector};

use super::{log_counts, FittedModel, ModelId, ModelSpec, Params, RawForecast};
use crate::error::{Error, Result};
use crate::linalg::ols;
use crate::series::{weekday_index, ArrivalSeries};

const DAYS: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];
const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn names() -> Vec<String> {
    DAYS.iter().flat_map(|d| [format!("mu_{d}"), format!("phi1_{d}"), format!("phi2_{d}")]).collect()
}

/// `(mu, phi1, phi2)` for weekday `w`.
fn coefs(theta: &[f64], w: usize) -> (f64, f64, f64) {
    (theta[3 * w], theta[3 * w + 1], theta[3 * w + 2])
}

fn residuals(theta: &[f64], y: &[f64], weekdays: &[usize]) -> Vec<f64> {
    (2..y.len())
        .map(|t| {
            let (m, a, b) = coefs(theta, weekdays[t]);
            y[t] - m - a * y[t - 1] - b * y[t - 2]
        })
        .collect()
}

fn build(window: &ArrivalSeries, theta: Vec<f64>, sigma2: Option<f64>) -> Result<FittedModel> {
    let y = log_counts(window)?;
    let wd: Vec<usize> = window.dates().iter().map(|&d| weekday_index(d)).collect();
    let e = residuals(&theta, &y, &wd);
    let n = e.len() as f64;
    let ss: f64 = e.iter().map(|v| v * v).sum();
    let s2 = sigma2.unwrap_or((ss / n).max(1e-300));
    let ll = -0.5 * n * (LN_2PI + s2.ln()) - ss / (2.0 * s2);
    let mut params = Params::new(names(), theta);
    params.push("sigma2", s2);
    Ok(FittedModel::new(ModelSpec::default_for(ModelId::M6), params, ll, e.len(), 22, e, None, window))
}

/// OLS per weekday equation on log counts `y` with weekdays `wd`.
fn estimate(y: &[f64], wd: &[usize]) -> Result<Vec<f64>> {
    let mut theta = vec![0.0; 21];
    for w in 0..7 {
        let rows: Vec<usize> = (2..y.len()).filter(|&t| wd[t] == w).collect();
        if rows.len() < 4 {
            return Err(Error::Estimation(format!("only {} observations for weekday {}", rows.len(), DAYS[w])));
        }
        let x = DMatrix::from_fn(rows.len(), 3, |i, j| match j {
            0 => 1.0,
            1 => y[rows[i] - 1],
            _ => y[rows[i] - 2],
        });
        let z = DVector::from_iterator(rows.len(), rows.iter().map(|&t| y[t]));
        let fit = ols(&x, &z)?;
        theta[3 * w..3 * w + 3].copy_from_slice(fit.coefficients.as_slice());
    }
    Ok(theta)
}

pub fn fit_par(window: &ArrivalSeries) -> Result<FittedModel> {
    let y = log_counts(window)?;
    let wd: Vec<usize> = window.dates().iter().map(|&d| weekday_index(d)).collect();
    build(window, estimate(&y, &wd)?, None)
}

pub(crate) fn refilter(fitted: &FittedModel, window: &ArrivalSeries) -> Result<FittedModel> {
    build(window, fitted.params.values()[..21].to_vec(), fitted.param("sigma2"))
}

pub(crate) fn forecast(fitted: &FittedModel, window: &ArrivalSeries, h_max: usize) -> Result<Vec<RawForecast>> {
    let theta = &fitted.params.values()[..21];
    let s2 = fitted.residual_variance();
    let y = log_counts(window)?;
    let t = y.len() - 1;
    let origin = window.date_at(t);
    let wd: Vec<usize> = (1..=h_max).map(|h| weekday_index(origin + chrono::Duration::days(h as i64))).collect();
    let mut path = vec![y[t - 1], y[t]];
    // resp[k][j]: response of step k+1 to the innovation at step j+1
    let mut resp = vec![vec![0.0; h_max]; h_max];
    let mut out = Vec::with_capacity(h_max);
    for k in 0..h_max {
        let (m, a, b) = coefs(theta, wd[k]);
        let n = path.len();
        path.push(m + a * path[n - 1] + b * path[n - 2]);
        for j in 0..=k {
            resp[k][j] = if j == k {
                1.0
            } else {
                let r1 = resp[k - 1][j];
                let r2 = if k >= 2 { resp[k - 2][j] } else { 0.0 };
                a * r1 + b * r2
            };
        }
        let var = s2 * resp[k][..=k].iter().map(|r| r * r).sum::<f64>();
        out.push(RawForecast::log(path[n], Some(var)));
    }
    Ok(out)
}
