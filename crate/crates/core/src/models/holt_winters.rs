//! Holt-Winters smoothing of the log series with additive trend and
//! multiplicative weekly season:
//!
//! ```text
//! l_t = a y_t / s_{t-7} + (1 - a)(l_{t-1} + b_{t-1})
//! b_t = c (l_t - l_{t-1}) + (1 - c) b_{t-1}
//! s_t = g y_t / l_t + (1 - g) s_{t-7}
//! ```
//!
//! States start from the first two weeks; the constants minimize the
//! in-sample one-step SSE.

use super::{log_counts, FitOptions, FittedModel, ModelId, ModelSpec, Params, RawForecast};
use crate::error::{Error, Result};
use crate::optim::{minimize_multistart, Bounds};
use crate::series::ArrivalSeries;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const INIT: usize = 14;

#[derive(Debug, Clone)]
struct Run {
    errors: Vec<f64>,
    level: f64,
    trend: f64,
    /// Seasonal factors of the last seven days, oldest first.
    season: [f64; 7],
}

/// Initial level and seasonal factors from the first two weeks. The factors
/// are the weekday averages normalised to product one and the level is
/// their geometric mean.
fn initial_states(y: &[f64]) -> Result<(f64, [f64; 7])> {
    let mut m = [0.0; 7];
    for (i, v) in m.iter_mut().enumerate() {
        *v = 0.5 * (y[i] + y[i + 7]);
        if *v <= 0.0 {
            return Err(Error::Domain("nonpositive value in multiplicative decomposition".into()));
        }
    }
    let g = (m.iter().map(|v| v.ln()).sum::<f64>() / 7.0).exp();
    Ok((g, m.map(|v| v / g)))
}

fn run(y: &[f64], a: f64, c: f64, g: f64) -> Result<Run> {
    if y.len() <= INIT {
        return Err(Error::Estimation("Holt-Winters needs more than two weeks".into()));
    }
    let (mut level, mut season) = initial_states(y)?;
    let mut trend = 0.0;
    let mut errors = Vec::with_capacity(y.len() - INIT);
    for &v in &y[INIT..] {
        let s_old = season[0];
        errors.push(v - (level + trend) * s_old);
        let new_level = a * v / s_old + (1.0 - a) * (level + trend);
        if new_level <= 0.0 || !new_level.is_finite() {
            return Err(Error::Domain("nonpositive level in multiplicative decomposition".into()));
        }
        trend = c * (new_level - level) + (1.0 - c) * trend;
        level = new_level;
        season.rotate_left(1);
        season[6] = g * v / level + (1.0 - g) * s_old;
    }
    Ok(Run { errors, level, trend, season })
}

/// In-sample one-step SSE at smoothing constants `(a, c, g)`.
pub fn holt_winters_sse(window: &ArrivalSeries, a: f64, c: f64, g: f64) -> Result<f64> {
    let y = log_counts(window)?;
    Ok(run(&y, a, c, g)?.errors.iter().map(|e| e * e).sum())
}

fn build(window: &ArrivalSeries, y: &[f64], consts: [f64; 3], sigma2: Option<f64>) -> Result<FittedModel> {
    let r = run(y, consts[0], consts[1], consts[2])?;
    let n = r.errors.len() as f64;
    let ss: f64 = r.errors.iter().map(|e| e * e).sum();
    let s2 = sigma2.unwrap_or((ss / n).max(1e-300));
    let ll = -0.5 * n * (LN_2PI + s2.ln()) - ss / (2.0 * s2);
    let mut params = Params::from_pairs([("alpha", consts[0]), ("beta", consts[1]), ("gamma", consts[2])]);
    params.push("sigma2", s2);
    Ok(FittedModel::new(ModelSpec::default_for(ModelId::M13), params, ll, r.errors.len(), 4, r.errors, None, window))
}

pub fn fit_holt_winters(window: &ArrivalSeries, opts: &FitOptions) -> Result<FittedModel> {
    let y = log_counts(window)?;
    let names: Vec<String> = ["alpha", "beta", "gamma"].map(String::from).to_vec();
    let x0 = opts.start_from(&names, vec![0.3, 0.05, 0.2]);
    let sse = |x: &[f64]| run(&y, x[0], x[1], x[2]).map(|r| r.errors.iter().map(|e| e * e).sum()).unwrap_or(f64::INFINITY);
    let bounds = Bounds { lower: vec![0.0; 3], upper: vec![1.0; 3] };
    let r = minimize_multistart(&sse, &x0, &bounds, &opts.optim());
    if !r.fx.is_finite() {
        return Err(Error::Estimation("no smoothing constants keep the level positive".into()));
    }
    build(window, &y, [r.x[0], r.x[1], r.x[2]], None)
}

fn consts(fitted: &FittedModel) -> [f64; 3] {
    ["alpha", "beta", "gamma"].map(|k| fitted.param(k).unwrap_or(0.0))
}

pub(crate) fn refilter(fitted: &FittedModel, window: &ArrivalSeries) -> Result<FittedModel> {
    let y = log_counts(window)?;
    build(window, &y, consts(fitted), fitted.param("sigma2"))
}

/// Point forecasts `(l_T + h b_T) s`; the variance uses the additive-model
/// error weights `a(1 + j c) + g 1{7 | j}` as an approximation.
pub(crate) fn forecast(fitted: &FittedModel, window: &ArrivalSeries, h_max: usize) -> Result<Vec<RawForecast>> {
    let [a, c, g] = consts(fitted);
    let y = log_counts(window)?;
    let r = run(&y, a, c, g)?;
    let s2 = fitted.residual_variance();
    let mut acc = 1.0;
    let mut out = Vec::with_capacity(h_max);
    for h in 1..=h_max {
        let point = (r.level + h as f64 * r.trend) * r.season[(h - 1) % 7];
        out.push(RawForecast::log(point, Some(s2 * acc)));
        let j = h as f64;
        let w = a * (1.0 + j * c) + if h % 7 == 0 { g } else { 0.0 };
        acc += w * w;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn series(counts: Vec<u64>) -> ArrivalSeries {
        ArrivalSeries::from_counts(NaiveDate::from_ymd_opt(2020, 3, 2).unwrap(), counts, Default::default()).unwrap()
    }

    #[test]
    fn periodic_series_is_a_fixed_point() {
        let pattern = [900u64, 850, 800, 780, 700, 300, 150];
        let w = series((0..84).map(|t| pattern[t % 7]).collect());
        for consts in [[0.2, 0.1, 0.3], [0.9, 0.5, 0.0], [0.0, 0.0, 1.0]] {
            let y = log_counts(&w).unwrap();
            let r = run(&y, consts[0], consts[1], consts[2]).unwrap();
            assert!(r.errors.iter().all(|e| e.abs() < 1e-8));
        }
    }

    #[test]
    fn constant_series_states() {
        let w = series(vec![500; 40]);
        let y = log_counts(&w).unwrap();
        let r = run(&y, 0.4, 0.2, 0.3).unwrap();
        assert!((r.level - 500f64.ln()).abs() < 1e-12);
        assert!(r.trend.abs() < 1e-12);
        assert!(r.season.iter().all(|s| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn optimizer_agrees_with_grid() {
        let base = crate::series::DgpSpec::weekly(NaiveDate::from_ymd_opt(2020, 1, 6).unwrap(), 7.0);
        let spec = crate::series::DgpSpec { noise_var: 0.004, ar: vec![(1, 0.6)], ..base };
        let w = crate::series::simulate_dgp(&spec, 371, 9).unwrap();
        let fm = fit_holt_winters(&w, &FitOptions::default()).unwrap();
        let opt = holt_winters_sse(&w, fm.param("alpha").unwrap(), fm.param("beta").unwrap(), fm.param("gamma").unwrap()).unwrap();
        let mut grid = f64::INFINITY;
        let steps: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        for &a in &steps {
            for &c in &steps {
                for &g in &steps {
                    if let Ok(v) = holt_winters_sse(&w, a, c, g) {
                        grid = grid.min(v);
                    }
                }
            }
        }
        assert!((opt - grid).abs() <= 0.01 * grid, "optimizer {opt} grid {grid}");
        let f = forecast(&fm, &w, 28).unwrap();
        assert!(f.windows(2).all(|p| p[1].variance.unwrap() >= p[0].variance.unwrap()));
    }
}
