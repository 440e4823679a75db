//! AR model with time-varying day-of-week effects: each dummy coefficient
//! moves from `d0` to `d0 + d1` along a logistic transition in scaled time,
//! `G(t) = 1 / (1 + exp(-g (t/T - c)))`.
//!
//! Given `(g, c)` the model is linear, so the fit profiles the two
//! transition parameters over OLS.

use nalgebra::{DMatrix, DVector};

use super::{log_counts, FitOptions, FittedModel, ModelSpec, Params, RawForecast};
use crate::error::{Error, Result};
use crate::linalg::ols;
use crate::optim::{minimize, Bounds, OptimOptions};
use crate::series::{weekday_index, ArrivalSeries};

const DAYS: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];
const LN_2PI: f64 = 1.837_877_066_409_345_5;
pub(crate) const GAMMA_MAX: f64 = 100.0;
const GAMMA_MIN: f64 = 0.01;

/// Logistic transition at scaled time `s = t / T`.
pub fn logistic_transition(s: f64, gamma: f64, c: f64) -> f64 {
    1.0 / (1.0 + (-gamma * (s - c)).exp())
}

struct TvdData {
    y: Vec<f64>,
    weekdays: Vec<usize>,
    /// Day offsets from the estimation window's first date.
    t: Vec<f64>,
}

fn prepare(window: &ArrivalSeries, origin: chrono::NaiveDate) -> Result<TvdData> {
    let y = log_counts(window)?;
    let weekdays = window.dates().iter().map(|&d| weekday_index(d)).collect();
    let t = window.dates().iter().map(|&d| (d - origin).num_days() as f64).collect();
    Ok(TvdData { y, weekdays, t })
}

fn regressors(d: &TvdData, idx: usize, ar: &[usize], gamma: f64, c: f64, scale: f64, transition: bool) -> Vec<f64> {
    let k = if transition { 14 } else { 7 };
    let mut r = vec![0.0; k + ar.len()];
    let w = d.weekdays[idx];
    r[w] = 1.0;
    if transition {
        r[7 + w] = logistic_transition(d.t[idx] / scale, gamma, c);
    }
    for (j, &l) in ar.iter().enumerate() {
        r[k + j] = d.y[idx - l];
    }
    r
}

struct Profile {
    coef: Vec<f64>,
    ssr: f64,
    resid: Vec<f64>,
}

fn profile(d: &TvdData, ar: &[usize], gamma: f64, c: f64, scale: f64, transition: bool) -> Result<Profile> {
    let p = ar.iter().copied().max().unwrap_or(0);
    let rows: Vec<Vec<f64>> = (p..d.y.len()).map(|i| regressors(d, i, ar, gamma, c, scale, transition)).collect();
    let k = rows.first().map_or(0, Vec::len);
    let x = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
    let y = DVector::from_iterator(rows.len(), d.y[p..].iter().copied());
    let fit = ols(&x, &y)?;
    Ok(Profile { coef: fit.coefficients.iter().copied().collect(), ssr: fit.ssr, resid: fit.residuals.iter().copied().collect() })
}

fn names(ar: &[usize]) -> Vec<String> {
    let mut v: Vec<String> = DAYS.iter().map(|s| format!("delta0_{s}")).collect();
    v.extend(DAYS.iter().map(|s| format!("delta1_{s}")));
    v.extend(ar.iter().map(|l| format!("ar{l}")));
    v.extend(["gamma", "c", "t_scale"].map(String::from));
    v
}

fn assemble(spec: &ModelSpec, window: &ArrivalSeries, coef: Vec<f64>, gamma: f64, c: f64, scale: f64, resid: Vec<f64>, sigma2: Option<f64>) -> FittedModel {
    let n = resid.len() as f64;
    let ss: f64 = resid.iter().map(|v| v * v).sum();
    let s2 = sigma2.unwrap_or((ss / n).max(1e-300));
    let ll = -0.5 * n * (LN_2PI + s2.ln()) - ss / (2.0 * s2);
    let mut values = coef;
    values.extend([gamma, c, scale]);
    let mut params = Params::new(names(&spec.ar_lags), values);
    params.push("sigma2", s2);
    let k = 14 + spec.ar_lags.len() + 3;
    FittedModel::new(spec.clone(), params, ll, resid.len(), k, resid, None, window)
}

/// Concentrated least-squares fit: a coarse grid over `(g, c)` followed by
/// a bounded local search on `ln SSR`.
pub fn fit_tvd_ar(spec: &ModelSpec, window: &ArrivalSeries, opts: &FitOptions) -> Result<FittedModel> {
    let d = prepare(window, window.start())?;
    let scale = (window.len() - 1).max(1) as f64;
    let ar = &spec.ar_lags;
    let obj = |x: &[f64]| profile(&d, ar, x[0], x[1], scale, true).map(|p| p.ssr.max(1e-300).ln()).unwrap_or(f64::INFINITY);
    let mut best = (f64::INFINITY, [1.0, 0.5]);
    let warm = opts.warm_start.as_ref().and_then(|p| Some([p.get("gamma")?, p.get("c")?]));
    let mut candidates: Vec<[f64; 2]> = Vec::new();
    if let Some(w) = warm {
        candidates.push(w);
    } else {
        for &g in &[0.5, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0] {
            for i in 1..10 {
                candidates.push([g, i as f64 / 10.0]);
            }
        }
    }
    for cand in candidates {
        let v = obj(&cand);
        if v < best.0 {
            best = (v, cand);
        }
    }
    if !best.0.is_finite() {
        return Err(Error::Estimation("transition profile is singular everywhere".into()));
    }
    let bounds = Bounds { lower: vec![GAMMA_MIN, 0.0], upper: vec![GAMMA_MAX, 1.0] };
    let r = minimize(&obj, &best.1, &bounds, &OptimOptions { starts: 1, ..opts.optim() });
    let (gamma, c) = if r.fx <= best.0 { (r.x[0], r.x[1]) } else { (best.1[0], best.1[1]) };
    let p = profile(&d, ar, gamma, c, scale, true)?;
    let mut fm = assemble(spec, window, p.coef, gamma, c, scale, p.resid, None);
    if gamma >= GAMMA_MAX - 1e-6 {
        fm.warnings.push("transition speed capped (near-step change)".into());
    }
    Ok(fm)
}

/// Dummy + AR regression without a transition, i.e. the nested model with
/// all `d1 = 0`.
#[cfg(test)]
fn fit_without_transition(spec: &ModelSpec, window: &ArrivalSeries) -> Result<FittedModel> {
    let d = prepare(window, window.start())?;
    let p = profile(&d, &spec.ar_lags, 1.0, 0.5, 1.0, false)?;
    let mut coef = p.coef[..7].to_vec();
    coef.extend([0.0; 7]);
    coef.extend(&p.coef[7..]);
    Ok(assemble(spec, window, coef, 1.0, 0.5, (window.len() - 1).max(1) as f64, p.resid, None))
}

fn unpack(fitted: &FittedModel) -> (Vec<f64>, f64, f64, f64) {
    let p = &fitted.params;
    let k = 14 + fitted.spec.ar_lags.len();
    (
        p.values()[..k].to_vec(),
        p.get("gamma").unwrap_or(1.0),
        p.get("c").unwrap_or(0.5),
        p.get("t_scale").unwrap_or(1.0),
    )
}

fn residuals_at(d: &TvdData, ar: &[usize], coef: &[f64], gamma: f64, c: f64, scale: f64) -> Vec<f64> {
    let p = ar.iter().copied().max().unwrap_or(0);
    (p..d.y.len())
        .map(|i| {
            let r = regressors(d, i, ar, gamma, c, scale, true);
            d.y[i] - r.iter().zip(coef).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

pub(crate) fn refilter(fitted: &FittedModel, window: &ArrivalSeries) -> Result<FittedModel> {
    let (coef, gamma, c, scale) = unpack(fitted);
    let d = prepare(window, fitted.estimation_window.0)?;
    let resid = residuals_at(&d, &fitted.spec.ar_lags, &coef, gamma, c, scale);
    let mut fm = assemble(&fitted.spec, window, coef, gamma, c, scale, resid, fitted.param("sigma2"));
    fm.estimation_window.0 = fitted.estimation_window.0;
    Ok(fm)
}

pub(crate) fn forecast(fitted: &FittedModel, window: &ArrivalSeries, h_max: usize) -> Result<Vec<RawForecast>> {
    let (coef, gamma, c, scale) = unpack(fitted);
    let ar = &fitted.spec.ar_lags;
    let mut d = prepare(window, fitted.estimation_window.0)?;
    let s2 = fitted.residual_variance();
    let last = d.y.len() - 1;
    let origin = window.date_at(last);
    let phi: Vec<f64> = coef[14..].to_vec();
    let p = ar.iter().copied().max().unwrap_or(0);
    let mut dense = vec![0.0; p];
    for (l, v) in ar.iter().zip(&phi) {
        dense[l - 1] = *v;
    }
    let psi = crate::poly::psi_weights(&dense, &[], h_max);
    let mut out = Vec::with_capacity(h_max);
    for h in 1..=h_max {
        let date = origin + chrono::Duration::days(h as i64);
        d.weekdays.push(weekday_index(date));
        d.t.push(d.t[last] + h as f64);
        d.y.push(0.0);
        let i = d.y.len() - 1;
        let r = regressors(&d, i, ar, gamma, c, scale, true);
        let v = r.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>();
        d.y[i] = v;
        let var = s2 * psi[..h].iter().map(|x| x * x).sum::<f64>();
        out.push(RawForecast::log(v, Some(var)));
    }
    Ok(out)
}
