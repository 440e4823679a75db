//! Multiplicative error model on the ratio `x_t = y_t / yhat_SR,t` of log
//! counts to their weekday means: `x_t = mu_t e_t` with unit-mean errors and
//! `mu_t = omega + alpha x_{t-1} + d_{w(t)}` (Monday is the base day).
//! Estimated by exponential quasi-ML.

use nalgebra::{DMatrix, DVector};

use super::{log_counts, FitOptions, FittedModel, ModelSpec, Params, RawForecast};
use crate::error::{Error, Result};
use crate::optim::{minimize_with_gradient, multistart, Bounds};
use crate::series::{day_dummies, dummy_fit, weekday_index, ArrivalSeries};

const DAYS: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];
const K: usize = 8;

pub(crate) struct MemData {
    pub x: Vec<f64>,
    pub weekdays: Vec<usize>,
    /// Weekday means of the log counts.
    pub sr: [f64; 7],
}

pub(crate) fn prepare(window: &ArrivalSeries) -> Result<MemData> {
    let y = log_counts(window)?;
    let d = day_dummies(window);
    let fit = dummy_fit(&y, &d)?;
    if fit.coefficients.iter().any(|&c| c <= 0.0) {
        return Err(Error::Domain("weekday mean of log counts must be positive".into()));
    }
    let x = y.iter().zip(&fit.fitted).map(|(a, b)| a / b).collect();
    Ok(MemData { x, weekdays: d.weekdays().to_vec(), sr: fit.coefficients })
}

fn names() -> Vec<String> {
    let mut v = vec!["omega".to_string(), "alpha".to_string()];
    v.extend(DAYS[1..].iter().map(|d| format!("d_{d}")));
    v
}

fn regressors(prev: f64, weekday: usize) -> [f64; K] {
    let mut r = [0.0; K];
    r[0] = 1.0;
    r[1] = prev;
    if weekday > 0 {
        r[1 + weekday] = 1.0;
    }
    r
}

fn mu_at(theta: &[f64], prev: f64, weekday: usize) -> f64 {
    regressors(prev, weekday).iter().zip(theta).map(|(a, b)| a * b).sum()
}

/// Mean negative quasi-log-likelihood `sum(ln mu + x/mu) / n`.
pub(crate) fn objective(d: &MemData, theta: &[f64]) -> f64 {
    let mut s = 0.0;
    for t in 1..d.x.len() {
        let m = mu_at(theta, d.x[t - 1], d.weekdays[t]);
        if m <= 0.0 {
            return f64::INFINITY;
        }
        s += m.ln() + d.x[t] / m;
    }
    s / (d.x.len() - 1) as f64
}

/// Gradient of [`objective`]; at the optimum this is the QML first-order
/// condition `sum (x/mu - 1) dmu/dtheta / mu = 0`.
pub(crate) fn gradient(d: &MemData, theta: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; K];
    for t in 1..d.x.len() {
        let r = regressors(d.x[t - 1], d.weekdays[t]);
        let m: f64 = r.iter().zip(theta).map(|(a, b)| a * b).sum();
        let w = (1.0 - d.x[t] / m) / m;
        for k in 0..K {
            g[k] += w * r[k];
        }
    }
    let n = (d.x.len() - 1) as f64;
    g.iter_mut().for_each(|v| *v /= n);
    g
}

fn hessian(d: &MemData, theta: &[f64]) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(K, K);
    for t in 1..d.x.len() {
        let r = regressors(d.x[t - 1], d.weekdays[t]);
        let m: f64 = r.iter().zip(theta).map(|(a, b)| a * b).sum();
        let w = (2.0 * d.x[t] / m - 1.0) / (m * m);
        for i in 0..K {
            for j in 0..K {
                h[(i, j)] += w * r[i] * r[j];
            }
        }
    }
    h / (d.x.len() - 1) as f64
}

/// Newton steps on the quasi-likelihood, accepted only when they improve it.
fn polish(d: &MemData, mut theta: Vec<f64>) -> Vec<f64> {
    let mut f = objective(d, &theta);
    for _ in 0..20 {
        let g = DVector::from_vec(gradient(d, &theta));
        let mut h = hessian(d, &theta);
        // a ridge keeps the step defined when regressors coincide (e.g. constant x)
        let ridge = 1e-12 * h.diagonal().amax().max(1e-300);
        h.iter_mut().step_by(K + 1).for_each(|v| *v += ridge);
        let Some(step) = h.cholesky().map(|c| c.solve(&g)) else { break };
        let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, b)| a - b).collect();
        let fc = objective(d, &cand);
        if !(fc <= f) {
            break;
        }
        theta = cand;
        let done = f - fc < 1e-16;
        f = fc;
        if done {
            break;
        }
    }
    theta
}

fn bounds() -> Bounds {
    Bounds {
        lower: [vec![-10.0, -0.999], vec![-10.0; 6]].concat(),
        upper: [vec![10.0, 0.999], vec![10.0; 6]].concat(),
    }
}

fn qmle(d: &MemData, x0: &[f64], o: &crate::optim::OptimOptions) -> (Vec<f64>, f64, bool) {
    let b = bounds();
    let f = |th: &[f64]| objective(d, th);
    let r = multistart(x0, &b, o, |s| minimize_with_gradient(&f, |th: &[f64], _| gradient(d, th), s, &b, o));
    if !r.fx.is_finite() {
        return (r.x, r.fx, false);
    }
    let th = polish(d, r.x);
    let fx = objective(d, &th);
    (th, fx, r.converged)
}

fn residuals(d: &MemData, theta: &[f64]) -> Vec<f64> {
    (1..d.x.len()).map(|t| d.x[t] / mu_at(theta, d.x[t - 1], d.weekdays[t]) - 1.0).collect()
}

fn build(spec: &ModelSpec, window: &ArrivalSeries, d: &MemData, theta: Vec<f64>) -> FittedModel {
    let n = d.x.len() - 1;
    let ll = -(n as f64) * objective(d, &theta);
    let e = residuals(d, &theta);
    let var_e = e.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let mut params = Params::new(names(), theta);
    params.push("var_eps", var_e);
    FittedModel::new(spec.clone(), params, ll, n, K, e, None, window)
}

pub fn fit_mem(window: &ArrivalSeries, opts: &FitOptions) -> Result<FittedModel> {
    let spec = ModelSpec::default_for(super::ModelId::M11);
    let d = prepare(window)?;
    let x0 = opts.start_from(&names(), {
        let mut v = vec![0.0; K];
        v[0] = 0.5;
        v[1] = 0.5;
        v
    });
    let (theta, fx, converged) = qmle(&d, &x0, &opts.optim());
    if !fx.is_finite() {
        return Err(Error::Estimation("MEM conditional mean is not positive at any start".into()));
    }
    let mut fm = build(&spec, window, &d, theta);
    if !converged {
        fm.warnings.push("MEM optimizer stopped before convergence".into());
    }
    Ok(fm)
}

pub(crate) fn refilter(fitted: &FittedModel, window: &ArrivalSeries) -> Result<FittedModel> {
    let d = prepare(window)?;
    let mut fm = build(&fitted.spec, window, &d, fitted.params.values()[..K].to_vec());
    if let Some(v) = fitted.param("var_eps") {
        fm.params = Params::new(fm.params.names()[..K].to_vec(), fm.params.values()[..K].to_vec());
        fm.params.push("var_eps", v);
    }
    Ok(fm)
}

pub(crate) fn forecast(fitted: &FittedModel, window: &ArrivalSeries, h_max: usize) -> Result<Vec<RawForecast>> {
    let theta = &fitted.params.values()[..K];
    let var_e = fitted.param("var_eps").unwrap_or(0.0);
    let d = prepare(window)?;
    let origin = window.date_at(window.len() - 1);
    let alpha = theta[1];
    let mut prev = *d.x.last().unwrap();
    let mut var_x = 0.0;
    let mut out = Vec::with_capacity(h_max);
    for h in 1..=h_max {
        let w = weekday_index(origin + chrono::Duration::days(h as i64));
        let m = mu_at(theta, prev, w);
        // error in x_{T+h}: m e plus the propagated error of the plugged-in lag
        var_x = m * m * var_e + alpha * alpha * var_x;
        let sr = d.sr[w];
        out.push(RawForecast::log(m * sr, Some(sr * sr * var_x)));
        prev = m;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma};

    fn simulated(omega: f64, alpha: f64, n: usize, seed: u64) -> MemData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Gamma::new(4.0, 0.25).unwrap();
        let mut x = vec![1.0];
        let start = NaiveDate::from_ymd_opt(2020, 1, 6).unwrap();
        let weekdays: Vec<usize> = (0..n).map(|t| weekday_index(start + chrono::Duration::days(t as i64))).collect();
        for t in 1..n {
            x.push((omega + alpha * x[t - 1]) * g.sample(&mut rng));
        }
        MemData { x, weekdays, sr: [1.0; 7] }
    }

    fn estimate(d: &MemData) -> Vec<f64> {
        let o = FitOptions { starts: 1, ..Default::default() }.optim();
        qmle(d, &[0.3, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], &o).0
    }

    #[test]
    fn recovers_parameters_and_solves_score() {
        let d = simulated(0.5, 0.5, 2000, 4);
        let th = estimate(&d);
        assert!((th[0] - 0.5).abs() < 0.1, "{th:?}");
        assert!((th[1] - 0.5).abs() < 0.08, "{th:?}");
        assert!(th[2..].iter().all(|v| v.abs() < 0.1), "{th:?}");
        let g = gradient(&d, &th);
        assert!(g.iter().all(|v| v.abs() < 1e-6), "{g:?}");
    }

    #[test]
    fn unit_ratio_gives_unit_forecast() {
        let start = NaiveDate::from_ymd_opt(2020, 1, 6).unwrap();
        let counts: Vec<u64> = (0..70).map(|t| [900, 800, 700, 750, 650, 300, 200][t % 7]).collect();
        let w = ArrivalSeries::from_counts(start, counts, Default::default()).unwrap();
        let fm = fit_mem(&w, &FitOptions::default()).unwrap();
        assert!(fm.residuals.iter().all(|e| e.abs() < 1e-5));
        let f = forecast(&fm, &w, 7).unwrap();
        for (h, r) in f.iter().enumerate() {
            let expected = ([900.0f64, 800.0, 700.0, 750.0, 650.0, 300.0, 200.0][(70 + h) % 7]).ln();
            assert!((r.log_point.unwrap() - expected).abs() < 1e-4);
        }
    }
}
