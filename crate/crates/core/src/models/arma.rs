//! Regression with multiplicative (seasonal) ARMA errors, optionally with
//! GARCH(1,1) innovations. Covers ARMAX, SARMAX, the airline model and the
//! spline-detrended SARX.
//!
//! `z_t = D_t' b + u_t`, `a(L) u_t = m(L) e_t`, where `a` is the product of
//! the AR, seasonal AR and differencing factors and `m` the product of the
//! MA factors. Estimation is conditional Gaussian ML: the first `deg a`
//! observations are conditioned on and presample innovations are zero.

use nalgebra::{DMatrix, DVector};

use super::garch::{self, estimate_garch, garch_forecast, garch_loglik, garch_variance};
use super::{log_counts, FitOptions, FittedModel, Params, RawForecast};
use crate::error::{Error, Result};
use crate::linalg::{invert_symmetric, ols};
use crate::models::{Family, ModelSpec};
use crate::optim::{minimize, minimize_multistart, numeric_hessian, Bounds, OptimOptions};
use crate::poly::{expand_ar, expand_ma, is_invertible, is_stationary, psi_weights};
use crate::series::{spline_fit, weekday_index, ArrivalSeries};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const DAYS: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];

/// Parameter layout of a linear specification.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub dummies: bool,
    pub ar: Vec<usize>,
    pub sar: Vec<usize>,
    pub ma: Vec<usize>,
    pub sma: Vec<usize>,
    pub diff: (bool, bool),
    pub garch: bool,
}

pub(crate) struct Parts<'a> {
    pub beta: &'a [f64],
    pub ar: &'a [f64],
    pub sar: &'a [f64],
    pub ma: &'a [f64],
    pub sma: &'a [f64],
    pub garch: Option<[f64; 3]>,
}

impl Layout {
    pub fn from_spec(spec: &ModelSpec) -> Self {
        Layout {
            dummies: spec.include_dummies,
            ar: spec.ar_lags.clone(),
            sar: spec.sar_lags.clone(),
            ma: spec.ma_lags.clone(),
            sma: spec.sma_lags.clone(),
            diff: (spec.differencing.regular, spec.differencing.seasonal),
            garch: spec.garch,
        }
    }

    pub fn k_x(&self) -> usize {
        if self.dummies {
            7
        } else {
            0
        }
    }

    pub fn n_mean(&self) -> usize {
        self.k_x() + self.ar.len() + self.sar.len() + self.ma.len() + self.sma.len()
    }

    pub fn n_theta(&self) -> usize {
        self.n_mean() + if self.garch { 3 } else { 0 }
    }

    pub fn names(&self) -> Vec<String> {
        let mut v: Vec<String> = Vec::new();
        if self.dummies {
            v.extend(DAYS.iter().map(|d| format!("beta_{d}")));
        }
        v.extend(self.ar.iter().map(|l| format!("ar{l}")));
        v.extend(self.sar.iter().map(|l| format!("sar{l}")));
        v.extend(self.ma.iter().map(|l| format!("ma{l}")));
        v.extend(self.sma.iter().map(|l| format!("sma{l}")));
        if self.garch {
            v.extend(["omega", "alpha", "beta"].map(String::from));
        }
        v
    }

    pub fn split<'a>(&self, theta: &'a [f64]) -> Parts<'a> {
        let mut i = 0;
        let mut take = |n: usize| {
            let s = &theta[i..i + n];
            i += n;
            s
        };
        let beta = take(self.k_x());
        let ar = take(self.ar.len());
        let sar = take(self.sar.len());
        let ma = take(self.ma.len());
        let sma = take(self.sma.len());
        let garch = if self.garch {
            let g = take(3);
            Some([g[0], g[1], g[2]])
        } else {
            None
        };
        Parts { beta, ar, sar, ma, sma, garch }
    }

    /// Expanded AR (including differencing) and MA polynomials.
    pub fn polys(&self, p: &Parts) -> (Vec<f64>, Vec<f64>) {
        let ar: Vec<(usize, f64)> = self.ar.iter().copied().zip(p.ar.iter().copied()).collect();
        let sar: Vec<(usize, f64)> = self.sar.iter().copied().zip(p.sar.iter().copied()).collect();
        let d1 = [(1usize, 1.0)];
        let d7 = [(7usize, 1.0)];
        let mut factors: Vec<&[(usize, f64)]> = vec![&ar, &sar];
        if self.diff.0 {
            factors.push(&d1);
        }
        if self.diff.1 {
            factors.push(&d7);
        }
        let ma: Vec<(usize, f64)> = self.ma.iter().copied().zip(p.ma.iter().copied()).collect();
        let sma: Vec<(usize, f64)> = self.sma.iter().copied().zip(p.sma.iter().copied()).collect();
        (trim(expand_ar(&factors)), trim(expand_ma(&[&ma, &sma])))
    }

    /// Each estimated factor stationary / invertible.
    pub fn admissible(&self, p: &Parts) -> bool {
        let dense = |lags: &[usize], c: &[f64]| {
            let mut d = vec![0.0; lags.iter().copied().max().unwrap_or(0)];
            for (l, v) in lags.iter().zip(c) {
                d[l - 1] = *v;
            }
            d
        };
        is_stationary(&dense(&self.ar, p.ar))
            && is_stationary(&dense(&self.sar, p.sar))
            && is_invertible(&dense(&self.ma, p.ma))
            && is_invertible(&dense(&self.sma, p.sma))
            && p.garch.is_none_or(|g| garch::admissible(g[0], g[1], g[2]))
    }
}

fn trim(mut v: Vec<f64>) -> Vec<f64> {
    while v.last() == Some(&0.0) {
        v.pop();
    }
    v
}

/// Dependent variable and calendar of a window.
pub(crate) struct LinearData {
    pub z: Vec<f64>,
    pub weekdays: Vec<usize>,
    /// Spline level multiplying the ratio back to logs (last in-sample value).
    pub level: Option<f64>,
}

impl LinearData {
    pub fn prepare(family: Family, window: &ArrivalSeries) -> Result<Self> {
        let y = log_counts(window)?;
        let weekdays = window.dates().iter().map(|&d| weekday_index(d)).collect();
        if family == Family::SplineSarx {
            let sp = spline_fit(&y, window.dates())?;
            if sp.fitted_values.iter().any(|v| *v <= 0.0) {
                return Err(Error::Domain("spline level must be positive to form the ratio".into()));
            }
            let z = y.iter().zip(&sp.fitted_values).map(|(a, b)| a / b).collect();
            let level = *sp.fitted_values.last().expect("nonempty window");
            return Ok(LinearData { z, weekdays, level: Some(level) });
        }
        Ok(LinearData { z: y, weekdays, level: None })
    }

    fn errors(&self, beta: &[f64]) -> Vec<f64> {
        if beta.is_empty() {
            return self.z.clone();
        }
        self.z.iter().zip(&self.weekdays).map(|(z, &w)| z - beta[w]).collect()
    }
}

/// Innovations `e_t`, `t >= m`, and the regression errors `u_t` for all `t`.
pub(crate) fn innovations(layout: &Layout, theta: &[f64], data: &LinearData, min_start: usize) -> (Vec<f64>, Vec<f64>, usize) {
    let p = layout.split(theta);
    let (a, b) = layout.polys(&p);
    let u = data.errors(p.beta);
    let m = a.len().max(min_start).min(u.len());
    let n = u.len() - m;
    let mut e = vec![0.0; n];
    for t in m..u.len() {
        let mut v = u[t];
        for (i, ai) in a.iter().enumerate() {
            v -= ai * u[t - 1 - i];
        }
        for (j, bj) in b.iter().enumerate() {
            let lag = t - m;
            if j < lag {
                v -= bj * e[lag - 1 - j];
            }
        }
        e[t - m] = v;
    }
    (e, u, m)
}

/// Concentrated (non-GARCH) or full (GARCH) log-likelihood.
fn loglik_at(layout: &Layout, theta: &[f64], data: &LinearData, min_start: usize, sigma2: Option<f64>) -> f64 {
    let p = layout.split(theta);
    if !layout.admissible(&p) {
        return f64::NEG_INFINITY;
    }
    let (e, _, _) = innovations(layout, theta, data, min_start);
    let n = e.len() as f64;
    if e.is_empty() {
        return f64::NEG_INFINITY;
    }
    match p.garch {
        Some(g) => garch_loglik(&e, g[0], g[1], g[2]),
        None => {
            let ss: f64 = e.iter().map(|v| v * v).sum();
            match sigma2 {
                Some(s2) => -0.5 * n * (LN_2PI + s2.ln()) - ss / (2.0 * s2),
                None => {
                    let s2 = (ss / n).max(1e-300);
                    -0.5 * n * (LN_2PI + s2.ln() + 1.0)
                }
            }
        }
    }
}

/// Log-likelihood of `spec` on `window` at mean (and GARCH) parameters
/// `theta`, with the innovation variance concentrated out when there is no
/// GARCH part.
pub fn linear_loglik(spec: &ModelSpec, theta: &[f64], window: &ArrivalSeries) -> Result<f64> {
    let layout = Layout::from_spec(spec);
    if theta.len() != layout.n_theta() {
        return Err(Error::Config(format!("expected {} parameters, got {}", layout.n_theta(), theta.len())));
    }
    let data = LinearData::prepare(spec.family, window)?;
    Ok(loglik_at(&layout, theta, &data, 0, None))
}

/// Method-of-moments style starting values for the mean parameters.
fn initial_mean(layout: &Layout, data: &LinearData) -> Vec<f64> {
    let mut theta = Vec::with_capacity(layout.n_mean());
    if layout.dummies {
        let mut sums = [0.0; 7];
        let mut counts = [0usize; 7];
        for (z, &w) in data.z.iter().zip(&data.weekdays) {
            sums[w] += z;
            counts[w] += 1;
        }
        theta.extend((0..7).map(|w| if counts[w] > 0 { sums[w] / counts[w] as f64 } else { 0.0 }));
    }
    let mut u = data.errors(&theta);
    if layout.diff.0 {
        u = (1..u.len()).map(|t| u[t] - u[t - 1]).collect();
    }
    if layout.diff.1 {
        u = (7..u.len()).map(|t| u[t] - u[t - 7]).collect();
    }
    let lags: Vec<usize> = layout.ar.iter().chain(&layout.sar).copied().collect();
    let mut coefs = vec![0.0; lags.len()];
    if let Some(&maxlag) = lags.iter().max() {
        if u.len() > maxlag + lags.len() + 5 {
            let rows = u.len() - maxlag;
            let x = DMatrix::from_fn(rows, lags.len(), |i, j| u[maxlag + i - lags[j]]);
            let y = DVector::from_iterator(rows, u[maxlag..].iter().copied());
            if let Ok(fit) = ols(&x, &y) {
                coefs = fit.coefficients.iter().copied().collect();
            }
        }
    }
    let (ar0, sar0) = coefs.split_at(layout.ar.len());
    let shrink_to_stationary = |lags: &[usize], c: &[f64]| {
        let mut c = c.to_vec();
        for _ in 0..60 {
            let mut d = vec![0.0; lags.iter().copied().max().unwrap_or(0)];
            for (l, v) in lags.iter().zip(&c) {
                d[l - 1] = *v;
            }
            if is_stationary(&d) && c.iter().map(|v| v.abs()).sum::<f64>() < 0.98 {
                break;
            }
            c.iter_mut().for_each(|v| *v *= 0.8);
        }
        c
    };
    theta.extend(shrink_to_stationary(&layout.ar, ar0));
    theta.extend(shrink_to_stationary(&layout.sar, sar0));
    theta.extend(std::iter::repeat_n(0.0, layout.ma.len() + layout.sma.len()));
    theta
}

fn coef_bounds(layout: &Layout) -> Bounds {
    let mut lower = vec![f64::NEG_INFINITY; layout.k_x()];
    let mut upper = vec![f64::INFINITY; layout.k_x()];
    let arma = layout.ar.len() + layout.sar.len() + layout.ma.len() + layout.sma.len();
    lower.extend(std::iter::repeat_n(-3.0, arma));
    upper.extend(std::iter::repeat_n(3.0, arma));
    if layout.garch {
        // omega is optimised relative to the residual variance
        lower.extend([1e-8, 0.0, 0.0]);
        upper.extend([10.0, 1.0, 1.0]);
    }
    Bounds { lower, upper }
}

struct Estimate {
    theta: Vec<f64>,
    converged: bool,
}

fn optimise(layout: &Layout, data: &LinearData, x0: Vec<f64>, min_start: usize, opts: &OptimOptions, s2: f64) -> Estimate {
    let n = data.z.len().max(1) as f64;
    let g_at = layout.n_mean();
    let to_theta = |x: &[f64]| {
        let mut t = x.to_vec();
        if layout.garch {
            t[g_at] *= s2;
        }
        t
    };
    let f = |x: &[f64]| -loglik_at(layout, &to_theta(x), data, min_start, None) / n;
    let bounds = coef_bounds(layout);
    let mut start = x0;
    if layout.garch {
        start[g_at] /= s2;
    }
    let r = if opts.starts > 1 { minimize_multistart(&f, &start, &bounds, opts) } else { minimize(&f, &start, &bounds, opts) };
    Estimate { theta: to_theta(&r.x), converged: r.converged && r.fx.is_finite() }
}

/// Builds the fitted model at `theta`.
fn finish(spec: &ModelSpec, layout: &Layout, theta: Vec<f64>, data: &LinearData, min_start: usize, window: &ArrivalSeries, sigma2: Option<f64>) -> Result<FittedModel> {
    let p = layout.split(&theta);
    if !layout.admissible(&p) {
        return Err(Error::Estimation("estimates outside the stationary/invertible region".into()));
    }
    let (e, _, _) = innovations(layout, &theta, data, min_start);
    if e.is_empty() {
        return Err(Error::Estimation("no observations after conditioning on presample".into()));
    }
    let n = e.len();
    let ll = loglik_at(layout, &theta, data, min_start, sigma2);
    if !ll.is_finite() {
        return Err(Error::Estimation("non-finite likelihood at the estimates".into()));
    }
    let mut params = Params::new(layout.names(), theta.clone());
    let cond_variance = match p.garch {
        Some(g) => Some(garch_variance(&e, g[0], g[1], g[2])),
        None => {
            let s2 = sigma2.unwrap_or_else(|| e.iter().map(|v| v * v).sum::<f64>() / n as f64);
            params.push("sigma2", s2);
            None
        }
    };
    let k = layout.n_mean() + if layout.garch { 3 } else { 1 };
    Ok(FittedModel::new(spec.clone(), params, ll, n, k, e, cond_variance, window))
}

pub(crate) fn fit_with_start(spec: &ModelSpec, window: &ArrivalSeries, opts: &FitOptions, min_start: usize) -> Result<FittedModel> {
    let layout = Layout::from_spec(spec);
    let data = LinearData::prepare(spec.family, window)?;
    let names = layout.names();
    if spec.garch {
        if let Some(ws) = opts.warm_start.as_ref().filter(|p| p.names().len() > names.len() - 1 && p.names()[..names.len()] == names[..]) {
            let x0 = ws.values()[..names.len()].to_vec();
            let s2 = garch::presample_variance(&innovations(&layout, &x0, &data, min_start).0).max(1e-12);
            let est = optimise(&layout, &data, x0, min_start, &opts.optim(), s2);
            return garch_result(spec, &layout, est, &data, min_start, window);
        }
        let mut mean_spec = spec.clone();
        mean_spec.garch = false;
        mean_spec.family = spec.family.mean_family();
        let mean_opts = FitOptions { starts: 1, warm_start: None, ..opts.clone() };
        let mean_fit = fit_with_start(&mean_spec, window, &mean_opts, min_start)?;
        return garch_layer(spec, &mean_fit, &data, min_start, window, opts);
    }
    let x0 = opts.start_from(&names, initial_mean(&layout, &data));
    let est = optimise(&layout, &data, x0, min_start, &opts.optim(), 1.0);
    let mut fm = finish(spec, &layout, est.theta, &data, min_start, window, None)?;
    if !est.converged {
        fm.warnings.push("optimizer stopped before convergence".into());
    }
    Ok(fm)
}

fn garch_result(spec: &ModelSpec, layout: &Layout, est: Estimate, data: &LinearData, min_start: usize, window: &ArrivalSeries) -> Result<FittedModel> {
    let mut fm = finish(spec, layout, est.theta, data, min_start, window, None)?;
    if !est.converged {
        fm.warnings.push("optimizer stopped before convergence".into());
    }
    let a = fm.param("alpha").unwrap_or(0.0);
    let b = fm.param("beta").unwrap_or(0.0);
    if a + b > garch::PERSISTENCE_CAP - 1e-4 {
        fm.warnings.push("GARCH persistence at the stationarity constraint".into());
    }
    Ok(fm)
}

fn garch_layer(spec: &ModelSpec, mean_fit: &FittedModel, data: &LinearData, min_start: usize, window: &ArrivalSeries, opts: &FitOptions) -> Result<FittedModel> {
    let layout = Layout::from_spec(spec);
    let mean_layout = Layout { garch: false, ..layout.clone() };
    let mean_theta = &mean_fit.params.values()[..mean_layout.n_mean()];
    let (e, _, _) = innovations(&mean_layout, mean_theta, data, min_start);
    let gopts = OptimOptions { starts: 1, ..opts.optim() };
    let (g, _) = estimate_garch(&e, &gopts);
    let s2 = garch::presample_variance(&e).max(1e-12);
    let mut x0 = mean_theta.to_vec();
    x0.extend(g);
    let est = optimise(&layout, data, x0, min_start, &opts.optim(), s2);
    garch_result(spec, &layout, est, data, min_start, window)
}

/// Maximum likelihood fit of a linear (regression + ARMA errors) family.
pub fn fit_linear_arma(spec: &ModelSpec, window: &ArrivalSeries, opts: &FitOptions) -> Result<FittedModel> {
    if !spec.family.is_linear() {
        return Err(Error::Config(format!("{:?} is not a linear ARMA family", spec.family)));
    }
    fit_with_start(spec, window, opts, 0)
}

/// Adds a GARCH(1,1) equation to a fitted mean model and re-estimates
/// mean and variance parameters jointly.
pub fn fit_garch_layer(mean_fit: &FittedModel, window: &ArrivalSeries, opts: &FitOptions) -> Result<FittedModel> {
    let mut spec = mean_fit.spec.clone();
    spec.family = match spec.family {
        Family::Armax => Family::ArmaxGarch,
        Family::Sarmax => Family::SarmaxGarch,
        f => return Err(Error::Config(format!("no GARCH variant of {f:?}"))),
    };
    spec.garch = true;
    let data = LinearData::prepare(spec.family, window)?;
    garch_layer(&spec, mean_fit, &data, 0, window, opts)
}

fn theta_of(fitted: &FittedModel, layout: &Layout) -> Result<Vec<f64>> {
    let names = layout.names();
    let p = &fitted.params;
    if p.len() < names.len() || p.names()[..names.len()] != names[..] {
        return Err(Error::Config("parameter names do not match the specification".into()));
    }
    Ok(p.values()[..names.len()].to_vec())
}

pub(crate) fn refilter(fitted: &FittedModel, window: &ArrivalSeries) -> Result<FittedModel> {
    let layout = Layout::from_spec(&fitted.spec);
    let theta = theta_of(fitted, &layout)?;
    let data = LinearData::prepare(fitted.spec.family, window)?;
    finish(&fitted.spec, &layout, theta, &data, 0, window, fitted.param("sigma2"))
}

pub(crate) fn forecast(fitted: &FittedModel, window: &ArrivalSeries, h_max: usize) -> Result<Vec<RawForecast>> {
    let layout = Layout::from_spec(&fitted.spec);
    let theta = theta_of(fitted, &layout)?;
    let data = LinearData::prepare(fitted.spec.family, window)?;
    let p = layout.split(&theta);
    let (a, b) = layout.polys(&p);
    let (e, u, m) = innovations(&layout, &theta, &data, 0);
    let t_len = u.len();
    let mut u_ext = u.clone();
    let mut e_ext: Vec<f64> = vec![0.0; m];
    e_ext.extend(&e);
    e_ext.resize(t_len + h_max, 0.0);
    for s in t_len..t_len + h_max {
        let mut v = 0.0;
        for (i, ai) in a.iter().enumerate() {
            v += ai * u_ext[s - 1 - i];
        }
        for (j, bj) in b.iter().enumerate() {
            if s >= j + 1 {
                v += bj * e_ext[s - 1 - j];
            }
        }
        u_ext.push(v);
    }
    let sig: Vec<f64> = match p.garch {
        Some(g) => {
            let h = garch_variance(&e, g[0], g[1], g[2]);
            let (el, hl) = (*e.last().unwrap_or(&0.0), *h.last().unwrap_or(&0.0));
            garch_forecast(g[0], g[1], g[2], el, hl, h_max)
        }
        None => vec![fitted.residual_variance(); h_max],
    };
    let psi = psi_weights(&a, &b, h_max);
    let origin = window.date_at(t_len - 1);
    let mut out = Vec::with_capacity(h_max);
    for h in 1..=h_max {
        let wd = weekday_index(origin + chrono::Duration::days(h as i64));
        let mean = if p.beta.is_empty() { 0.0 } else { p.beta[wd] };
        let z = mean + u_ext[t_len + h - 1];
        let var: f64 = (0..h).map(|j| psi[j] * psi[j] * sig[h - j - 1]).sum();
        out.push(match data.level {
            Some(level) => RawForecast::log(z * level, Some(var * level * level)),
            None => RawForecast::log(z, Some(var)),
        });
    }
    Ok(out)
}

/// Asymptotic standard errors of the estimated coefficients from the
/// numerical Hessian of the (profile) log-likelihood.
pub(crate) fn standard_errors(fitted: &FittedModel, window: &ArrivalSeries, min_start: usize) -> Result<Vec<f64>> {
    let layout = Layout::from_spec(&fitted.spec);
    let theta = theta_of(fitted, &layout)?;
    let data = LinearData::prepare(fitted.spec.family, window)?;
    let f = |x: &[f64]| -loglik_at(&layout, x, &data, min_start, None);
    let h = numeric_hessian(&f, &theta);
    let k = theta.len();
    let m = DMatrix::from_fn(k, k, |i, j| h[i][j]);
    let inv = invert_symmetric(&m).ok_or_else(|| Error::Singular("information matrix is singular".into()))?;
    Ok((0..k).map(|i| inv[(i, i)].max(0.0).sqrt()).collect())
}
