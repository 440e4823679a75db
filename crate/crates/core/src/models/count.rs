//! Count regressions with log link on day dummies and the lagged count:
//! `mu_t = exp(D_t' b + g log(1 + Y_{t-1}))`.
//!
//! Poisson and exponential fits use Newton/Fisher scoring; the negative
//! binomial (NB2, variance `mu (1 + a mu)`) adds the dispersion `a >= 0`
//! and is fitted by bounded quasi-Newton with the analytic score.

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::{digamma, ln_gamma};

use super::{FitOptions, FittedModel, Predictive, Params, RawForecast};
use crate::error::{Error, Result};
use crate::models::{Family, ModelSpec};
use crate::optim::{minimize_with_gradient, multistart, Bounds};
use crate::series::{weekday_index, ArrivalSeries};

const DAYS: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];
const K: usize = 8;

/// Response and regressors, conditioning on the first observation.
struct CountData {
    y: Vec<f64>,
    x: Vec<[f64; K]>,
}

fn row(weekday: usize, prev: f64) -> [f64; K] {
    let mut r = [0.0; K];
    r[weekday] = 1.0;
    r[7] = (1.0 + prev).ln();
    r
}

fn prepare(window: &ArrivalSeries) -> CountData {
    let c = window.counts();
    let y = c[1..].iter().map(|&v| v as f64).collect();
    let x = (1..c.len()).map(|t| row(weekday_index(window.dates()[t]), c[t - 1] as f64)).collect();
    CountData { y, x }
}

fn dot(a: &[f64; K], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn stirling_tail(x: f64) -> f64 {
    let x2 = x * x;
    1.0 / (12.0 * x) - 1.0 / (360.0 * x * x2) + 1.0 / (1260.0 * x * x2 * x2)
}

/// Log-density of a count under the NB2 law with mean `mu` and dispersion
/// `alpha`; `alpha = 0` gives the Poisson log-density.
pub(crate) fn negbin_logpmf(y: f64, mu: f64, alpha: f64) -> f64 {
    if alpha <= 0.0 {
        return y * mu.ln() - mu - ln_gamma(y + 1.0);
    }
    let r = 1.0 / alpha;
    // ln Γ(y + r) - ln Γ(r) - y ln r, stable as r grows
    let a = if r >= 10.0 {
        (r + y - 0.5) * (y / r).ln_1p() - y + stirling_tail(r + y) - stirling_tail(r)
    } else {
        ln_gamma(y + r) - ln_gamma(r) - y * r.ln()
    };
    a - ln_gamma(y + 1.0) + y * mu.ln() - (y + r) * (mu / r).ln_1p()
}

/// Log-likelihood of the count family at `theta = (b, g[, a])`.
fn loglik(family: Family, d: &CountData, theta: &[f64]) -> f64 {
    let alpha = if family == Family::Negbin { theta[K] } else { 0.0 };
    if alpha < 0.0 {
        return f64::NEG_INFINITY;
    }
    let mut ll = 0.0;
    for (y, x) in d.y.iter().zip(&d.x) {
        let eta = dot(x, theta);
        let mu = eta.exp();
        if !mu.is_finite() || mu <= 0.0 {
            return f64::NEG_INFINITY;
        }
        ll += match family {
            Family::Exponential => -eta - y / mu,
            Family::Negbin => negbin_logpmf(*y, mu, alpha),
            _ => y * eta - mu - ln_gamma(y + 1.0),
        };
    }
    ll
}

/// Analytic score of [`loglik`].
fn score(family: Family, d: &CountData, theta: &[f64]) -> Vec<f64> {
    let nb = family == Family::Negbin;
    let alpha = if nb { theta[K] } else { 0.0 };
    let mut g = vec![0.0; theta.len()];
    for (y, x) in d.y.iter().zip(&d.x) {
        let mu = dot(x, theta).exp();
        let w = match family {
            Family::Exponential => y / mu - 1.0,
            Family::Negbin => (y - mu) / (1.0 + alpha * mu),
            _ => y - mu,
        };
        for k in 0..K {
            g[k] += w * x[k];
        }
        if nb {
            g[K] += if alpha >= 1e-4 {
                let r = 1.0 / alpha;
                r * r * ((alpha * mu).ln_1p() - (digamma(y + r) - digamma(r))) + (y - mu) / (alpha * (1.0 + alpha * mu))
            } else {
                0.5 * ((y - mu) * (y - mu) - y)
            };
        }
    }
    g
}

pub fn count_loglik(family: Family, window: &ArrivalSeries, theta: &[f64]) -> f64 {
    loglik(family, &prepare(window), theta)
}

pub fn count_score(family: Family, window: &ArrivalSeries, theta: &[f64]) -> Vec<f64> {
    score(family, &prepare(window), theta)
}

fn names(family: Family) -> Vec<String> {
    let mut v: Vec<String> = DAYS.iter().map(|d| format!("beta_{d}")).collect();
    v.push("gamma".into());
    if family == Family::Negbin {
        v.push("alpha".into());
    }
    v
}

/// Newton iterations for the Poisson (exact Hessian) or exponential
/// (Fisher scoring) likelihood.
fn newton(family: Family, d: &CountData, mut beta: Vec<f64>, max_iter: usize) -> Result<(Vec<f64>, bool)> {
    let mut ll = loglik(family, d, &beta);
    for _ in 0..max_iter {
        let g = score(family, d, &beta);
        let mut info = DMatrix::<f64>::zeros(K, K);
        for (y, x) in d.y.iter().zip(&d.x) {
            let mu = dot(x, &beta).exp();
            let w = if family == Family::Exponential { 1.0 } else { mu };
            let _ = y;
            for i in 0..K {
                for j in 0..K {
                    info[(i, j)] += w * x[i] * x[j];
                }
            }
        }
        let step = info
            .cholesky()
            .map(|c| c.solve(&DVector::from_vec(g.clone())))
            .ok_or_else(|| Error::Singular("count-model information matrix".into()))?;
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + t * s).collect();
            let lc = loglik(family, d, &cand);
            if lc.is_finite() && lc >= ll - 1e-12 * ll.abs() {
                let done = (lc - ll).abs() <= 1e-12 * ll.abs().max(1.0);
                beta = cand;
                ll = lc;
                if done {
                    return Ok((beta, true));
                }
                break;
            }
            t *= 0.5;
            if t < 1e-10 {
                return Ok((beta, true));
            }
        }
    }
    Ok((beta, false))
}

fn initial_beta(d: &CountData) -> Vec<f64> {
    let mut sums = [0.0; 7];
    let mut n = [0usize; 7];
    for (y, x) in d.y.iter().zip(&d.x) {
        let w = x[..7].iter().position(|v| *v == 1.0).unwrap_or(0);
        sums[w] += y;
        n[w] += 1;
    }
    let mut b: Vec<f64> = (0..7).map(|w| if n[w] > 0 { (sums[w] / n[w] as f64).max(0.5).ln() } else { 0.0 }).collect();
    b.push(0.0);
    b
}

fn build(spec: &ModelSpec, window: &ArrivalSeries, theta: Vec<f64>, d: &CountData) -> Result<FittedModel> {
    let ll = loglik(spec.family, d, &theta);
    if !ll.is_finite() {
        return Err(Error::Estimation("non-finite count likelihood".into()));
    }
    let resid = d.y.iter().zip(&d.x).map(|(y, x)| y - dot(x, &theta).exp()).collect();
    let k = theta.len();
    Ok(FittedModel::new(spec.clone(), Params::new(names(spec.family), theta), ll, d.y.len(), k, resid, None, window))
}

/// Maximum likelihood fit of a Poisson, negative binomial or exponential
/// count regression.
pub fn fit_count(spec: &ModelSpec, window: &ArrivalSeries, opts: &FitOptions) -> Result<FittedModel> {
    let family = spec.family;
    if !family.is_count() {
        return Err(Error::Config(format!("{family:?} is not a count family")));
    }
    let d = prepare(window);
    let nm = names(family);
    let poisson_start = opts.start_from(&nm[..K], initial_beta(&d));
    let newton_family = if family == Family::Negbin { Family::Poisson } else { family };
    let (beta, converged) = newton(newton_family, &d, poisson_start, opts.max_iter.min(200))?;
    if family != Family::Negbin {
        let mut fm = build(spec, window, beta, &d)?;
        if !converged {
            fm.warnings.push("Newton iterations did not converge".into());
        }
        return Ok(fm);
    }
    // moment estimate of the dispersion from the Poisson fit
    let (mut num, mut den) = (0.0, 0.0);
    for (y, x) in d.y.iter().zip(&d.x) {
        let mu = dot(x, &beta).exp();
        num += ((y - mu) * (y - mu) - y) * mu * mu;
        den += mu.powi(4);
    }
    let alpha0 = (num / den).max(1e-6);
    let mut x0 = beta;
    x0.push(alpha0);
    let x0 = opts.start_from(&nm, x0);
    let n = d.y.len() as f64;
    // the dispersion is optimised on a unit scale relative to its start
    let scale = x0[K].max(1e-6);
    let to_theta = |x: &[f64]| {
        let mut t = x.to_vec();
        t[K] *= scale;
        t
    };
    let f = |x: &[f64]| -loglik(family, &d, &to_theta(x)) / n;
    let grad = |x: &[f64], _: f64| {
        let mut g = score(family, &d, &to_theta(x));
        g[K] *= scale;
        g.iter().map(|v| -v / n).collect()
    };
    let mut lower = vec![f64::NEG_INFINITY; K];
    lower.push(0.0);
    let mut upper = vec![f64::INFINITY; K];
    upper.push(50.0 / scale);
    let bounds = Bounds { lower, upper };
    let mut start = x0.clone();
    start[K] /= scale;
    let optim = opts.optim();
    let r = multistart(&start, &bounds, &optim, |s| minimize_with_gradient(&f, grad, s, &bounds, &optim));
    let theta = to_theta(&r.x);
    let at_zero = theta[K] <= 0.0;
    let mut fm = build(spec, window, theta, &d)?;
    if at_zero {
        fm.warnings.push("dispersion estimate clipped at zero".into());
    }
    if !r.converged {
        fm.warnings.push("optimizer stopped before convergence".into());
    }
    Ok(fm)
}

fn theta_of(fitted: &FittedModel) -> Vec<f64> {
    fitted.params.values().to_vec()
}

pub(crate) fn refilter(fitted: &FittedModel, window: &ArrivalSeries) -> Result<FittedModel> {
    let d = prepare(window);
    build(&fitted.spec, window, theta_of(fitted), &d)
}

fn means(fitted: &FittedModel, window: &ArrivalSeries, h_max: usize) -> Vec<f64> {
    let theta = theta_of(fitted);
    let t = window.len() - 1;
    let origin = window.date_at(t);
    let mut prev = window.counts()[t] as f64;
    let mut out = Vec::with_capacity(h_max);
    for h in 1..=h_max {
        let wd = weekday_index(origin + chrono::Duration::days(h as i64));
        let mu = dot(&row(wd, prev), &theta).exp();
        out.push(mu);
        prev = mu;
    }
    out
}

pub(crate) fn forecast(fitted: &FittedModel, window: &ArrivalSeries, h_max: usize) -> Result<Vec<RawForecast>> {
    Ok(means(fitted, window, h_max).into_iter().map(RawForecast::level).collect())
}

pub(crate) fn predictive(fitted: &FittedModel, window: &ArrivalSeries) -> Result<Predictive> {
    let mu = means(fitted, window, 1)[0];
    Ok(match fitted.spec.family {
        Family::Negbin => {
            let alpha = fitted.param("alpha").unwrap_or(0.0);
            if alpha < 0.0 {
                return Err(Error::Domain("negative dispersion".into()));
            }
            Predictive::NegBin { mu, alpha }
        }
        Family::Exponential => Predictive::Exponential { mu },
        _ => Predictive::Poisson { mu },
    })
}

/// Observed counts, Poisson fitted means and GLM leverages
/// `h_t = mu_t x_t' (X' W X)^-1 x_t` on a window, for the overdispersion
/// test.
pub(crate) fn poisson_fitted(window: &ArrivalSeries, opts: &FitOptions) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let spec = ModelSpec::default_for(crate::models::ModelId::M8);
    let fm = fit_count(&spec, window, opts)?;
    let d = prepare(window);
    let theta = theta_of(&fm);
    let mu: Vec<f64> = d.x.iter().map(|x| dot(x, &theta).exp()).collect();
    let mut info = DMatrix::<f64>::zeros(K, K);
    for (x, &m) in d.x.iter().zip(&mu) {
        let v = DVector::from_column_slice(x);
        info += m * &v * v.transpose();
    }
    let inv = info.try_inverse().ok_or_else(|| Error::Singular("Poisson information matrix".into()))?;
    let h = d
        .x
        .iter()
        .zip(&mu)
        .map(|(x, &m)| {
            let v = DVector::from_column_slice(x);
            m * (v.transpose() * &inv * &v)[(0, 0)]
        })
        .collect();
    Ok((d.y, mu, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelId;
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma, Poisson};

    pub(crate) fn simulate(beta: &[f64; 8], alpha: f64, n: usize, seed: u64) -> ArrivalSeries {
        let start = NaiveDate::from_ymd_opt(2020, 1, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = vec![20u64];
        for t in 1..n {
            let wd = weekday_index(start + chrono::Duration::days(t as i64));
            let mu = dot(&row(wd, counts[t - 1] as f64), beta).exp();
            let lam = if alpha > 0.0 { Gamma::new(1.0 / alpha, alpha * mu).unwrap().sample(&mut rng) } else { mu };
            let y = Poisson::new(lam.max(1e-9)).unwrap().sample(&mut rng) as u64;
            counts.push(y.max(1));
        }
        ArrivalSeries::from_counts(start, counts, Default::default()).unwrap()
    }

    const BETA: [f64; 8] = [1.5, 1.4, 1.3, 1.3, 1.2, 0.9, 0.7, 0.4];

    #[test]
    fn negbin_reduces_to_poisson() {
        for &(y, mu) in &[(0.0, 3.0), (5.0, 4.2), (120.0, 100.0), (31000.0, 30500.0)] {
            let p = negbin_logpmf(y, mu, 0.0);
            let nb = negbin_logpmf(y, mu, 1e-8);
            // first-order expansion in alpha of the log-ratio
            let slope = 0.5 * ((y - mu) * (y - mu) - y);
            assert!((nb - p - 1e-8 * slope).abs() < 1e-6, "{y} {mu}: {p} vs {nb}");
            if mu < 1000.0 {
                assert!((p - nb).abs() < 1e-4);
            }
            let r: f64 = 2.0;
            let exact = ln_gamma(y + r) - ln_gamma(r) - ln_gamma(y + 1.0) + y * (mu / (mu + r)).ln() + r * (r / (mu + r)).ln();
            assert!((negbin_logpmf(y, mu, 0.5) - exact).abs() < 1e-9);
            let r: f64 = 40.0;
            let exact = ln_gamma(y + r) - ln_gamma(r) - ln_gamma(y + 1.0) + y * (mu / (mu + r)).ln() + r * (r / (mu + r)).ln();
            assert!((negbin_logpmf(y, mu, 1.0 / r) - exact).abs() < 1e-8 * exact.abs().max(1.0));
        }
        let w = simulate(&BETA, 0.0, 300, 1);
        let mut theta = BETA.to_vec();
        let p = count_loglik(Family::Poisson, &w, &theta);
        theta.push(1e-8);
        assert!((p - count_loglik(Family::Negbin, &w, &theta)).abs() < 1e-4);
    }

    #[test]
    fn scores_match_finite_differences() {
        let w = simulate(&BETA, 0.5, 400, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for fam in [Family::Poisson, Family::Negbin, Family::Exponential] {
            for _ in 0..10 {
                let mut th: Vec<f64> = BETA.iter().map(|b| b + 0.1 * (rng.random::<f64>() - 0.5)).collect();
                if fam == Family::Negbin {
                    th.push(0.05 + rng.random::<f64>());
                }
                let g = count_score(fam, &w, &th);
                for k in 0..th.len() {
                    let h = 1e-6 * th[k].abs().max(1.0);
                    let mut up = th.clone();
                    let mut dn = th.clone();
                    up[k] += h;
                    dn[k] -= h;
                    let fd = (count_loglik(fam, &w, &up) - count_loglik(fam, &w, &dn)) / (2.0 * h);
                    assert!((g[k] - fd).abs() <= 1e-4 * fd.abs().max(1.0), "{fam:?} k={k}: {} vs {fd}", g[k]);
                }
            }
        }
    }

    #[test]
    fn poisson_recovery() {
        let w = simulate(&BETA, 0.0, 2000, 3);
        let fm = fit_count(&ModelSpec::default_for(ModelId::M8), &w, &FitOptions::default()).unwrap();
        assert!((fm.param("gamma").unwrap() - 0.4).abs() < 0.1);
        assert!((fm.param("beta_mon").unwrap() - 1.5).abs() < 0.3);
    }

    #[test]
    fn negbin_recovers_dispersion() {
        let w = simulate(&BETA, 0.5, 2000, 4);
        let fm = fit_count(&ModelSpec::default_for(ModelId::M9), &w, &FitOptions { starts: 1, ..Default::default() }).unwrap();
        let a = fm.param("alpha").unwrap();
        assert!((a - 0.5).abs() < 0.1, "alpha {a}");
        let w = simulate(&BETA, 0.0, 1000, 5);
        let fm = fit_count(&ModelSpec::default_for(ModelId::M9), &w, &FitOptions { starts: 1, ..Default::default() }).unwrap();
        assert!(fm.param("alpha").unwrap() < 0.02);
    }

    #[test]
    fn exponential_score_vanishes_at_estimate() {
        let w = simulate(&BETA, 0.0, 500, 6);
        let fm = fit_count(&ModelSpec::default_for(ModelId::M10), &w, &FitOptions::default()).unwrap();
        let g = count_score(Family::Exponential, &w, fm.params.values());
        assert!(g.iter().all(|v| v.abs() < 1e-5), "{g:?}");
        let f = forecast(&fm, &w, 3).unwrap();
        assert!(f.iter().all(|r| r.point > 0.0 && r.log_point.is_none()));
    }
}
