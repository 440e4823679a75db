//! GARCH(1,1) conditional variance: filter, Gaussian likelihood, analytic
//! score and variance forecasts.
//!
//! The recursion starts from `h_0 = mean(e^2)`, which does not depend on
//! the variance parameters.

use crate::optim::{minimize_with_gradient, multistart, Bounds, OptimOptions};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Largest admissible `alpha + beta`.
pub(crate) const PERSISTENCE_CAP: f64 = 0.9999;

pub(crate) fn presample_variance(eps: &[f64]) -> f64 {
    eps.iter().map(|e| e * e).sum::<f64>() / eps.len().max(1) as f64
}

/// `h_t = omega + alpha e_{t-1}^2 + beta h_{t-1}` with `h_0 = mean(e^2)`.
pub fn garch_variance(eps: &[f64], omega: f64, alpha: f64, beta: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(eps.len());
    if eps.is_empty() {
        return h;
    }
    h.push(presample_variance(eps));
    for t in 1..eps.len() {
        h.push(omega + alpha * eps[t - 1] * eps[t - 1] + beta * h[t - 1]);
    }
    h
}

pub(crate) fn admissible(omega: f64, alpha: f64, beta: f64) -> bool {
    omega > 0.0 && alpha >= 0.0 && beta >= 0.0 && alpha + beta < PERSISTENCE_CAP
}

/// Gaussian log-likelihood of `eps` under GARCH(1,1); `-inf` outside the
/// admissible region.
pub fn garch_loglik(eps: &[f64], omega: f64, alpha: f64, beta: f64) -> f64 {
    if !admissible(omega, alpha, beta) {
        return f64::NEG_INFINITY;
    }
    let h = garch_variance(eps, omega, alpha, beta);
    let mut ll = 0.0;
    for (e, v) in eps.iter().zip(&h) {
        if *v <= 0.0 {
            return f64::NEG_INFINITY;
        }
        ll -= 0.5 * (LN_2PI + v.ln() + e * e / v);
    }
    ll
}

/// Analytic gradient of [`garch_loglik`] with respect to
/// `(omega, alpha, beta)`.
pub fn garch_score(eps: &[f64], omega: f64, alpha: f64, beta: f64) -> [f64; 3] {
    let h = garch_variance(eps, omega, alpha, beta);
    let mut dh = [0.0; 3];
    let mut g = [0.0; 3];
    for t in 0..eps.len() {
        if t > 0 {
            let e2 = eps[t - 1] * eps[t - 1];
            dh = [1.0 + beta * dh[0], e2 + beta * dh[1], h[t - 1] + beta * dh[2]];
        }
        let w = -0.5 * (1.0 / h[t] - eps[t] * eps[t] / (h[t] * h[t]));
        for k in 0..3 {
            g[k] += w * dh[k];
        }
    }
    g
}

/// Variance forecasts `h_{T+1}, ..., h_{T+n}` from the last residual and
/// conditional variance.
pub fn garch_forecast(omega: f64, alpha: f64, beta: f64, eps_last: f64, h_last: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    let mut v = omega + alpha * eps_last * eps_last + beta * h_last;
    out.push(v);
    for _ in 1..n {
        v = omega + (alpha + beta) * v;
        out.push(v);
    }
    out
}

/// GARCH(1,1) by maximum likelihood on fixed residuals, with the analytic
/// score. Returns the parameters and the log-likelihood.
pub fn estimate_garch(eps: &[f64], opts: &OptimOptions) -> ([f64; 3], f64) {
    let s2 = presample_variance(eps).max(1e-12);
    let n = eps.len().max(1) as f64;
    // omega is optimised relative to the sample variance to keep the
    // coordinates on a common scale
    let f = |x: &[f64]| -garch_loglik(eps, x[0] * s2, x[1], x[2]) / n;
    let grad = |x: &[f64], _fx: f64| {
        let g = garch_score(eps, x[0] * s2, x[1], x[2]);
        vec![-g[0] * s2 / n, -g[1] / n, -g[2] / n]
    };
    let bounds = Bounds { lower: vec![1e-8, 0.0, 0.0], upper: vec![10.0, 1.0, 1.0] };
    let x0 = [0.1, 0.05, 0.85];
    let r = multistart(&x0, &bounds, opts, |start| minimize_with_gradient(&f, grad, start, &bounds, opts));
    ([r.x[0] * s2, r.x[1], r.x[2]], -r.fx * n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn simulate(omega: f64, alpha: f64, beta: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = omega / (1.0 - alpha - beta);
        let mut out = Vec::with_capacity(n);
        let mut prev = 0.0f64;
        for i in 0..n + 200 {
            if i > 0 {
                h = omega + alpha * prev * prev + beta * h;
            }
            let z: f64 = StandardNormal.sample(&mut rng);
            prev = h.sqrt() * z;
            if i >= 200 {
                out.push(prev);
            }
        }
        out
    }

    #[test]
    fn one_step_variance_recursion() {
        let v = garch_forecast(0.1, 0.2, 0.7, 1.0, 1.0, 3);
        assert_eq!(v[0], 0.1 + 0.2 + 0.7);
        assert!((v[1] - (0.1 + 0.9 * v[0])).abs() < 1e-15);
        assert!((v[2] - (0.1 + 0.9 * v[1])).abs() < 1e-15);
    }

    #[test]
    fn score_matches_finite_differences() {
        let eps = simulate(0.1, 0.1, 0.8, 500, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let u: [f64; 3] = [
                rand::Rng::random::<f64>(&mut rng),
                rand::Rng::random::<f64>(&mut rng),
                rand::Rng::random::<f64>(&mut rng),
            ];
            let (w, a) = (0.02 + 0.3 * u[0], 0.02 + 0.3 * u[1]);
            let b = (0.9 - a) * u[2];
            let g = garch_score(&eps, w, a, b);
            let p = [w, a, b];
            for k in 0..3 {
                let step = 1e-6;
                let mut up = p;
                let mut dn = p;
                up[k] += step;
                dn[k] -= step;
                let fd = (garch_loglik(&eps, up[0], up[1], up[2]) - garch_loglik(&eps, dn[0], dn[1], dn[2])) / (2.0 * step);
                assert!((g[k] - fd).abs() <= 1e-4 * fd.abs().max(1.0), "k={k} analytic {} numeric {fd}", g[k]);
            }
        }
    }

    #[test]
    fn recovers_parameters() {
        let eps = simulate(0.1, 0.1, 0.8, 4000, 7);
        let opts = OptimOptions { starts: 1, ..Default::default() };
        let (p, ll) = estimate_garch(&eps, &opts);
        assert!((p[0] - 0.1).abs() < 0.06, "{p:?}");
        assert!((p[1] - 0.1).abs() < 0.04, "{p:?}");
        assert!((p[2] - 0.8).abs() < 0.08, "{p:?}");
        assert!(ll >= garch_loglik(&eps, 0.1, 0.1, 0.8));
    }

    #[test]
    fn inadmissible_is_minus_infinity() {
        let eps = [0.1, -0.2, 0.3];
        assert_eq!(garch_loglik(&eps, 0.1, 0.5, 0.5), f64::NEG_INFINITY);
        assert_eq!(garch_loglik(&eps, 0.0, 0.1, 0.1), f64::NEG_INFINITY);
    }
}
