//! Box-constrained quasi-Newton minimisation.
//!
//! Projected BFGS with an Armijo backtracking search along the projected
//! path. Gradients are central finite differences unless the caller
//! supplies an analytic one. [`minimize_multistart`] reruns the search from
//! deterministic perturbations of the initial point and keeps the best.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn unbounded(n: usize) -> Self {
        Bounds { lower: vec![f64::NEG_INFINITY; n], upper: vec![f64::INFINITY; n] }
    }

    pub fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimOptions {
    pub max_iter: usize,
    /// Relative objective change treated as converged.
    pub ftol: f64,
    pub starts: usize,
    pub seed: u64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions { max_iter: 500, ftol: 1e-8, starts: 5, seed: 0x5eed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl OptimResult {
    /// Indices of coordinates sitting on a bound.
    pub fn at_bounds(&self, bounds: &Bounds) -> Vec<usize> {
        (0..self.x.len())
            .filter(|&i| (self.x[i] - bounds.lower[i]).abs() < 1e-9 || (self.x[i] - bounds.upper[i]).abs() < 1e-9)
            .collect()
    }
}

fn eval<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Central-difference gradient respecting the box (one-sided at bounds).
pub fn numeric_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], bounds: &Bounds, fx: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * x[i].abs().max(1e-2);
        let up = (x[i] + h).min(bounds.upper[i]);
        let dn = (x[i] - h).max(bounds.lower[i]);
        xp[i] = up;
        let fu = if up > x[i] { eval(f, &xp) } else { fx };
        xp[i] = dn;
        let fd = if dn < x[i] { eval(f, &xp) } else { fx };
        xp[i] = x[i];
        let width = up - dn;
        g[i] = if width > 0.0 && fu.is_finite() && fd.is_finite() {
            (fu - fd) / width
        } else if fu.is_finite() && up > x[i] {
            (fu - fx) / (up - x[i])
        } else if fd.is_finite() && dn < x[i] {
            (fx - fd) / (x[i] - dn)
        } else {
            0.0
        };
    }
    g
}

/// Central-difference Hessian (unconstrained).
pub fn numeric_hessian<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut hess = vec![vec![0.0; n]; n];
    let steps: Vec<f64> = x.iter().map(|v| 1e-4 * v.abs().max(1e-2)).collect();
    let mut xp = x.to_vec();
    let f0 = f(x);
    for i in 0..n {
        for j in i..n {
            let v = if i == j {
                xp[i] = x[i] + steps[i];
                let fp = f(&xp);
                xp[i] = x[i] - steps[i];
                let fm = f(&xp);
                xp[i] = x[i];
                (fp - 2.0 * f0 + fm) / (steps[i] * steps[i])
            } else {
                let mut corner = |si: f64, sj: f64| {
                    xp[i] = x[i] + si * steps[i];
                    xp[j] = x[j] + sj * steps[j];
                    let v = f(&xp);
                    xp[i] = x[i];
                    xp[j] = x[j];
                    v
                };
                (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                    / (4.0 * steps[i] * steps[j])
            };
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    hess
}

/// Minimises `f` over the box from `x0` using numerical gradients.
pub fn minimize<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], bounds: &Bounds, opts: &OptimOptions) -> OptimResult {
    minimize_with_gradient(f, |x: &[f64], fx: f64| numeric_gradient(f, x, bounds, fx), x0, bounds, opts)
}

/// Minimises `f` with a caller-supplied gradient `grad(x, f(x))`.
pub fn minimize_with_gradient<F, G>(f: &F, grad: G, x0: &[f64], bounds: &Bounds, opts: &OptimOptions) -> OptimResult
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], f64) -> Vec<f64>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut fx = eval(f, &x);
    if n == 0 || !fx.is_finite() {
        return OptimResult { x, fx, iterations: 0, converged: n == 0 };
    }
    let mut g = grad(&x, fx);
    let mut hinv = identity(n);
    let mut small_steps = 0;
    let mut converged = false;
    let mut iterations = 0;
    let mut fresh_h = true;
    while iterations < opts.max_iter {
        iterations += 1;
        let active: Vec<bool> = (0..n)
            .map(|i| (x[i] <= bounds.lower[i] && g[i] > 0.0) || (x[i] >= bounds.upper[i] && g[i] < 0.0))
            .collect();
        let pg_norm = (0..n).filter(|&i| !active[i]).map(|i| g[i].abs()).fold(0.0, f64::max);
        if pg_norm < 1e-10 * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
        let mut d = vec![0.0; n];
        for i in 0..n {
            if active[i] {
                continue;
            }
            d[i] = -(0..n).filter(|&j| !active[j]).map(|j| hinv[i][j] * g[j]).sum::<f64>();
        }
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if slope >= 0.0 || !slope.is_finite() {
            hinv = identity(n);
            fresh_h = true;
            for i in 0..n {
                d[i] = if active[i] { 0.0 } else { -g[i] };
            }
            slope = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        }
        if fresh_h {
            // first step of a steepest-descent restart: cap its length
            let dn = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let cap = 0.1 * xn.max(1.0);
            if dn > cap {
                let s = cap / dn;
                d.iter_mut().for_each(|v| *v *= s);
                slope *= s;
            }
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            bounds.project(&mut xn);
            let fnew = eval(f, &xn);
            let decrease: f64 = xn.iter().zip(&x).zip(&g).map(|((a, b), gi)| (a - b) * gi).sum();
            let sufficient = if decrease < 0.0 { fnew <= fx + 1e-4 * decrease } else { fnew < fx };
            if fnew.is_finite() && sufficient {
                accepted = Some((xn, fnew));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            if fresh_h {
                converged = true;
                break;
            }
            hinv = identity(n);
            fresh_h = true;
            continue;
        };
        let gn = grad(&xn, fnew);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        let ss = s.iter().map(|v| v * v).sum::<f64>();
        let yy = yv.iter().map(|v| v * v).sum::<f64>();
        if sy > 1e-12 * (ss * yy).sqrt() && sy > 0.0 {
            if fresh_h {
                let scale = sy / yy;
                for (i, row) in hinv.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = if i == j { scale } else { 0.0 };
                    }
                }
            }
            bfgs_update(&mut hinv, &s, &yv, sy);
            fresh_h = false;
        }
        let rel = (fx - fnew).abs() / (fx.abs() + 1e-12).max(1e-12);
        x = xn;
        fx = fnew;
        g = gn;
        if rel < opts.ftol {
            small_steps += 1;
            if small_steps >= 3 {
                converged = true;
                break;
            }
        } else {
            small_steps = 0;
        }
    }
    OptimResult { x, fx, iterations, converged }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i][j] * y[j]).sum()).collect();
    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Runs [`minimize`] from `x0` and from `opts.starts - 1` deterministic
/// perturbations of it, returning the best result.
pub fn minimize_multistart<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], bounds: &Bounds, opts: &OptimOptions) -> OptimResult {
    multistart(x0, bounds, opts, |start| minimize(f, start, bounds, opts))
}

pub(crate) fn multistart<R: FnMut(&[f64]) -> OptimResult>(
    x0: &[f64],
    bounds: &Bounds,
    opts: &OptimOptions,
    mut run: R,
) -> OptimResult {
    let mut best = run(x0);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 1..opts.starts.max(1) {
        let mut start: Vec<f64> = x0
            .iter()
            .map(|&v| v + (0.1 * v.abs() + 0.05) * (rng.random::<f64>() * 2.0 - 1.0))
            .collect();
        bounds.project(&mut start);
        let r = run(&start);
        if r.fx < best.fx {
            best = r;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_minimum() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = minimize(&f, &[-1.2, 1.0], &Bounds::unbounded(2), &OptimOptions::default());
        assert!((r.x[0] - 1.0).abs() < 1e-4, "{:?}", r);
        assert!((r.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn respects_bounds() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2);
        let b = Bounds { lower: vec![0.0, 0.0], upper: vec![2.0, 5.0] };
        let r = minimize(&f, &[1.0, 1.0], &b, &OptimOptions::default());
        assert!((r.x[0] - 2.0).abs() < 1e-9);
        assert!(r.x[1].abs() < 1e-9);
        assert_eq!(r.at_bounds(&b), vec![0, 1]);
    }

    #[test]
    fn infinite_regions_are_avoided() {
        let f = |x: &[f64]| if x[0] <= 0.0 { f64::INFINITY } else { x[0] - x[0].ln() };
        let r = minimize(&f, &[5.0], &Bounds::unbounded(1), &OptimOptions::default());
        assert!((r.x[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn multistart_is_deterministic() {
        let f = |x: &[f64]| (x[0] * x[0] - 1.0).powi(2) + 0.1 * x[0];
        let o = OptimOptions::default();
        let a = minimize_multistart(&f, &[0.5], &Bounds::unbounded(1), &o);
        let b = minimize_multistart(&f, &[0.5], &Bounds::unbounded(1), &o);
        assert_eq!(a, b);
    }

    #[test]
    fn hessian_of_quadratic() {
        let f = |x: &[f64]| 2.0 * x[0] * x[0] + 3.0 * x[0] * x[1] + x[1] * x[1];
        let h = numeric_hessian(&f, &[0.3, -0.2]);
        assert!((h[0][0] - 4.0).abs() < 1e-5);
        assert!((h[0][1] - 3.0).abs() < 1e-5);
        assert!((h[1][1] - 2.0).abs() < 1e-5);
    }
}
