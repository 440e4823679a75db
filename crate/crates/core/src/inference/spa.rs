//! Superior predictive ability test with consistent p-values.
//!
//! `d_k,t = L_bench,t - L_k,t` is positive when alternative `k` beats the
//! benchmark. The statistic is `max(0, max_k sqrt(P) mean(d_k) / w_k)` where
//! `w_k^2` is the stationary-bootstrap variance of `sqrt(P) mean(d_k)`, in
//! its closed form. Under the null the bootstrap recentres each alternative
//! at `mean(d_k)` unless it is significantly worse than the benchmark, in
//! which case it keeps its negative mean and drops out of the maximum. Each
//! replication is studentized with the same variance formula applied to the
//! resampled series, so the bootstrap statistic carries the sampling noise
//! of `w_k`.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::bootstrap::{replication_rng, resample_indices};
use super::{check_aligned, BootstrapConfig, TestResult};
use crate::error::{Error, Result};

/// Closed-form stationary-bootstrap variance of `sqrt(n) mean(x)`:
/// `g(0) + 2 sum_{h=1}^{n-1} (1 - h/n) a^h g_c(h)` with `a = 1 - 1/block`
/// and `g_c` the circular autocovariances. Written as the circulant
/// quadratic form `c' V c / n` and evaluated through the DFT.
pub(crate) struct KernelVariance {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    spectrum: Vec<f64>,
}

impl KernelVariance {
    pub(crate) fn new(n: usize, block_length: f64) -> Self {
        let a = 1.0 - 1.0 / block_length;
        let nf = n as f64;
        let mut v = vec![Complex::new(0.0, 0.0); n];
        v[0].re = 1.0;
        for (j, x) in v.iter_mut().enumerate().skip(1) {
            let jf = j as f64;
            x.re = (1.0 - jf / nf) * a.powi(j as i32) + (jf / nf) * a.powi((n - j) as i32);
        }
        let fft = FftPlanner::new().plan_fft_forward(n);
        fft.process(&mut v);
        KernelVariance { n, fft, spectrum: v.into_iter().map(|c| c.re).collect() }
    }

    pub(crate) fn variance(&self, x: &[f64]) -> f64 {
        let n = self.n as f64;
        let m = x.iter().sum::<f64>() / n;
        let mut c: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - m, 0.0)).collect();
        self.fft.process(&mut c);
        let q: f64 = c.iter().zip(&self.spectrum).map(|(z, s)| z.norm_sqr() * s).sum();
        (q / (n * n)).max(0.0)
    }
}

pub fn spa_test(benchmark: &[f64], alternatives: &[&[f64]], cfg: &BootstrapConfig) -> Result<TestResult> {
    cfg.validate()?;
    if alternatives.is_empty() {
        return Err(Error::Config("SPA test needs at least one alternative".into()));
    }
    let mut all: Vec<&[f64]> = vec![benchmark];
    all.extend_from_slice(alternatives);
    let p = check_aligned(&all)?;
    let n = p as f64;
    let d: Vec<Vec<f64>> = alternatives.iter().map(|a| benchmark.iter().zip(a.iter()).map(|(b, x)| b - x).collect()).collect();
    let dbar: Vec<f64> = d.iter().map(|v| v.iter().sum::<f64>() / n).collect();
    let kv = KernelVariance::new(p, cfg.block_length);
    let k = d.len();
    let omega: Vec<f64> = d.iter().map(|v| kv.variance(v).sqrt()).collect();
    let threshold = (2.0 * n.ln().ln().max(0.0)).sqrt();
    let scale: Vec<f64> = d.iter().map(|v| v.iter().fold(0.0f64, |m, x| m.max(x.abs()))).collect();
    let active: Vec<usize> = (0..k).filter(|&j| omega[j] > 1e-10 * scale[j]).collect();
    if active.is_empty() {
        // every differential is (numerically) constant
        let stat = dbar.iter().cloned().fold(0.0, f64::max);
        let p_value = if stat > 0.0 { 0.0 } else { 1.0 };
        return Ok(TestResult { statistic: stat, p_value, method: "spa".into() });
    }
    let stat = active.iter().map(|&j| n.sqrt() * dbar[j] / omega[j]).fold(0.0, f64::max);
    let recentre: Vec<f64> =
        (0..k).map(|j| if n.sqrt() * dbar[j] / omega[j].max(1e-300) >= -threshold { dbar[j] } else { 0.0 }).collect();
    let exceed: usize = (0..cfg.replications)
        .into_par_iter()
        .map(|b| {
            let idx = resample_indices(p, cfg.block_length, &mut replication_rng(cfg, b));
            let mut xs = vec![0.0; p];
            let t = active
                .iter()
                .map(|&j| {
                    for (x, &i) in xs.iter_mut().zip(&idx) {
                        *x = d[j][i];
                    }
                    let mean = xs.iter().sum::<f64>() / n;
                    // a resample can repeat one value; fall back to the sample scale
                    let w = kv.variance(&xs).sqrt();
                    let w = if w > 1e-10 * scale[j] { w } else { omega[j] };
                    n.sqrt() * (mean - recentre[j]) / w
                })
                .fold(0.0, f64::max);
            usize::from(t >= stat)
        })
        .sum();
    Ok(TestResult { statistic: stat, p_value: exceed as f64 / cfg.replications as f64, method: "spa".into() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    }

    #[test]
    fn identical_series_are_not_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = normals(351, &mut rng);
        let r = spa_test(&a, &[&a], &BootstrapConfig::default()).unwrap();
        assert!(r.p_value >= 0.1);
    }

    #[test]
    fn scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = normals(200, &mut rng);
        let b: Vec<f64> = normals(200, &mut rng).iter().map(|v| v - 0.1).collect();
        let cfg = BootstrapConfig { replications: 299, ..Default::default() };
        let r1 = spa_test(&a, &[&b], &cfg).unwrap();
        let a2: Vec<f64> = a.iter().map(|v| v * 7.5).collect();
        let b2: Vec<f64> = b.iter().map(|v| v * 7.5).collect();
        let r2 = spa_test(&a2, &[&b2], &cfg).unwrap();
        assert_eq!(r1.p_value, r2.p_value);
        assert!((r1.statistic - r2.statistic).abs() < 1e-9);
    }

    #[test]
    fn detects_a_better_alternative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = BootstrapConfig { replications: 299, ..Default::default() };
        let mut rejections = 0;
        for s in 0..20 {
            let bench = normals(351, &mut rng);
            let better: Vec<f64> = normals(351, &mut rng).iter().map(|v| v - 0.5).collect();
            let other = normals(351, &mut rng);
            let r = spa_test(&bench, &[&better, &other], &BootstrapConfig { seed: s, ..cfg.clone() }).unwrap();
            rejections += usize::from(r.p_value < 0.05);
        }
        assert!(rejections >= 19, "{rejections}/20");
    }

    #[test]
    fn kernel_variance_matches_lag_sum_and_bootstrap() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let e = normals(120, &mut rng);
        let x: Vec<f64> = (0..120).map(|t| e[t] + if t > 0 { 0.6 * e[t - 1] } else { 0.0 }).collect();
        let n = x.len();
        let m = x.iter().sum::<f64>() / n as f64;
        let a: f64 = 1.0 - 1.0 / 8.0;
        let gc = |h: usize| (0..n).map(|t| (x[t] - m) * (x[(t + h) % n] - m)).sum::<f64>() / n as f64;
        let direct = gc(0) + 2.0 * (1..n).map(|h| (1.0 - h as f64 / n as f64) * a.powi(h as i32) * gc(h)).sum::<f64>();
        let kv = KernelVariance::new(n, 8.0);
        assert!((kv.variance(&x) - direct).abs() < 1e-10 * direct);
        // Monte Carlo variance of sqrt(n) times the resampled mean
        let cfg = BootstrapConfig { replications: 20_000, block_length: 8.0, seed: 9 };
        let means: Vec<f64> = (0..cfg.replications)
            .map(|b| {
                let idx = resample_indices(n, 8.0, &mut replication_rng(&cfg, b));
                idx.iter().map(|&i| x[i]).sum::<f64>() / n as f64
            })
            .collect();
        let mm = means.iter().sum::<f64>() / means.len() as f64;
        let mc = n as f64 * means.iter().map(|v| (v - mm).powi(2)).sum::<f64>() / means.len() as f64;
        assert!((mc / direct - 1.0).abs() < 0.05, "{mc} vs {direct}");
    }
}
