use std::collections::BTreeSet;

use chrono::{Duration, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{weekday_index, ArrivalSeries};
use crate::error::{Error, Result};
use crate::poly;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GarchSpec {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Synthetic log-arrival process:
/// `y_t = m[weekday(t)] + u_t`, with `u_t` (seasonal) ARMA driven by
/// Gaussian shocks that are either homoskedastic (`noise_var`) or
/// GARCH(1,1). Counts are `max(1, round_half_up(exp(y_t)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSpec {
    pub start: NaiveDate,
    /// Log-level mean per weekday, Monday first.
    pub weekday_means: [f64; 7],
    #[serde(default)]
    pub ar: Vec<(usize, f64)>,
    #[serde(default)]
    pub seasonal_ar: Vec<(usize, f64)>,
    #[serde(default)]
    pub ma: Vec<(usize, f64)>,
    #[serde(default)]
    pub seasonal_ma: Vec<(usize, f64)>,
    #[serde(default)]
    pub garch: Option<GarchSpec>,
    #[serde(default)]
    pub noise_var: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub closing_days: BTreeSet<NaiveDate>,
}

fn default_burn_in() -> usize {
    200
}

impl DgpSpec {
    /// Weekly pattern resembling a call centre: busy Monday, quiet weekend.
    pub fn weekly(start: NaiveDate, level: f64) -> Self {
        let offsets = [0.25, 0.15, 0.10, 0.05, 0.0, -0.35, -0.6];
        DgpSpec {
            start,
            weekday_means: offsets.map(|o| level + o),
            ar: Vec::new(),
            seasonal_ar: Vec::new(),
            ma: Vec::new(),
            seasonal_ma: Vec::new(),
            garch: None,
            noise_var: 0.0,
            burn_in: default_burn_in(),
            closing_days: BTreeSet::new(),
        }
    }

    fn validate(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if let Some(g) = self.garch {
            if !(g.omega > 0.0 && g.alpha >= 0.0 && g.beta >= 0.0) {
                return Err(Error::Config("GARCH needs omega > 0 and nonnegative alpha, beta".into()));
            }
            if g.alpha + g.beta >= 1.0 {
                return Err(Error::Config(format!("explosive GARCH: alpha + beta = {}", g.alpha + g.beta)));
            }
        }
        if self.noise_var < 0.0 {
            return Err(Error::Config("negative noise variance".into()));
        }
        let ar = poly::expand_ar(&[&self.ar, &self.seasonal_ar]);
        if !poly::is_stationary(&ar) {
            return Err(Error::Config("explosive AR polynomial".into()));
        }
        let ma = poly::expand_ma(&[&self.ma, &self.seasonal_ma]);
        Ok((ar, ma))
    }
}

/// Log-scale path of the process (before rounding to counts).
pub(crate) fn simulate_log_path(spec: &DgpSpec, len: usize, seed: u64) -> Result<Vec<f64>> {
    let (ar, ma) = spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = len + spec.burn_in;
    let mut u = vec![0.0; total];
    let mut eps = vec![0.0; total];
    let (mut h, mut prev_eps2) = match spec.garch {
        Some(g) => {
            let v = g.omega / (1.0 - g.alpha - g.beta);
            (v, v)
        }
        None => (spec.noise_var, 0.0),
    };
    for t in 0..total {
        if let Some(g) = spec.garch {
            if t > 0 {
                h = g.omega + g.alpha * prev_eps2 + g.beta * h;
            }
        }
        let z: f64 = StandardNormal.sample(&mut rng);
        let e = h.sqrt() * z;
        eps[t] = e;
        prev_eps2 = e * e;
        let mut v = e;
        for (i, a) in ar.iter().enumerate() {
            if t > i {
                v += a * u[t - 1 - i];
            }
        }
        for (j, b) in ma.iter().enumerate() {
            if t > j {
                v += b * eps[t - 1 - j];
            }
        }
        u[t] = v;
    }
    Ok((0..len)
        .map(|t| {
            let date = spec.start + Duration::days(t as i64);
            spec.weekday_means[weekday_index(date)] + u[spec.burn_in + t]
        })
        .collect())
}

/// Simulates a reproducible daily series of `len` observations.
pub fn simulate_dgp(spec: &DgpSpec, len: usize, seed: u64) -> Result<ArrivalSeries> {
    let y = simulate_log_path(spec, len, seed)?;
    let counts: Vec<u64> = y.iter().map(|v| round_half_up(v.exp()).max(1.0) as u64).collect();
    let raw: Vec<(NaiveDate, u64)> = counts
        .iter()
        .enumerate()
        .map(|(t, &c)| {
            let date = spec.start + Duration::days(t as i64);
            (date, if spec.closing_days.contains(&date) { 0 } else { c })
        })
        .collect();
    super::validate_and_impute(&raw, &spec.closing_days)
}

fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}
