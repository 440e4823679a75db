//! One-step density forecasts by simulation, their scoring, and the
//! naive/optimal back-transformation of log forecasts.

use std::io::Write;

use chrono::{Datelike, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{one_step_predictive, FittedModel, ModelId, Predictive};
use crate::scalar::{quantile_sorted, Real};
use crate::seed;
use crate::series::ArrivalSeries;

pub const DEFAULT_DRAWS: usize = 1000;

/// Models that get density forecasts.
pub const DENSITY_MODELS: [ModelId; 7] =
    [ModelId::M0, ModelId::M1, ModelId::M2, ModelId::M4, ModelId::M5, ModelId::M8, ModelId::M9];

/// Coverage levels reported in the density summary.
pub const ECP_LEVELS: [f64; 4] = [0.05, 0.25, 0.75, 0.95];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensityConfig {
    pub draws: usize,
    pub seed: u64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig { draws: DEFAULT_DRAWS, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityForecast {
    /// Last date of the information set; the forecast is for the next day.
    pub origin: NaiveDate,
    pub draws: Vec<f64>,
    pub source: String,
}

/// Seed for the draws of `producer` at `origin`.
pub fn density_seed(base: u64, producer: &str, origin: NaiveDate) -> u64 {
    seed::derive(base, &[seed::fnv1a(producer), origin.num_days_from_ce() as u64])
}

/// Draws `n` counts from a predictive distribution.
pub fn sample_predictive(pred: &Predictive, n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poisson = |lambda: f64, rng: &mut ChaCha8Rng| -> Result<f64> {
        if lambda <= 0.0 {
            return Ok(0.0);
        }
        Ok(Poisson::new(lambda).map_err(|e| Error::Domain(format!("Poisson rate {lambda}: {e}")))?.sample(rng))
    };
    match *pred {
        Predictive::LogNormal { mean, var } => {
            if !(var >= 0.0) || !mean.is_finite() {
                return Err(Error::Forecast(format!("missing or invalid log-scale variance {var}")));
            }
            let sd = var.sqrt();
            Ok((0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    (mean + sd * z).exp()
                })
                .collect())
        }
        Predictive::Poisson { mu } => (0..n).map(|_| poisson(mu, &mut rng)).collect(),
        Predictive::NegBin { mu, alpha } => {
            if alpha < 0.0 {
                return Err(Error::Domain(format!("negative dispersion {alpha}")));
            }
            if alpha == 0.0 || mu <= 0.0 {
                return (0..n).map(|_| poisson(mu, &mut rng)).collect();
            }
            // Gamma(1/alpha, alpha mu) mixing has mean mu and variance alpha mu^2
            let g = Gamma::new(1.0 / alpha, alpha * mu).map_err(|e| Error::Domain(e.to_string()))?;
            (0..n)
                .map(|_| {
                    let lambda = g.sample(&mut rng);
                    poisson(lambda, &mut rng)
                })
                .collect()
        }
        Predictive::Exponential { mu } => {
            if !(mu > 0.0) {
                return Err(Error::Domain(format!("exponential mean {mu}")));
            }
            let e = Exp::new(1.0 / mu).map_err(|e| Error::Domain(e.to_string()))?;
            Ok((0..n).map(|_| e.sample(&mut rng)).collect())
        }
    }
}

/// Simulated one-step density of `producer` fitted on `window`.
pub fn simulate_density(
    fitted: &FittedModel,
    window: &ArrivalSeries,
    producer: &str,
    cfg: &DensityConfig,
) -> Result<DensityForecast> {
    if cfg.draws == 0 {
        return Err(Error::Config("density needs at least one draw".into()));
    }
    let pred = one_step_predictive(fitted, window)?;
    let origin = window.date_at(window.len() - 1);
    let draws = sample_predictive(&pred, cfg.draws, density_seed(cfg.seed, producer, origin))?;
    Ok(DensityForecast { origin, draws, source: pred.tag().into() })
}

/// Ranked probability score of `draws` for the outcome `actual`:
/// `Σ_{j ≥ 0} (F(j) - 1{actual ≤ j})²` with `F` the empirical CDF. Terms
/// past the larger of the outcome and the largest draw vanish, so the sum is
/// computed over the constant pieces between jump points.
pub fn ranked_probability_score<T: Real>(draws: &[T], actual: T) -> Result<T> {
    if draws.is_empty() {
        return Err(Error::Domain("density has no draws".into()));
    }
    let n = T::from_usize_lossy(draws.len());
    // F(j) counts draws d with ceil(d) <= j
    let mut jumps: Vec<T> = draws.iter().map(|d| d.max(T::zero()).ceil()).collect();
    jumps.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
    let y = actual.max(T::zero()).ceil();
    let mut total = T::zero();
    let mut j = T::zero();
    let mut below = 0usize;
    loop {
        while below < jumps.len() && jumps[below] <= j {
            below += 1;
        }
        let f = T::from_usize_lossy(below) / n;
        let ind = if y <= j { T::one() } else { T::zero() };
        if below == jumps.len() && y <= j {
            break;
        }
        let next_jump = jumps.get(below).copied().unwrap_or(T::infinity());
        let next = if y > j { next_jump.min(y) } else { next_jump };
        total = total + (next - j) * (f - ind).powi(2);
        j = next;
    }
    Ok(total)
}

/// Sorts draws for quantile lookup.
fn sorted<T: Real>(draws: &[T]) -> Vec<T> {
    let mut s = draws.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
    s
}

/// Share of actuals strictly inside the central `theta` interval of the
/// matching density.
pub fn empirical_coverage<T: Real>(densities: &[&[T]], actuals: &[T], theta: T) -> Result<T> {
    if !(theta > T::zero() && theta < T::one()) {
        return Err(Error::Domain(format!("coverage level must lie in (0, 1), got {theta}")));
    }
    if densities.len() != actuals.len() || actuals.is_empty() {
        return Err(Error::Alignment("densities and actuals must be aligned and nonempty".into()));
    }
    let half = T::lit(0.5);
    let mut inside = 0usize;
    for (d, &y) in densities.iter().zip(actuals) {
        if d.is_empty() {
            return Err(Error::Domain("density has no draws".into()));
        }
        let s = sorted(d);
        let lo = quantile_sorted(&s, (T::one() - theta) * half);
        let hi = quantile_sorted(&s, (T::one() + theta) * half);
        inside += usize::from(lo < y && y < hi);
    }
    Ok(T::from_usize_lossy(inside) / T::from_usize_lossy(actuals.len()))
}

/// Level forecast `exp(ŷ + σ²/2)`, the conditional mean under a normal
/// log-scale error.
pub fn optimal_point_forecast<T: Real>(log_point: T, sigma2: T) -> Result<T> {
    if sigma2 < T::zero() {
        return Err(Error::Domain(format!("negative forecast variance {sigma2}")));
    }
    Ok((log_point + sigma2 * T::lit(0.5)).exp())
}

pub fn naive_point_forecast<T: Real>(log_point: T) -> T {
    log_point.exp()
}

/// Ratio of root mean squared errors, `forecast_a` over `forecast_b`.
pub fn rmsfe_ratio<T: Real>(forecast_a: &[T], forecast_b: &[T], actuals: &[T]) -> Result<T> {
    if forecast_a.len() != actuals.len() || forecast_b.len() != actuals.len() || actuals.is_empty() {
        return Err(Error::Alignment("forecasts and actuals must be aligned and nonempty".into()));
    }
    let mse = |f: &[T]| f.iter().zip(actuals).map(|(&f, &y)| (y - f) * (y - f)).sum::<T>();
    let b = mse(forecast_b);
    if !(b > T::zero()) {
        return Err(Error::Domain("reference forecast has zero error".into()));
    }
    Ok((mse(forecast_a) / b).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySummary<T = f64> {
    pub producer: String,
    pub avg_rps: T,
    /// Coverage at each of [`ECP_LEVELS`].
    pub ecp: Vec<T>,
}

pub fn summarize<T: Real>(producer: &str, densities: &[&[T]], actuals: &[T]) -> Result<DensitySummary<T>> {
    if densities.len() != actuals.len() || actuals.is_empty() {
        return Err(Error::Alignment("densities and actuals must be aligned and nonempty".into()));
    }
    let rps: T = densities
        .iter()
        .zip(actuals)
        .map(|(d, &y)| ranked_probability_score(d, y))
        .collect::<Result<Vec<T>>>()?
        .into_iter()
        .sum();
    let ecp = ECP_LEVELS.iter().map(|&l| empirical_coverage(densities, actuals, T::lit(l))).collect::<Result<_>>()?;
    Ok(DensitySummary { producer: producer.into(), avg_rps: rps / T::from_usize_lossy(actuals.len()), ecp })
}

pub fn write_summary_csv<T: Real, W: Write>(rows: &[DensitySummary<T>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["producer", "avg_rps", "ecp_05", "ecp_25", "ecp_75", "ecp_95"])?;
    for r in rows {
        let mut rec = vec![r.producer.clone(), r.avg_rps.to_string()];
        rec.extend(r.ecp.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
