//! Seasonal random walk: tomorrow looks like the same weekday last week.

use super::{log_counts, FittedModel, ModelId, ModelSpec, Params, RawForecast};
use crate::error::Result;
use crate::series::ArrivalSeries;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn weekly_log_differences(window: &ArrivalSeries) -> Result<Vec<f64>> {
    let y = log_counts(window)?;
    Ok((7..y.len()).map(|t| y[t] - y[t - 7]).collect())
}

fn build(window: &ArrivalSeries, sigma2: Option<f64>) -> Result<FittedModel> {
    let e = weekly_log_differences(window)?;
    let n = e.len() as f64;
    let ss: f64 = e.iter().map(|v| v * v).sum();
    let s2 = sigma2.unwrap_or((ss / n).max(1e-300));
    let ll = -0.5 * n * (LN_2PI + s2.ln()) - ss / (2.0 * s2);
    let params = Params::from_pairs([("sigma2", s2)]);
    Ok(FittedModel::new(ModelSpec::default_for(ModelId::M0), params, ll, e.len(), 1, e, None, window))
}

/// The only estimated quantity is the variance of weekly log changes, used
/// for density forecasts.
pub fn fit_srw(window: &ArrivalSeries) -> Result<FittedModel> {
    build(window, None)
}

pub(crate) fn refilter(fitted: &FittedModel, window: &ArrivalSeries) -> Result<FittedModel> {
    build(window, fitted.param("sigma2"))
}

pub(crate) fn forecast(fitted: &FittedModel, window: &ArrivalSeries, h_max: usize) -> Result<Vec<RawForecast>> {
    let counts = window.counts();
    let t = counts.len() - 1;
    let s2 = fitted.residual_variance();
    Ok((1..=h_max)
        .map(|h| {
            // most recent observed day with the target's weekday
            let k = h.div_ceil(7);
            let y = counts[t + h - 7 * k] as f64;
            RawForecast { point: y, log_point: Some(y.ln()), variance: Some(k as f64 * s2) }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    #[test]
    fn repeats_last_week() {
        let counts: Vec<u64> = (0..21).map(|t| 100 + t as u64).collect();
        let mut c = counts.clone();
        c[20 - 6] = 123; // same weekday as origin + 7... and origin + 1
        let w = ArrivalSeries::from_counts(NaiveDate::from_ymd_opt(2021, 3, 1).unwrap(), c, Default::default()).unwrap();
        let fm = fit_srw(&w).unwrap();
        let f = forecast(&fm, &w, 14).unwrap();
        assert_eq!(f[0].point, 123.0);
        assert_eq!(f[7].point, 123.0);
        assert_eq!(f[6].point, 120.0);
        assert_eq!(f[13].point, 120.0);
        assert_eq!(fm.n_obs, 14);
    }
}
