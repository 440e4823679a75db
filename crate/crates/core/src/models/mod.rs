//! The fourteen forecasting models, their specification search and the
//! in-sample diagnostic tests.
//!
//! Models are fitted on a window of an [`ArrivalSeries`] and forecast from a
//! window ending at the forecast origin. Forecasting re-runs the model's
//! filter over the window with the stored parameters, so a fit can be
//! reused on a longer window when refits are throttled.

mod arma;
mod count;
pub mod diagnostics;
mod garch;
mod holt_winters;
mod mem;
mod par;
mod params;
mod selection;
mod srw;
mod tvd;

use std::fmt;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::ArrivalSeries;

pub use arma::{fit_garch_layer, fit_linear_arma, linear_loglik};
pub use count::{count_loglik, count_score, fit_count};
pub use garch::{garch_forecast, garch_loglik, garch_score, garch_variance};
pub use holt_winters::{fit_holt_winters, holt_winters_sse};
pub use mem::fit_mem;
pub use par::fit_par;
pub use params::Params;
pub use selection::{select_specification, SelectionOptions, SelectionOutcome};
pub use srw::fit_srw;
pub use tvd::{fit_tvd_ar, logistic_transition};

/// Longest forecast horizon, one month of days.
pub const MAX_HORIZON: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelId {
    M0,
    M1,
    M2,
    M3,
    M4,
    M5,
    M6,
    M7,
    M8,
    M9,
    M10,
    M11,
    M12,
    M13,
}

impl ModelId {
    pub const ALL: [ModelId; 14] = [
        ModelId::M0,
        ModelId::M1,
        ModelId::M2,
        ModelId::M3,
        ModelId::M4,
        ModelId::M5,
        ModelId::M6,
        ModelId::M7,
        ModelId::M8,
        ModelId::M9,
        ModelId::M10,
        ModelId::M11,
        ModelId::M12,
        ModelId::M13,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn family(self) -> Family {
        Family::ALL[self.index()]
    }

    pub fn parse(s: &str) -> Option<ModelId> {
        ModelId::ALL.into_iter().find(|m| m.to_string() == s)
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}", self.index())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Family {
    Srw,
    Armax,
    ArmaxGarch,
    TvdAr,
    Sarmax,
    SarmaxGarch,
    Par,
    Airline,
    Poisson,
    Negbin,
    Exponential,
    Mem,
    SplineSarx,
    HoltWinters,
}

impl Family {
    /// In model-id order, so `Family::ALL[i]` is the family of `Mi`.
    pub const ALL: [Family; 14] = [
        Family::Srw,
        Family::Armax,
        Family::ArmaxGarch,
        Family::TvdAr,
        Family::Sarmax,
        Family::SarmaxGarch,
        Family::Par,
        Family::Airline,
        Family::Poisson,
        Family::Negbin,
        Family::Exponential,
        Family::Mem,
        Family::SplineSarx,
        Family::HoltWinters,
    ];

    pub fn model_id(self) -> ModelId {
        ModelId::ALL[Family::ALL.iter().position(|&f| f == self).expect("listed")]
    }

    /// Families estimated by Gaussian likelihood on a regression with
    /// (seasonal) ARMA errors.
    pub fn is_linear(self) -> bool {
        matches!(
            self,
            Family::Armax | Family::ArmaxGarch | Family::Sarmax | Family::SarmaxGarch | Family::Airline | Family::SplineSarx
        )
    }

    pub fn is_count(self) -> bool {
        matches!(self, Family::Poisson | Family::Negbin | Family::Exponential)
    }

    /// GARCH families share the mean specification of this family.
    pub fn mean_family(self) -> Family {
        match self {
            Family::ArmaxGarch => Family::Armax,
            Family::SarmaxGarch => Family::Sarmax,
            f => f,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Differencing {
    /// Apply `1 - L`.
    pub regular: bool,
    /// Apply `1 - L^7`.
    pub seasonal: bool,
}

/// Declarative model structure. Lags are positive day offsets; seasonal
/// lags are multiples of seven and enter as separate multiplicative factors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    #[serde(default)]
    pub ar_lags: Vec<usize>,
    #[serde(default)]
    pub ma_lags: Vec<usize>,
    #[serde(default)]
    pub sar_lags: Vec<usize>,
    #[serde(default)]
    pub sma_lags: Vec<usize>,
    #[serde(default)]
    pub include_dummies: bool,
    #[serde(default)]
    pub garch: bool,
    #[serde(default)]
    pub differencing: Differencing,
}

pub const MAX_ARMA_LAG: usize = 28;
pub const SEASONAL_LAGS: [usize; 4] = [7, 14, 21, 28];

impl ModelSpec {
    fn bare(family: Family) -> Self {
        ModelSpec {
            family,
            ar_lags: vec![],
            ma_lags: vec![],
            sar_lags: vec![],
            sma_lags: vec![],
            include_dummies: true,
            garch: false,
            differencing: Differencing::default(),
        }
    }

    /// The specification listed for each model in the model catalogue,
    /// used when no search is run.
    pub fn default_for(id: ModelId) -> Self {
        let family = id.family();
        let mut s = ModelSpec::bare(family);
        match family {
            Family::Srw => s.include_dummies = false,
            Family::Armax | Family::ArmaxGarch => {
                s.ar_lags = vec![1, 7, 8];
                s.ma_lags = vec![1];
            }
            Family::TvdAr => s.ar_lags = vec![1],
            Family::Sarmax | Family::SarmaxGarch => {
                s.ar_lags = vec![1];
                s.sar_lags = vec![7];
                s.ma_lags = vec![1];
                s.sma_lags = vec![28];
            }
            Family::Par => s.ar_lags = vec![1, 2],
            Family::Airline => {
                s.include_dummies = false;
                s.ma_lags = vec![1];
                s.sma_lags = vec![8];
                s.differencing = Differencing { regular: true, seasonal: true };
            }
            Family::Poisson | Family::Negbin | Family::Exponential | Family::Mem => s.ar_lags = vec![1],
            Family::SplineSarx => {
                s.ar_lags = vec![1];
                s.sar_lags = vec![7];
            }
            Family::HoltWinters => s.include_dummies = false,
        }
        s.garch = matches!(family, Family::ArmaxGarch | Family::SarmaxGarch);
        s
    }

    pub fn validate(&self) -> Result<()> {
        let check = |lags: &[usize], what: &str| -> Result<()> {
            if lags.iter().any(|&l| l == 0 || l > MAX_ARMA_LAG) {
                return Err(Error::Config(format!("{what} lags must lie in 1..={MAX_ARMA_LAG}")));
            }
            let mut sorted = lags.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != lags.len() {
                return Err(Error::Config(format!("duplicate {what} lags")));
            }
            Ok(())
        };
        check(&self.ar_lags, "AR")?;
        check(&self.ma_lags, "MA")?;
        check(&self.sar_lags, "SAR")?;
        check(&self.sma_lags, "SMA")?;
        // the airline model's SMA(8) term is the one non-weekly seasonal lag
        let seasonal_ok = |lags: &[usize]| lags.iter().all(|l| SEASONAL_LAGS.contains(l));
        if !seasonal_ok(&self.sar_lags) || (self.family != Family::Airline && !seasonal_ok(&self.sma_lags)) {
            return Err(Error::Config("seasonal lags must be among 7, 14, 21, 28".into()));
        }
        if self.garch != matches!(self.family, Family::ArmaxGarch | Family::SarmaxGarch) {
            return Err(Error::Config(format!("GARCH flag inconsistent with family {:?}", self.family)));
        }
        Ok(())
    }

    /// Sorted copy, so equal structures compare equal.
    pub fn normalized(mut self) -> Self {
        for v in [&mut self.ar_lags, &mut self.ma_lags, &mut self.sar_lags, &mut self.sma_lags] {
            v.sort_unstable();
        }
        self
    }
}

/// Estimated model on one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub params: Params,
    pub loglik: f64,
    pub sic: f64,
    pub aic: f64,
    /// Observations entering the likelihood.
    pub n_obs: usize,
    pub n_params: usize,
    pub residuals: Vec<f64>,
    pub cond_variance: Option<Vec<f64>>,
    /// First and last date of the estimation window.
    pub estimation_window: (NaiveDate, NaiveDate),
    pub warnings: Vec<String>,
}

impl FittedModel {
    pub(crate) fn new(
        spec: ModelSpec,
        params: Params,
        loglik: f64,
        n_obs: usize,
        n_params: usize,
        residuals: Vec<f64>,
        cond_variance: Option<Vec<f64>>,
        window: &ArrivalSeries,
    ) -> Self {
        let n = n_obs as f64;
        let k = n_params as f64;
        FittedModel {
            spec,
            params,
            loglik,
            sic: -2.0 * loglik + k * n.ln(),
            aic: -2.0 * loglik + 2.0 * k,
            n_obs,
            n_params,
            residuals,
            cond_variance,
            estimation_window: (window.start(), window.date_at(window.len() - 1)),
            warnings: Vec::new(),
        }
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Residual variance, the fallback predictive variance when no
    /// conditional variance model is present.
    pub fn residual_variance(&self) -> f64 {
        self.params.get("sigma2").unwrap_or_else(|| {
            let n = self.residuals.len().max(1) as f64;
            self.residuals.iter().map(|e| e * e).sum::<f64>() / n
        })
    }

    /// Gaussian log-density of each residual, aligned with `residuals` so
    /// the last term belongs to the window's last date. Summing a common
    /// tail lets models that condition on different presamples be compared
    /// on the same days. `None` where the likelihood is not Gaussian in
    /// log counts.
    pub fn loglik_terms(&self) -> Option<Vec<f64>> {
        let f = self.spec.family;
        if f.is_count() || matches!(f, Family::Mem | Family::HoltWinters) {
            return None;
        }
        let term = |e: f64, v: f64| -0.5 * (std::f64::consts::TAU.ln() + v.ln() + e * e / v);
        Some(match &self.cond_variance {
            Some(h) => self.residuals.iter().zip(h).map(|(&e, &v)| term(e, v)).collect(),
            None => {
                let s2 = self.residual_variance();
                self.residuals.iter().map(|&e| term(e, s2)).collect()
            }
        })
    }
}

/// Numerical settings shared by the estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub starts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub ftol: f64,
    /// Parameters to start from (e.g. the previous origin's estimates).
    pub warm_start: Option<Params>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { starts: 5, seed: 0x5eed, max_iter: 500, ftol: 1e-8, warm_start: None }
    }
}

impl FitOptions {
    pub(crate) fn optim(&self) -> crate::optim::OptimOptions {
        crate::optim::OptimOptions { max_iter: self.max_iter, ftol: self.ftol, starts: self.starts, seed: self.seed }
    }

    /// Start vector from the warm start if its names match.
    pub(crate) fn start_from(&self, names: &[String], fallback: Vec<f64>) -> Vec<f64> {
        match &self.warm_start {
            Some(p) if p.names().len() >= names.len() && names.iter().zip(p.names()).all(|(a, b)| a == b) => {
                p.values()[..names.len()].to_vec()
            }
            _ => fallback,
        }
    }
}

/// One-step predictive distribution of the next count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Predictive {
    /// `log Y ~ N(mean, var)`.
    LogNormal { mean: f64, var: f64 },
    Poisson { mu: f64 },
    /// Gamma-Poisson mixture with variance `mu (1 + alpha mu)`.
    NegBin { mu: f64, alpha: f64 },
    Exponential { mu: f64 },
}

impl Predictive {
    pub fn tag(&self) -> &'static str {
        match self {
            Predictive::LogNormal { .. } => "lognormal",
            Predictive::Poisson { .. } => "poisson",
            Predictive::NegBin { .. } => "negbin",
            Predictive::Exponential { .. } => "exponential",
        }
    }
}

/// Forecast of the count on `target`, issued at `origin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointForecast {
    pub origin: NaiveDate,
    pub horizon: usize,
    pub target: NaiveDate,
    /// Level-scale forecast; zero on closing days.
    pub point: f64,
    pub log_point: Option<f64>,
    /// Variance of the log-scale forecast error.
    pub forecast_variance: Option<f64>,
}

/// Raw per-horizon output of a family before calendar post-processing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RawForecast {
    pub point: f64,
    pub log_point: Option<f64>,
    pub variance: Option<f64>,
}

impl RawForecast {
    pub(crate) fn log(log_point: f64, variance: Option<f64>) -> Self {
        RawForecast { point: log_point.exp(), log_point: Some(log_point), variance }
    }

    pub(crate) fn level(point: f64) -> Self {
        RawForecast { point, log_point: None, variance: None }
    }
}

/// Natural logs of a window's (imputed, positive) counts.
pub(crate) fn log_counts(window: &ArrivalSeries) -> Result<Vec<f64>> {
    window
        .counts()
        .iter()
        .map(|&c| {
            if c == 0 {
                Err(Error::Domain("zero count in estimation window".into()))
            } else {
                Ok((c as f64).ln())
            }
        })
        .collect()
}

pub(crate) fn check_window(window: &ArrivalSeries, min_len: usize) -> Result<()> {
    if window.len() < min_len {
        return Err(Error::Estimation(format!(
            "window of {} observations is shorter than the required {min_len}",
            window.len()
        )));
    }
    Ok(())
}

/// Fits `spec` on `window`.
pub fn fit(spec: &ModelSpec, window: &ArrivalSeries, opts: &FitOptions) -> Result<FittedModel> {
    spec.validate()?;
    check_window(window, 14)?;
    match spec.family {
        Family::Srw => fit_srw(window),
        f if f.is_linear() => fit_linear_arma(spec, window, opts),
        Family::TvdAr => fit_tvd_ar(spec, window, opts),
        Family::Par => fit_par(window),
        f if f.is_count() => fit_count(spec, window, opts),
        Family::Mem => fit_mem(window, opts),
        Family::HoltWinters => fit_holt_winters(window, opts),
        _ => unreachable!("all families dispatched"),
    }
}

/// Re-evaluates `fitted` on a (longer) window without re-estimating:
/// residuals, likelihood and criteria are recomputed at the stored
/// parameters.
pub fn refilter(fitted: &FittedModel, window: &ArrivalSeries) -> Result<FittedModel> {
    check_window(window, 14)?;
    let mut out = match fitted.spec.family {
        Family::Srw => srw::refilter(fitted, window),
        f if f.is_linear() => arma::refilter(fitted, window),
        Family::TvdAr => tvd::refilter(fitted, window),
        Family::Par => par::refilter(fitted, window),
        f if f.is_count() => count::refilter(fitted, window),
        Family::Mem => mem::refilter(fitted, window),
        Family::HoltWinters => holt_winters::refilter(fitted, window),
        _ => unreachable!("all families dispatched"),
    }?;
    out.warnings = fitted.warnings.clone();
    Ok(out)
}

/// Forecasts for horizons `1..=h_max` from the last date of `window`.
/// Targets on closing days get a zero point forecast.
pub fn forecast(fitted: &FittedModel, window: &ArrivalSeries, h_max: usize) -> Result<Vec<PointForecast>> {
    if h_max == 0 || h_max > MAX_HORIZON {
        return Err(Error::Forecast(format!("horizon must lie in 1..={MAX_HORIZON}, got {h_max}")));
    }
    check_window(window, 14)?;
    let raw = match fitted.spec.family {
        Family::Srw => srw::forecast(fitted, window, h_max),
        f if f.is_linear() => arma::forecast(fitted, window, h_max),
        Family::TvdAr => tvd::forecast(fitted, window, h_max),
        Family::Par => par::forecast(fitted, window, h_max),
        f if f.is_count() => count::forecast(fitted, window, h_max),
        Family::Mem => mem::forecast(fitted, window, h_max),
        Family::HoltWinters => holt_winters::forecast(fitted, window, h_max),
        _ => unreachable!("all families dispatched"),
    }?;
    let origin = window.date_at(window.len() - 1);
    Ok(raw
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let target = origin + Duration::days(i as i64 + 1);
            let closed = window.is_closing(target);
            PointForecast {
                origin,
                horizon: i + 1,
                target,
                point: if closed { 0.0 } else { r.point.max(0.0) },
                log_point: r.log_point,
                forecast_variance: r.variance,
            }
        })
        .collect())
}

/// One-step predictive distribution at the end of `window`, used for
/// density forecasts.
pub fn one_step_predictive(fitted: &FittedModel, window: &ArrivalSeries) -> Result<Predictive> {
    match fitted.spec.family {
        f if f.is_count() => count::predictive(fitted, window),
        _ => {
            // closing-day zeroing only touches the level forecast
            let f = forecast(fitted, window, 1)?;
            let mean = f[0].log_point.ok_or_else(|| Error::Forecast("model has no log-scale forecast".into()))?;
            let var = f[0].forecast_variance.unwrap_or_else(|| fitted.residual_variance());
            Ok(Predictive::LogNormal { mean, var })
        }
    }
}
