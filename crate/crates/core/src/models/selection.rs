//! Specification search on the first estimation window.
//!
//! 1. Lag orders are ranked by SIC in a Hannan-Rissanen regression: the
//!    dependent variable on the day dummies, its own lags and lags of the
//!    residuals from a long autoregression. Order `p` means lags `1..=p`;
//!    a seasonal order `K` means lags `7, 14, ..., K`. The search moves one
//!    order at a time until no move lowers SIC.
//! 2. Starting from each of the best few orders, the model is fitted by ML
//!    and the least significant ARMA term is dropped until every remaining
//!    term is significant.
//! 3. The first reduced model whose residuals pass the LM autocorrelation
//!    test is accepted. If none passes the SIC-best reduced model is
//!    returned with a warning.
//!
//! GARCH families search their mean family's structure.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::arma::{standard_errors, LinearData};
use super::diagnostics::{lm_serial_corr_with, DiagnosticResult};
use super::{fit_linear_arma, log_counts, FitOptions, FittedModel, Family, ModelSpec, MAX_ARMA_LAG};
use crate::error::{Error, Result};
use crate::linalg::ols;
use crate::series::{weekday_index, ArrivalSeries};

#[derive(Debug, Clone)]
pub struct SelectionOptions {
    /// Two-sided significance level of the elimination step.
    pub significance: f64,
    /// Highest order in the LM autocorrelation screen.
    pub lm_order: usize,
    pub lm_level: f64,
    /// Reduced models tried in the LM screen.
    pub max_candidates: usize,
    pub fit: FitOptions,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        SelectionOptions {
            significance: 0.05,
            lm_order: 8,
            lm_level: 0.05,
            max_candidates: 5,
            fit: FitOptions { starts: 1, ..Default::default() },
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelectionOutcome {
    pub spec: ModelSpec,
    /// LM screen on the accepted model, when it was run.
    pub lm: Option<DiagnosticResult>,
    pub passed_lm: bool,
    pub warnings: Vec<String>,
}

/// Orders `[p, q, K, L]` and the admissible values of each.
type Orders = [usize; 4];

struct Grid {
    values: [Vec<usize>; 4],
}

impl Grid {
    fn for_family(family: Family) -> Option<Grid> {
        let full: Vec<usize> = (0..=MAX_ARMA_LAG).collect();
        let short: Vec<usize> = (0..7).collect();
        let seasonal = vec![0, 7, 14, 21, 28];
        let none = vec![0];
        Some(match family {
            Family::Armax => Grid { values: [full.clone(), full, none.clone(), none] },
            Family::Sarmax => Grid { values: [short.clone(), short, seasonal.clone(), seasonal] },
            Family::SplineSarx => Grid { values: [short, none.clone(), seasonal, none] },
            Family::TvdAr => Grid { values: [full, none.clone(), none.clone(), none] },
            _ => return None,
        })
    }
}

fn lags(order: usize, seasonal: bool) -> Vec<usize> {
    if seasonal {
        (7..=order).step_by(7).collect()
    } else {
        (1..=order).collect()
    }
}

fn spec_for(base: &ModelSpec, o: Orders) -> ModelSpec {
    ModelSpec {
        ar_lags: lags(o[0], false),
        ma_lags: lags(o[1], false),
        sar_lags: lags(o[2], true),
        sma_lags: lags(o[3], true),
        ..base.clone()
    }
}

/// Regression data for the first stage, on a sample common to all orders.
struct HrData {
    z: Vec<f64>,
    e: Vec<f64>,
    weekdays: Vec<usize>,
    start: usize,
}

impl HrData {
    fn new(z: Vec<f64>, weekdays: Vec<usize>, with_ma: bool) -> Result<Self> {
        let long = MAX_ARMA_LAG;
        let start = if with_ma { 2 * long } else { long };
        if z.len() < start + 30 {
            return Err(Error::Estimation(format!("{} observations are too few for the order search", z.len())));
        }
        let mut e = vec![0.0; z.len()];
        if with_ma {
            let rows = z.len() - long;
            let x = DMatrix::from_fn(rows, 7 + long, |i, j| {
                let t = i + long;
                if j < 7 {
                    f64::from(u8::from(weekdays[t] == j))
                } else {
                    z[t - (j - 6)]
                }
            });
            let fit = ols(&x, &DVector::from_column_slice(&z[long..]))?;
            e[long..].copy_from_slice(fit.residuals.as_slice());
        }
        Ok(HrData { z, e, weekdays, start })
    }

    fn sic(&self, o: Orders) -> f64 {
        let zl: Vec<usize> = [lags(o[0], false), lags(o[2], true)].concat();
        let el: Vec<usize> = [lags(o[1], false), lags(o[3], true)].concat();
        let n = self.z.len() - self.start;
        let k = 7 + zl.len() + el.len();
        let x = DMatrix::from_fn(n, k, |i, j| {
            let t = i + self.start;
            if j < 7 {
                f64::from(u8::from(self.weekdays[t] == j))
            } else if j < 7 + zl.len() {
                self.z[t - zl[j - 7]]
            } else {
                self.e[t - el[j - 7 - zl.len()]]
            }
        });
        match ols(&x, &DVector::from_column_slice(&self.z[self.start..])) {
            Ok(f) => n as f64 * (f.ssr / n as f64).max(1e-300).ln() + k as f64 * (n as f64).ln(),
            Err(_) => f64::INFINITY,
        }
    }
}

/// Coordinate descent over the order grid, recording every visited order.
fn order_search(hr: &HrData, grid: &Grid) -> Vec<(f64, Orders)> {
    let mut seen: BTreeMap<Orders, f64> = BTreeMap::new();
    let mut eval = |o: Orders| *seen.entry(o).or_insert_with(|| hr.sic(o));
    let mut cur: Orders = [0; 4];
    let mut best = eval(cur);
    for _ in 0..10 {
        let mut moved = false;
        for c in 0..4 {
            for &v in &grid.values[c] {
                let mut o = cur;
                o[c] = v;
                let s = eval(o);
                if s < best - 1e-9 {
                    best = s;
                    cur = o;
                    moved = true;
                }
            }
        }
        if !moved {
            break;
        }
    }
    let mut all: Vec<(f64, Orders)> = seen.into_iter().map(|(o, s)| (s, o)).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all
}

/// Critical |t| for a two-sided test at `level`.
fn critical(level: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(1.0 - level / 2.0)
}

/// Removes `lag` from whichever lag list holds coefficient `idx` of the
/// ARMA block (ordered ar, sar, ma, sma).
fn drop_term(spec: &mut ModelSpec, mut idx: usize) {
    for v in [&mut spec.ar_lags, &mut spec.sar_lags, &mut spec.ma_lags, &mut spec.sma_lags] {
        if idx < v.len() {
            v.remove(idx);
            return;
        }
        idx -= v.len();
    }
}

fn arma_terms(spec: &ModelSpec) -> usize {
    spec.ar_lags.len() + spec.sar_lags.len() + spec.ma_lags.len() + spec.sma_lags.len()
}

/// ML backward elimination for the linear families.
fn eliminate_ml(mut spec: ModelSpec, window: &ArrivalSeries, opts: &SelectionOptions, warnings: &mut Vec<String>) -> Result<FittedModel> {
    let crit = critical(opts.significance);
    loop {
        let fm = fit_linear_arma(&spec, window, &opts.fit)?;
        let n_terms = arma_terms(&spec);
        if n_terms == 0 {
            return Ok(fm);
        }
        let kx = if spec.include_dummies { 7 } else { 0 };
        let se = match standard_errors(&fm, window, 0) {
            Ok(se) => se,
            Err(e) => {
                warnings.push(format!("standard errors unavailable, elimination stopped: {e}"));
                return Ok(fm);
            }
        };
        let vals = fm.params.values();
        let (idx, t) = (0..n_terms)
            .map(|i| {
                let s = se[kx + i];
                (i, if s > 0.0 { (vals[kx + i] / s).abs() } else { 0.0 })
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one term");
        if t >= crit {
            return Ok(fm);
        }
        drop_term(&mut spec, idx);
    }
}

/// OLS residuals and |t| statistics of the AR terms in a dummy + AR
/// regression, the linearised form of the time-varying model.
fn dummy_ar_ols(y: &[f64], weekdays: &[usize], ar: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = ar.iter().copied().max().unwrap_or(0);
    let n = y.len() - p;
    let x = DMatrix::from_fn(n, 7 + ar.len(), |i, j| {
        let t = i + p;
        if j < 7 {
            f64::from(u8::from(weekdays[t] == j))
        } else {
            y[t - ar[j - 7]]
        }
    });
    let fit = ols(&x, &DVector::from_column_slice(&y[p..]))?;
    let se = fit.std_errors();
    let t = (0..ar.len()).map(|i| (fit.coefficients[7 + i] / se[7 + i]).abs()).collect();
    Ok((fit.residuals.iter().copied().collect(), t))
}

fn eliminate_ols(mut ar: Vec<usize>, y: &[f64], weekdays: &[usize], level: f64) -> Result<(Vec<usize>, Vec<f64>)> {
    let crit = critical(level);
    loop {
        let (resid, t) = dummy_ar_ols(y, weekdays, &ar)?;
        match t.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)) {
            Some((i, &v)) if v < crit => {
                ar.remove(i);
            }
            _ => return Ok((ar, resid)),
        }
    }
}

fn lm_screen(resid: &[f64], dates: &[chrono::NaiveDate], opts: &SelectionOptions) -> Result<DiagnosticResult> {
    let n = resid.len();
    let tail = &dates[dates.len() - n..];
    let d = DMatrix::from_fn(n, 6, |t, j| f64::from(u8::from(weekday_index(tail[t]) == j + 1)));
    lm_serial_corr_with(resid, opts.lm_order, Some(&d))
}

/// Runs the three-stage search for `family` on `window`. Families without
/// a lag search return their catalogue specification unchanged.
pub fn select_specification(family: Family, window: &ArrivalSeries, opts: &SelectionOptions) -> Result<SelectionOutcome> {
    let target = ModelSpec::default_for(family.model_id());
    let mean_family = family.mean_family();
    let Some(grid) = Grid::for_family(mean_family) else {
        return Ok(SelectionOutcome { spec: target, lm: None, passed_lm: true, warnings: vec![] });
    };
    let base = ModelSpec { family: mean_family, garch: false, ..ModelSpec::default_for(mean_family.model_id()) };
    let weekdays: Vec<usize> = window.dates().iter().map(|&d| weekday_index(d)).collect();
    let z = if mean_family == Family::TvdAr { log_counts(window)? } else { LinearData::prepare(mean_family, window)?.z };
    let with_ma = grid.values[1].len() > 1 || grid.values[3].len() > 1;
    let hr = HrData::new(z.clone(), weekdays.clone(), with_ma)?;
    let ranked = order_search(&hr, &grid);
    let mut warnings = Vec::new();
    let mut first: Option<(ModelSpec, DiagnosticResult)> = None;
    let mut tried: Vec<ModelSpec> = Vec::new();
    for &(_, o) in ranked.iter() {
        if tried.len() >= opts.max_candidates {
            break;
        }
        let (spec, resid) = if mean_family == Family::TvdAr {
            let (ar, resid) = eliminate_ols(lags(o[0], false), &z, &weekdays, opts.significance)?;
            (ModelSpec { ar_lags: ar, ..base.clone() }, resid)
        } else {
            match eliminate_ml(spec_for(&base, o), window, opts, &mut warnings) {
                Ok(fm) => (fm.spec.clone(), fm.residuals),
                Err(e) => {
                    log::debug!("order {o:?} skipped: {e}");
                    continue;
                }
            }
        };
        let spec = spec.normalized();
        if tried.contains(&spec) {
            continue;
        }
        tried.push(spec.clone());
        let lm = lm_screen(&resid, window.dates(), opts)?;
        if !lm.rejects(opts.lm_level) {
            return Ok(SelectionOutcome { spec: restore(spec, &target), lm: Some(lm), passed_lm: true, warnings });
        }
        if first.is_none() {
            first = Some((spec, lm));
        }
    }
    let (spec, lm) = first.ok_or_else(|| Error::Estimation("no candidate specification could be fitted".into()))?;
    warnings.push("no candidate passed the LM autocorrelation screen; SIC-best reduced model kept".into());
    log::warn!("{family:?}: {}", warnings.last().unwrap());
    Ok(SelectionOutcome { spec: restore(spec, &target), lm: Some(lm), passed_lm: false, warnings })
}

/// Carries the searched lag structure over to the requested family.
fn restore(searched: ModelSpec, target: &ModelSpec) -> ModelSpec {
    ModelSpec { family: target.family, garch: target.garch, ..searched }
}
