//! In-sample specification tests: residual autocorrelation, ARCH effects,
//! weekday heteroskedasticity and count overdispersion.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{count, FitOptions};
use crate::dist::{chi2_sf, f_sf, normal_two_sided};
use crate::error::{Error, Result};
use crate::linalg::ols;
use crate::series::{ArrivalSeries, DummyMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Reference distribution: `Chi2(dof)`, `F(dof, dof2)` or `N(0,1)`.
    pub reference: Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum Reference {
    ChiSquared { dof: usize },
    F { dof1: usize, dof2: usize },
    Normal,
}

impl DiagnosticResult {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

fn check_variation(x: &[f64], what: &str) -> Result<()> {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / n;
    if !(v > 1e-300) {
        return Err(Error::Domain(format!("{what} have zero variance")));
    }
    Ok(())
}

/// Breusch-Godfrey LM test of no autocorrelation up to `max_order`:
/// `T R^2` from regressing `e_t` on a constant, `extra` and `e_{t-1..t-p}`
/// (presample lags set to zero), against `Chi2(p)`.
pub fn lm_serial_corr_with(residuals: &[f64], max_order: usize, extra: Option<&DMatrix<f64>>) -> Result<DiagnosticResult> {
    let n = residuals.len();
    if n <= max_order + 1 || max_order == 0 {
        return Err(Error::Domain(format!("{n} residuals for LM order {max_order}")));
    }
    check_variation(residuals, "residuals")?;
    let kx = extra.map_or(0, |m| m.ncols());
    if let Some(m) = extra {
        if m.nrows() != n {
            return Err(Error::Alignment(format!("{} regressor rows vs {n} residuals", m.nrows())));
        }
    }
    let x = DMatrix::from_fn(n, 1 + kx + max_order, |t, j| {
        if j == 0 {
            1.0
        } else if j <= kx {
            extra.unwrap()[(t, j - 1)]
        } else {
            let l = j - kx;
            if t >= l {
                residuals[t - l]
            } else {
                0.0
            }
        }
    });
    let y = DVector::from_column_slice(residuals);
    let fit = ols(&x, &y)?;
    let stat = n as f64 * fit.r2_centered(&y);
    Ok(DiagnosticResult { statistic: stat, p_value: chi2_sf(stat, max_order as f64), reference: Reference::ChiSquared { dof: max_order } })
}

pub fn lm_serial_corr(residuals: &[f64], max_order: usize) -> Result<DiagnosticResult> {
    lm_serial_corr_with(residuals, max_order, None)
}

/// ARCH(1) LM test: `(T-1) R^2` from regressing `u_t^2` on a constant and
/// `u_{t-1}^2`, against `Chi2(1)`.
pub fn lm_arch(residuals: &[f64]) -> Result<DiagnosticResult> {
    let n = residuals.len();
    if n < 4 {
        return Err(Error::Domain("too few residuals for the ARCH test".into()));
    }
    let u2: Vec<f64> = residuals.iter().map(|e| e * e).collect();
    check_variation(&u2, "squared residuals")?;
    let x = DMatrix::from_fn(n - 1, 2, |t, j| if j == 0 { 1.0 } else { u2[t] });
    let y = DVector::from_column_slice(&u2[1..]);
    let fit = ols(&x, &y)?;
    let stat = (n - 1) as f64 * fit.r2_centered(&y);
    Ok(DiagnosticResult { statistic: stat, p_value: chi2_sf(stat, 1.0), reference: Reference::ChiSquared { dof: 1 } })
}

/// F test that the six non-Monday dummies are jointly irrelevant in a
/// regression of `u_t^2` on a constant and those dummies.
pub fn seasonal_variance_ftest(residuals: &[f64], d: &DummyMatrix) -> Result<DiagnosticResult> {
    let n = residuals.len();
    if d.rows() != n {
        return Err(Error::Alignment(format!("{} dummy rows vs {n} residuals", d.rows())));
    }
    let reference = Reference::F { dof1: 6, dof2: n.saturating_sub(7) };
    if n <= 7 {
        return Err(Error::Domain("too few residuals for the seasonal variance test".into()));
    }
    let u2: Vec<f64> = residuals.iter().map(|e| e * e).collect();
    let mean = u2.iter().sum::<f64>() / n as f64;
    let ssr_r: f64 = u2.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ssr_r <= 1e-24 * mean.abs().max(1.0) * n as f64 {
        return Ok(DiagnosticResult { statistic: 0.0, p_value: 1.0, reference });
    }
    let x = DMatrix::from_fn(n, 7, |t, j| if j == 0 { 1.0 } else if d.weekday(t) == j { 1.0 } else { 0.0 });
    let fit = ols(&x, &DVector::from_column_slice(&u2))?;
    let dof2 = (n - 7) as f64;
    let stat = ((ssr_r - fit.ssr) / 6.0) / (fit.ssr / dof2);
    Ok(DiagnosticResult { statistic: stat, p_value: f_sf(stat, 6.0, dof2), reference })
}

/// Regression-based overdispersion test after a Poisson fit:
/// `(Y_t - mu_t)^2 - Y_t + h_t mu_t = a mu_t^2 + v_t` without a constant and
/// a two-sided test of `a = 0`. The leverage term `h_t mu_t` removes the
/// downward bias of squared residuals around estimated means; the t
/// statistic uses White standard errors.
pub fn overdispersion_test(s: &ArrivalSeries) -> Result<(f64, DiagnosticResult)> {
    let (y, mu, h) = count::poisson_fitted(s, &FitOptions { starts: 1, ..Default::default() })?;
    overdispersion_from_fit(&y, &mu, &h)
}

pub(crate) fn overdispersion_from_fit(y: &[f64], mu: &[f64], h: &[f64]) -> Result<(f64, DiagnosticResult)> {
    let z: Vec<f64> = y.iter().zip(mu).zip(h).map(|((y, m), h)| (y - m) * (y - m) - y + h * m).collect();
    let x: Vec<f64> = mu.iter().map(|m| m * m).collect();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if !(sxx > 0.0) {
        return Err(Error::Singular("fitted means are all zero".into()));
    }
    let a = x.iter().zip(&z).map(|(x, z)| x * z).sum::<f64>() / sxx;
    let meat: f64 = x.iter().zip(&z).map(|(x, z)| {
        let r = z - a * x;
        x * x * r * r
    }).sum();
    let se = meat.sqrt() / sxx;
    let stat = if se > 0.0 { a / se } else { 0.0 };
    Ok((a, DiagnosticResult { statistic: stat, p_value: normal_two_sided(stat), reference: Reference::Normal }))
}
