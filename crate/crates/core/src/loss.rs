//! Flexible asymmetric losses and loss-based rankings.
//!
//! The univariate loss is `2 [phi + (1 - 2 phi) 1(u < 0)] |u|^rho`; the
//! multivariate loss over a vector of horizon errors is
//! `(||u||_rho + tau * sum(u)) ||u||_rho^(rho - 1)` with a common
//! asymmetry `tau = 2 phi - 1`. Errors are `actual - forecast`, so
//! `phi > 0.5` penalises under-prediction more.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Which horizons a loss evaluates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonSet {
    /// One horizon, univariate loss.
    Single(usize),
    /// Horizons `1..=h` jointly, multivariate loss.
    UpTo(usize),
}

impl HorizonSet {
    pub fn horizons(&self) -> Vec<usize> {
        match *self {
            HorizonSet::Single(h) => vec![h],
            HorizonSet::UpTo(h) => (1..=h).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            HorizonSet::Single(_) => 1,
            HorizonSet::UpTo(h) => h,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max_horizon(&self) -> usize {
        match *self {
            HorizonSet::Single(h) | HorizonSet::UpTo(h) => h,
        }
    }

    /// Label used in reports, e.g. `h7` or `h1-28`.
    pub fn label(&self) -> String {
        match *self {
            HorizonSet::Single(h) => format!("h{h}"),
            HorizonSet::UpTo(h) => format!("h1-{h}"),
        }
    }
}

/// Largest admissible `|tau|` for a common asymmetry over `h` horizons.
///
/// Nonnegativity needs `|tau| sqrt(h) < 1`; the bound is truncated to two
/// decimals, so `h = 2` gives 0.70 and `h = 28` gives 0.18.
pub fn tau_bound(h: usize) -> f64 {
    let raw = 1.0 / (h.max(1) as f64).sqrt();
    (raw * 100.0 + 1e-9).floor() / 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig<T = f64> {
    pub rho: T,
    pub phi: T,
    pub horizons: HorizonSet,
}

impl<T: Real> LossConfig<T> {
    pub fn new(rho: T, phi: T, horizons: HorizonSet) -> Result<Self> {
        let cfg = LossConfig { rho, phi, horizons };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn tau(&self) -> T {
        T::lit(2.0) * self.phi - T::one()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > T::zero()) {
            return Err(Error::Config(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.phi > T::zero() && self.phi < T::one()) {
            return Err(Error::Config(format!("phi must lie in (0, 1), got {}", self.phi)));
        }
        let h = self.horizons.len();
        if h == 0 {
            return Err(Error::Config("empty horizon set".into()));
        }
        let bound = T::lit(tau_bound(h));
        // 2 * 0.59 - 1 rounds just below 0.18
        if h > 1 && self.tau().abs() >= bound - T::lit(1e-12) {
            return Err(Error::Config(format!(
                "|tau| = {} violates the nonnegativity bound {} for {h} horizons",
                self.tau().abs(),
                bound
            )));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!("rho{}_phi{:.2}_{}", self.rho, self.phi.to_f64_lossy(), self.horizons.label())
    }
}

/// Univariate flexible loss of a single error.
pub fn univariate_loss<T: Real>(u: T, rho: T, phi: T) -> T {
    if u == T::zero() {
        return T::zero();
    }
    let two = T::lit(2.0);
    let w = if u < T::zero() { phi + (T::one() - two * phi) } else { phi };
    two * w * u.abs().powf(rho)
}

/// Multivariate flexible loss of one error vector with common asymmetry.
pub fn multivariate_loss<T: Real>(u: &[T], rho: T, tau: T) -> Result<T> {
    if u.is_empty() {
        return Err(Error::Degenerate("empty error vector".into()));
    }
    if u.len() > 1 && tau.abs() >= T::lit(tau_bound(u.len())) {
        return Err(Error::Config(format!("|tau| = {tau} too large for {} horizons", u.len())));
    }
    let norm = u.iter().map(|v| v.abs().powf(rho)).sum::<T>().powf(T::one() / rho);
    if norm == T::zero() {
        return Ok(T::zero());
    }
    let lin: T = u.iter().copied().sum::<T>() * tau;
    Ok((norm + lin) * norm.powf(rho - T::one()))
}

/// Loss of one evaluation date under `cfg`: univariate when a single
/// horizon is evaluated, multivariate otherwise.
pub fn date_loss<T: Real>(u: &[T], cfg: &LossConfig<T>) -> Result<T> {
    if u.len() == 1 {
        Ok(univariate_loss(u[0], cfg.rho, cfg.phi))
    } else {
        multivariate_loss(u, cfg.rho, cfg.tau())
    }
}

/// Per-date losses of a `P x H` error block (one row per date).
pub fn date_losses<T: Real>(errors: &[Vec<T>], cfg: &LossConfig<T>) -> Result<Vec<T>> {
    errors.iter().map(|row| date_loss(row, cfg)).collect()
}

/// Root mean loss `sqrt(P^-1 sum_p L_p)` of a `P x H` error block.
pub fn loss_statistic<T: Real>(errors: &[Vec<T>], cfg: &LossConfig<T>) -> Result<T> {
    if errors.is_empty() {
        return Err(Error::Degenerate("empty error block".into()));
    }
    let losses = date_losses(errors, cfg)?;
    let mean = losses.iter().copied().sum::<T>() / T::from_usize_lossy(losses.len());
    Ok(mean.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRow<T = f64> {
    pub producer: String,
    pub loss_stat: T,
    pub rank: usize,
}

/// Producers ordered by ascending loss statistic; rank 1 is best.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTable<T = f64> {
    pub config: LossConfig<T>,
    pub rows: Vec<LossRow<T>>,
}

impl<T: Real> LossTable<T> {
    pub fn rank_of(&self, producer: &str) -> Option<usize> {
        self.rows.iter().find(|r| r.producer == producer).map(|r| r.rank)
    }

    pub fn stat_of(&self, producer: &str) -> Option<T> {
        self.rows.iter().find(|r| r.producer == producer).map(|r| r.loss_stat)
    }
}

/// Ranks producers whose error blocks are already aligned on the same dates.
/// Ties are broken by producer identifier.
pub fn rank_producers<T: Real>(blocks: &[(String, Vec<Vec<T>>)], cfg: &LossConfig<T>) -> Result<LossTable<T>> {
    let p = blocks.first().map(|b| b.1.len()).unwrap_or(0);
    if blocks.iter().any(|b| b.1.len() != p) {
        return Err(Error::Alignment("producers evaluated on different numbers of dates".into()));
    }
    let mut rows = blocks
        .iter()
        .map(|(name, errs)| Ok((name.clone(), loss_statistic(errs, cfg)?)))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.0.cmp(&b.0)));
    Ok(LossTable {
        config: cfg.clone(),
        rows: rows
            .into_iter()
            .enumerate()
            .map(|(i, (producer, loss_stat))| LossRow { producer, loss_stat, rank: i + 1 })
            .collect(),
    })
}
