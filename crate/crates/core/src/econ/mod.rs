//! Money-metric evaluation of one-day-ahead forecasts: staffing through
//! Erlang-C, a bucketed bonus/penalty scheme and exponential utility.

mod erlang;
mod payoff;
mod utility;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use erlang::{erlang_b, erlang_c, erlang_c_from_b, erlang_c_wait, required_agents, SlaConfig};
pub use payoff::{payoff_bucket, Bucket, PayoffScheme};
pub use utility::{
    certainty_equivalent, certainty_equivalent_from_log, expected_utility, log_disutility, utility,
    value_of_information,
};

pub const DEFAULT_LAMBDAS: [f64; 3] = [0.0002, 0.0003, 0.0005];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EconConfig<T = f64> {
    pub sla: SlaConfig<T>,
    pub payoff: PayoffScheme<T>,
    pub lambdas: Vec<T>,
    /// Producer whose CE and V are subtracted to give δ and ΔV.
    pub benchmark: String,
}

impl<T: Real> Default for EconConfig<T> {
    fn default() -> Self {
        EconConfig {
            sla: SlaConfig::default(),
            payoff: PayoffScheme::default(),
            lambdas: DEFAULT_LAMBDAS.iter().map(|&l| T::lit(l)).collect(),
            benchmark: "M0".into(),
        }
    }
}

impl<T: Real> EconConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.sla.validate()?;
        self.payoff.validate()?;
        if self.lambdas.is_empty() || self.lambdas.iter().any(|l| !(*l > T::zero())) {
            return Err(Error::Config("risk aversion values must be positive".into()));
        }
        Ok(())
    }
}

/// One producer under one risk aversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconRow<T = f64> {
    pub producer: String,
    pub lambda: T,
    /// Realized total payoff `P F + Σ v_t`.
    pub payoff: T,
    pub bucket_probs: Vec<T>,
    pub eu: T,
    pub v: T,
    pub delta_v: T,
    pub ce: T,
    pub delta: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconReport<T = f64> {
    /// Number of evaluated (non-closing) days.
    pub days: usize,
    pub perfect_payoff: T,
    pub rows: Vec<EconRow<T>>,
}

impl<T: Real> EconReport<T> {
    pub fn row(&self, producer: &str, lambda: T) -> Option<&EconRow<T>> {
        self.rows.iter().find(|r| r.producer == producer && r.lambda == lambda)
    }
}

/// Bucket frequencies and realized variable payoff of one producer's
/// one-step forecasts. Days whose actual staffing need is zero are skipped.
pub fn bucket_frequencies<T: Real>(
    forecasts: &[T],
    actuals: &[T],
    sla: &SlaConfig<T>,
    scheme: &PayoffScheme<T>,
) -> Result<(Vec<T>, T, usize)> {
    if forecasts.len() != actuals.len() {
        return Err(Error::Alignment(format!(
            "{} forecasts against {} actuals",
            forecasts.len(),
            actuals.len()
        )));
    }
    let mut counts = vec![0usize; scheme.buckets.len()];
    let mut variable = T::zero();
    let mut days = 0;
    for (&f, &y) in forecasts.iter().zip(actuals) {
        let n_star = required_agents(y, sla);
        if n_star == 0 {
            continue;
        }
        let n = required_agents(f.max(T::zero()), sla);
        let (v, k) = payoff_bucket(n, n_star, scheme)?;
        counts[k - 1] += 1;
        variable = variable + v;
        days += 1;
    }
    if days == 0 {
        return Err(Error::Degenerate("no open days to evaluate".into()));
    }
    let p = T::from_usize_lossy(days);
    Ok((counts.into_iter().map(|c| T::from_usize_lossy(c) / p).collect(), variable, days))
}

/// Economic evaluation of `h = 1` level forecasts against actual counts.
pub fn evaluate_econ<T: Real>(producers: &[(String, Vec<T>)], actuals: &[T], cfg: &EconConfig<T>) -> Result<EconReport<T>> {
    cfg.validate()?;
    if !producers.iter().any(|(id, _)| *id == cfg.benchmark) {
        return Err(Error::Config(format!("benchmark producer {} not evaluated", cfg.benchmark)));
    }
    let mut freq = Vec::with_capacity(producers.len());
    let mut days = None;
    for (id, f) in producers {
        let (probs, variable, d) = bucket_frequencies(f, actuals, &cfg.sla, &cfg.payoff)?;
        if days.is_some_and(|x| x != d) {
            return Err(Error::Alignment(format!("producer {id} evaluated on a different number of days")));
        }
        days = Some(d);
        freq.push((id, probs, variable));
    }
    let days = days.unwrap_or(0);
    let pf = T::from_usize_lossy(days);
    let pi_star = cfg.payoff.perfect_payoff(days);
    let mut rows = Vec::new();
    for &lambda in &cfg.lambdas {
        let mut block = Vec::with_capacity(freq.len());
        for (id, probs, variable) in &freq {
            let ld = log_disutility(probs, &cfg.payoff, days, lambda)?;
            let eu = -ld.exp_m1();
            block.push(EconRow {
                producer: (*id).clone(),
                lambda,
                payoff: pf * cfg.payoff.fixed_daily + *variable,
                bucket_probs: probs.clone(),
                eu,
                v: value_of_information(eu, pi_star, lambda)?,
                delta_v: T::zero(),
                ce: certainty_equivalent_from_log(ld, lambda)?,
                delta: T::zero(),
            });
        }
        let bench = block.iter().find(|r| r.producer == cfg.benchmark).cloned().expect("benchmark present");
        for r in &mut block {
            r.delta_v = r.v - bench.v;
            r.delta = r.ce - bench.ce;
        }
        rows.extend(block);
    }
    Ok(EconReport { days, perfect_payoff: pi_star, rows })
}
