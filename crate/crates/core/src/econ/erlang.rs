use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Service-level agreement and call-centre operating parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlaConfig<T = f64> {
    /// Share of calls that must be answered within `answer_seconds`.
    pub answer_fraction: T,
    pub answer_seconds: T,
    /// Mean handling time of a call, in seconds.
    pub mean_call_duration: T,
    pub hours_open: T,
}

impl<T: Real> Default for SlaConfig<T> {
    fn default() -> Self {
        SlaConfig {
            answer_fraction: T::lit(0.80),
            answer_seconds: T::lit(20.0),
            mean_call_duration: T::lit(180.0),
            hours_open: T::lit(14.0),
        }
    }
}

impl<T: Real> SlaConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.answer_fraction > T::zero() && self.answer_fraction < T::one()) {
            return Err(Error::Config("answer fraction must lie in (0, 1)".into()));
        }
        if !(self.answer_seconds > T::zero() && self.mean_call_duration > T::zero() && self.hours_open > T::zero()) {
            return Err(Error::Config("SLA durations must be positive".into()));
        }
        Ok(())
    }

    /// Offered load in Erlangs for a daily volume spread evenly over the
    /// opening hours.
    pub fn offered_load(&self, daily_calls: T) -> T {
        let per_second = daily_calls / (self.hours_open * T::lit(3600.0));
        per_second * self.mean_call_duration
    }
}

/// Erlang-B blocking probability via `B(k) = a B(k-1) / (k + a B(k-1))`.
pub fn erlang_b<T: Real>(n: usize, a: T) -> T {
    let mut b = T::one();
    for k in 1..=n {
        let ab = a * b;
        b = ab / (T::from_usize_lossy(k) + ab);
    }
    b
}

/// Erlang-C delay probability from the blocking probability; 1 when the
/// queue is unstable (`n <= a`).
pub fn erlang_c_from_b<T: Real>(n: usize, a: T, b: T) -> T {
    let nf = T::from_usize_lossy(n);
    if nf <= a {
        return T::one();
    }
    nf * b / (nf - a * (T::one() - b))
}

pub fn erlang_c<T: Real>(n: usize, a: T) -> T {
    erlang_c_from_b(n, a, erlang_b(n, a))
}

/// `P(W <= t)` in an M/M/n queue with arrival rate `arrival_rate` and
/// per-agent service rate `service_rate`. Unstable queues return 0.
pub fn erlang_c_wait<T: Real>(n: usize, arrival_rate: T, service_rate: T, t: T) -> Result<T> {
    if n == 0 {
        return Err(Error::Domain("number of agents must be at least one".into()));
    }
    if !(service_rate > T::zero()) {
        return Err(Error::Domain("service rate must be positive".into()));
    }
    if arrival_rate < T::zero() {
        return Err(Error::Domain("arrival rate must be nonnegative".into()));
    }
    if arrival_rate == T::zero() {
        return Ok(T::one());
    }
    let a = arrival_rate / service_rate;
    let nf = T::from_usize_lossy(n);
    if nf <= a {
        return Ok(T::zero());
    }
    let c = erlang_c(n, a);
    Ok(T::one() - c * (-(nf * service_rate - arrival_rate) * t).exp())
}

/// Smallest number of agents meeting the service level for a daily volume.
pub fn required_agents<T: Real>(daily_calls: T, sla: &SlaConfig<T>) -> usize {
    if !(daily_calls > T::zero()) {
        return 0;
    }
    let a = sla.offered_load(daily_calls);
    let mu = T::one() / sla.mean_call_duration;
    let lambda = a * mu;
    let mut n = a.floor().to_usize().unwrap_or(0) + 1;
    let mut b = erlang_b(n, a);
    loop {
        let nf = T::from_usize_lossy(n);
        if nf > a {
            let c = erlang_c_from_b(n, a, b);
            let p = T::one() - c * (-(nf * mu - lambda) * sla.answer_seconds).exp();
            if p >= sla.answer_fraction {
                return n;
            }
        }
        n += 1;
        let ab = a * b;
        b = ab / (T::from_usize_lossy(n) + ab);
    }
}
