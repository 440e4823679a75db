use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// One staffing-ratio interval `[lower, upper)` and its daily bonus or penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bucket<T = f64> {
    pub lower: T,
    /// `None` for the unbounded last bucket.
    pub upper: Option<T>,
    pub euros: T,
}

/// Multinomial compensation: a fixed daily wage plus a variable part set by
/// the ratio of scheduled to required agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffScheme<T = f64> {
    pub buckets: Vec<Bucket<T>>,
    pub fixed_daily: T,
}

impl<T: Real> Default for PayoffScheme<T> {
    fn default() -> Self {
        let rows: [(f64, Option<f64>, f64); 7] = [
            (0.00, Some(0.80), -10.0),
            (0.80, Some(0.90), -5.0),
            (0.90, Some(0.95), -2.5),
            (0.95, Some(1.05), 10.0),
            (1.05, Some(1.10), -1.25),
            (1.10, Some(1.20), -2.5),
            (1.20, None, -10.0),
        ];
        PayoffScheme {
            buckets: rows
                .iter()
                .map(|&(l, u, e)| Bucket { lower: T::lit(l), upper: u.map(T::lit), euros: T::lit(e) })
                .collect(),
            // ceil(1200 / 28)
            fixed_daily: T::lit(43.0),
        }
    }
}

impl<T: Real> PayoffScheme<T> {
    pub fn validate(&self) -> Result<()> {
        let b = &self.buckets;
        if b.is_empty() {
            return Err(Error::Config("payoff scheme has no buckets".into()));
        }
        if b[0].lower != T::zero() {
            return Err(Error::Config("first bucket must start at ratio 0".into()));
        }
        for w in b.windows(2) {
            match w[0].upper {
                Some(u) if u == w[1].lower && u > w[0].lower => {}
                _ => return Err(Error::Config("buckets must be contiguous and increasing".into())),
            }
        }
        if b[b.len() - 1].upper.is_some() {
            return Err(Error::Config("last bucket must be unbounded".into()));
        }
        if b.iter().filter(|x| x.euros > T::zero()).count() != 1 {
            return Err(Error::Config("exactly one bucket must carry a bonus".into()));
        }
        Ok(())
    }

    /// Index (0-based) of the bonus bucket.
    pub fn bonus_index(&self) -> usize {
        self.buckets.iter().position(|x| x.euros > T::zero()).unwrap_or(0)
    }

    pub fn bonus(&self) -> T {
        self.buckets[self.bonus_index()].euros
    }

    /// Bucket (0-based) containing staffing ratio `r`.
    pub fn bucket_of_ratio(&self, r: T) -> usize {
        self.buckets
            .iter()
            .position(|b| r >= b.lower && b.upper.is_none_or(|u| r < u))
            .unwrap_or(self.buckets.len() - 1)
    }

    /// Payoff of a perfect forecaster over `p` evaluated days.
    pub fn perfect_payoff(&self, p: usize) -> T {
        T::from_usize_lossy(p) * (self.fixed_daily + self.bonus())
    }
}

/// Variable payoff and 1-based bucket number for deciding `n_decided` agents
/// when `n_star` were needed.
pub fn payoff_bucket<T: Real>(n_decided: usize, n_star: usize, scheme: &PayoffScheme<T>) -> Result<(T, usize)> {
    if n_star == 0 {
        return Err(Error::Domain("required staffing is zero; day is excluded from evaluation".into()));
    }
    let r = T::from_usize_lossy(n_decided) / T::from_usize_lossy(n_star);
    let k = scheme.bucket_of_ratio(r);
    Ok((scheme.buckets[k].euros, k + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scheme_is_valid() {
        let s = PayoffScheme::<f64>::default();
        s.validate().unwrap();
        assert_eq!(s.bonus_index(), 3);
        assert_eq!(s.perfect_payoff(351), 18603.0);
    }

    #[test]
    fn reference_buckets() {
        let s = PayoffScheme::<f64>::default();
        assert_eq!(payoff_bucket(100, 100, &s).unwrap(), (10.0, 4));
        assert_eq!(payoff_bucket(85, 100, &s).unwrap(), (-5.0, 2));
        assert_eq!(payoff_bucket(95, 100, &s).unwrap(), (10.0, 4));
        assert_eq!(payoff_bucket(105, 100, &s).unwrap(), (-1.25, 5));
        assert_eq!(payoff_bucket(0, 100, &s).unwrap(), (-10.0, 1));
        assert_eq!(payoff_bucket(500, 100, &s).unwrap(), (-10.0, 7));
        assert!(payoff_bucket(3, 0, &s).is_err());
    }

    #[test]
    fn invalid_schemes() {
        let mut s = PayoffScheme::<f64>::default();
        s.buckets[2].upper = Some(0.96);
        assert!(s.validate().is_err());
        let mut s = PayoffScheme::<f64>::default();
        s.buckets[0].euros = 1.0;
        assert!(s.validate().is_err());
        let mut s = PayoffScheme::<f64>::default();
        s.buckets[6].upper = Some(2.0);
        assert!(s.validate().is_err());
    }
}
