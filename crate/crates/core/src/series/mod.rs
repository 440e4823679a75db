//! Daily arrival series: validation, closing-day imputation, calendar
//! regressors, smoothing fits and synthetic data.

mod calendar;
pub mod io;
mod simulate;
mod spline;

use std::collections::BTreeSet;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{mean, sample_variance, Real};

pub use calendar::{day_dummies, dummy_fit, weekday_index, DummyFit, DummyMatrix};
pub use simulate::{simulate_dgp, DgpSpec, GarchSpec};
pub use spline::{spline_fit, SplineFit};

/// Contiguous daily call counts with the set of known closing days.
///
/// After [`validate_and_impute`] every count is strictly positive: zeros on
/// closing days are replaced by the count one week earlier. The closing-day
/// set may extend beyond the sample so future targets can be recognised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalSeries {
    dates: Vec<NaiveDate>,
    counts: Vec<u64>,
    closing_days: BTreeSet<NaiveDate>,
}

impl ArrivalSeries {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn closing_days(&self) -> &BTreeSet<NaiveDate> {
        &self.closing_days
    }

    pub fn start(&self) -> NaiveDate {
        self.dates[0]
    }

    /// Date `offset` days after the first observation; may lie past the end.
    pub fn date_at(&self, offset: usize) -> NaiveDate {
        self.dates[0] + Duration::days(offset as i64)
    }

    pub fn is_closing(&self, date: NaiveDate) -> bool {
        self.closing_days.contains(&date)
    }

    /// Count used for forecast evaluation: zero on closing days, the
    /// recorded count otherwise.
    pub fn observed(&self, t: usize) -> f64 {
        if self.is_closing(self.dates[t]) {
            0.0
        } else {
            self.counts[t] as f64
        }
    }

    pub fn counts_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    /// Sub-series over `start..end` sharing the closing-day set.
    pub fn window(&self, start: usize, end: usize) -> ArrivalSeries {
        ArrivalSeries {
            dates: self.dates[start..end].to_vec(),
            counts: self.counts[start..end].to_vec(),
            closing_days: self.closing_days.clone(),
        }
    }

    /// Builds a series from already-imputed positive counts starting at
    /// `start`. Used by generators and tests.
    pub fn from_counts(start: NaiveDate, counts: Vec<u64>, closing_days: BTreeSet<NaiveDate>) -> Result<Self> {
        let dates = (0..counts.len()).map(|i| start + Duration::days(i as i64)).collect();
        let raw: Vec<(NaiveDate, u64)> = dates_zip(dates, counts);
        validate_and_impute(&raw, &closing_days)
    }
}

fn dates_zip(dates: Vec<NaiveDate>, counts: Vec<u64>) -> Vec<(NaiveDate, u64)> {
    dates.into_iter().zip(counts).collect()
}

/// Checks contiguity and zero handling, then imputes closing-day zeros with
/// the count seven days earlier (resolved recursively through consecutive
/// weekly closings).
pub fn validate_and_impute(raw: &[(NaiveDate, u64)], closing_days: &BTreeSet<NaiveDate>) -> Result<ArrivalSeries> {
    if raw.is_empty() {
        return Err(Error::Validation("empty series".into()));
    }
    for w in raw.windows(2) {
        if w[1].0 - w[0].0 != Duration::days(1) {
            return Err(Error::Validation(format!("dates not contiguous between {} and {}", w[0].0, w[1].0)));
        }
    }
    let mut counts: Vec<u64> = raw.iter().map(|r| r.1).collect();
    for t in 0..counts.len() {
        if counts[t] != 0 {
            continue;
        }
        let date = raw[t].0;
        if !closing_days.contains(&date) {
            return Err(Error::Validation(format!("zero count on {date}, which is not a closing day")));
        }
        // earlier entries are already imputed, so one step back suffices
        if t < 7 {
            return Err(Error::Validation(format!("closing day {date} has no observation one week earlier")));
        }
        counts[t] = counts[t - 7];
    }
    Ok(ArrivalSeries {
        dates: raw.iter().map(|r| r.0).collect(),
        counts,
        closing_days: closing_days.clone(),
    })
}

/// Element-wise natural logarithm of the counts.
pub fn log_transform(s: &ArrivalSeries) -> Result<Vec<f64>> {
    log_values(&s.counts_f64())
}

/// Natural logarithm of strictly positive values.
pub fn log_values<T: Real>(xs: &[T]) -> Result<Vec<T>> {
    xs.iter()
        .map(|&x| {
            if x > T::zero() {
                Ok(x.ln())
            } else {
                Err(Error::Domain(format!("log of nonpositive value {x}")))
            }
        })
        .collect()
}

/// Sample standard deviation (n - 1 denominator) divided by the mean.
pub fn coefficient_of_variation<T: Real>(xs: &[T]) -> Result<T> {
    let m = mean(xs).ok_or_else(|| Error::Degenerate("empty series".into()))?;
    if m == T::zero() {
        return Err(Error::Domain("coefficient of variation undefined for zero mean".into()));
    }
    let v = sample_variance(xs).ok_or_else(|| Error::Degenerate("need at least two values".into()))?;
    Ok(v.sqrt() / m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn raw_from(start: &str, counts: &[u64]) -> Vec<(NaiveDate, u64)> {
        let s = d(start);
        counts.iter().enumerate().map(|(i, &c)| (s + Duration::days(i as i64), c)).collect()
    }

    #[test]
    fn holiday_takes_previous_week() {
        let mut c = vec![100u64; 14];
        c[3] = 500;
        c[10] = 0;
        let raw = raw_from("2024-01-01", &c);
        let closing: BTreeSet<_> = [raw[10].0].into_iter().collect();
        let s = validate_and_impute(&raw, &closing).unwrap();
        assert_eq!(s.counts()[10], 500);
        assert_eq!(s.observed(10), 0.0);
        assert_eq!(s.observed(3), 500.0);
    }

    #[test]
    fn consecutive_weekly_closings_resolve_recursively() {
        let mut c = vec![100u64; 21];
        c[2] = 300;
        c[9] = 0;
        c[16] = 0;
        let raw = raw_from("2024-01-01", &c);
        let closing: BTreeSet<_> = [raw[9].0, raw[16].0].into_iter().collect();
        let s = validate_and_impute(&raw, &closing).unwrap();
        assert_eq!(s.counts()[9], 300);
        assert_eq!(s.counts()[16], 300);
    }

    #[test]
    fn clean_series_is_unchanged_and_imputation_idempotent() {
        let c: Vec<u64> = (1..=30).collect();
        let raw = raw_from("2024-03-01", &c);
        let s = validate_and_impute(&raw, &BTreeSet::new()).unwrap();
        assert_eq!(s.counts(), c.as_slice());

        let mut c2 = c.clone();
        c2[20] = 0;
        let raw2 = raw_from("2024-03-01", &c2);
        let closing: BTreeSet<_> = [raw2[20].0].into_iter().collect();
        let once = validate_and_impute(&raw2, &closing).unwrap();
        let again_raw: Vec<_> = once.dates().iter().copied().zip(once.counts().iter().copied()).collect();
        let twice = validate_and_impute(&again_raw, &closing).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn zero_on_open_day_and_gaps_are_rejected() {
        let mut raw = raw_from("2024-01-01", &[5, 6, 0, 8, 9, 1, 2, 3]);
        assert!(matches!(validate_and_impute(&raw, &BTreeSet::new()), Err(Error::Validation(_))));
        raw[2].1 = 7;
        raw.remove(4);
        assert!(matches!(validate_and_impute(&raw, &BTreeSet::new()), Err(Error::Validation(_))));
    }

    #[test]
    fn log_transform_values() {
        let raw = raw_from("2024-01-01", &[1, 1, 1]);
        let s = validate_and_impute(&raw, &BTreeSet::new()).unwrap();
        assert_eq!(log_transform(&s).unwrap(), vec![0.0, 0.0, 0.0]);
        let e2 = std::f64::consts::E.powi(2);
        assert!((log_values(&[e2]).unwrap()[0] - 2.0).abs() < 1e-15);
        let v = log_values(&[100.0f64, 200.0]).unwrap();
        assert!((v[0] - 4.605170185988092).abs() < 1e-12);
        assert!((v[1] - 5.298317366548036).abs() < 1e-12);
        assert!(matches!(log_values(&[1.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn coefficient_of_variation_uses_sample_sd() {
        assert_eq!(coefficient_of_variation(&[3.0, 3.0, 3.0]).unwrap(), 0.0);
        let cv = coefficient_of_variation(&[1.0f64, 3.0]).unwrap();
        assert!((cv - 0.7071067811865476).abs() < 1e-12);
        let cv32 = coefficient_of_variation(&[1.0f32, 3.0]).unwrap();
        assert!((cv32 - 0.70710677).abs() < 1e-6);
        assert!(matches!(coefficient_of_variation(&[-1.0, 1.0]), Err(Error::Domain(_))));
    }

    proptest::proptest! {
        #[test]
        fn log_of_exp_roundtrip(x in 1.0f64..1e6) {
            let y = log_values(&[x]).unwrap()[0];
            proptest::prop_assert!((y.exp() - x).abs() / x < 1e-12);
            proptest::prop_assert!((log_values(&[y.exp()]).unwrap()[0] - y).abs() < 1e-12);
        }
    }
}
