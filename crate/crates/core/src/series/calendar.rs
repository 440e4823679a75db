use chrono::{Datelike, NaiveDate};
use nalgebra::DMatrix;

use super::ArrivalSeries;
use crate::error::{Error, Result};

/// Day of week as a column index, Monday = 0 through Sunday = 6.
pub fn weekday_index(date: NaiveDate) -> usize {
    date.weekday().num_days_from_monday() as usize
}

/// Seven day-of-week indicator columns (Monday first), one row per date.
#[derive(Debug, Clone, PartialEq)]
pub struct DummyMatrix {
    weekdays: Vec<usize>,
}

impl DummyMatrix {
    pub fn from_dates(dates: &[NaiveDate]) -> Self {
        DummyMatrix { weekdays: dates.iter().map(|&d| weekday_index(d)).collect() }
    }

    pub fn rows(&self) -> usize {
        self.weekdays.len()
    }

    /// Active column of row `t`.
    pub fn weekday(&self, t: usize) -> usize {
        self.weekdays[t]
    }

    pub fn weekdays(&self) -> &[usize] {
        &self.weekdays
    }

    pub fn row(&self, t: usize) -> [f64; 7] {
        let mut r = [0.0; 7];
        r[self.weekdays[t]] = 1.0;
        r
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows(), 7, |i, j| if self.weekdays[i] == j { 1.0 } else { 0.0 })
    }
}

pub fn day_dummies(s: &ArrivalSeries) -> DummyMatrix {
    DummyMatrix::from_dates(s.dates())
}

/// Least-squares projection on the seven day dummies.
#[derive(Debug, Clone, PartialEq)]
pub struct DummyFit {
    /// Weekday means, Monday first.
    pub coefficients: [f64; 7],
    pub fitted: Vec<f64>,
}

impl DummyFit {
    pub fn at_weekday(&self, weekday: usize) -> f64 {
        self.coefficients[weekday]
    }
}

/// Projects `y` on the day dummies. Because the columns are orthogonal
/// indicators the coefficients are the weekday means.
pub fn dummy_fit(y: &[f64], d: &DummyMatrix) -> Result<DummyFit> {
    if y.len() != d.rows() {
        return Err(Error::Alignment(format!("{} values vs {} dummy rows", y.len(), d.rows())));
    }
    let mut sums = [0.0; 7];
    let mut counts = [0usize; 7];
    for (t, &v) in y.iter().enumerate() {
        sums[d.weekday(t)] += v;
        counts[d.weekday(t)] += 1;
    }
    let mut coefficients = [0.0; 7];
    for k in 0..7 {
        if counts[k] == 0 {
            return Err(Error::Validation(format!("weekday {k} absent from sample")));
        }
        coefficients[k] = sums[k] / counts[k] as f64;
    }
    let fitted = (0..y.len()).map(|t| coefficients[d.weekday(t)]).collect();
    Ok(DummyFit { coefficients, fitted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Duration;

    fn dates(start: &str, n: usize) -> Vec<NaiveDate> {
        let s: NaiveDate = start.parse().unwrap();
        (0..n).map(|i| s + Duration::days(i as i64)).collect()
    }

    #[test]
    fn monday_first_rows_partition() {
        // 2024-01-01 is a Monday
        let d = DummyMatrix::from_dates(&dates("2024-01-01", 14));
        assert_eq!(d.row(0), [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(d.row(6), [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let m = d.to_matrix();
        for i in 0..14 {
            assert_eq!(m.row(i).sum(), 1.0);
        }
        for j in 0..7 {
            assert_eq!(m.column(j).sum(), 2.0);
        }
    }

    #[test]
    fn weekday_means() {
        let dts = dates("2024-01-01", 14);
        let d = DummyMatrix::from_dates(&dts);
        let mut y = vec![1.0; 14];
        y[0] = 2.0;
        y[7] = 2.0;
        y[1] = 4.0;
        y[8] = 6.0;
        let f = dummy_fit(&y, &d).unwrap();
        assert_eq!(f.coefficients[0], 2.0);
        assert_eq!(f.coefficients[1], 5.0);
        let m = d.to_matrix();
        for j in 0..7 {
            let ip: f64 = (0..14).map(|t| m[(t, j)] * (y[t] - f.fitted[t])).sum();
            assert!(ip.abs() < 1e-10);
        }
        let c = dummy_fit(&vec![3.5; 14], &d).unwrap();
        assert!(c.fitted.iter().all(|&v| v == 3.5));
    }

    #[test]
    fn missing_weekday_is_an_error() {
        let d = DummyMatrix::from_dates(&dates("2024-01-01", 6));
        assert!(dummy_fit(&[1.0; 6], &d).is_err());
    }

    proptest::proptest! {
        #[test]
        fn shift_equivariance(shift in -50.0f64..50.0, ys in proptest::collection::vec(-5.0f64..5.0, 21)) {
            let d = DummyMatrix::from_dates(&dates("2023-05-03", 21));
            let a = dummy_fit(&ys, &d).unwrap();
            let shifted: Vec<f64> = ys.iter().map(|v| v + shift).collect();
            let b = dummy_fit(&shifted, &d).unwrap();
            for (x, y) in a.fitted.iter().zip(&b.fitted) {
                proptest::prop_assert!((x + shift - y).abs() < 1e-10);
            }
        }
    }
}
