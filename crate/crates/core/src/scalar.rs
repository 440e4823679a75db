//! Scalar abstraction shared by the closed-form parts of the crate.
//!
//! Loss functions, combination rules, queueing formulas, payoff accounting
//! and density scoring are written against [`Real`] so they can run on
//! `f32` or `f64`. Estimation code works on `f64` directly.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar usable by the generic modules.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only if the target cannot represent
    /// finite `f64` values, which never happens for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Arithmetic mean; `None` on an empty slice.
pub fn mean<T: Real>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    Some(xs.iter().copied().sum::<T>() / T::from_usize_lossy(xs.len()))
}

/// Sample variance with the `n - 1` denominator; `None` when `n < 2`.
pub fn sample_variance<T: Real>(xs: &[T]) -> Option<T> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: T = xs.iter().map(|&x| (x - m) * (x - m)).sum();
    Some(ss / T::from_usize_lossy(xs.len() - 1))
}

/// Quantile by linear interpolation between order statistics of a sorted
/// sample (the "type 7" rule).
pub fn quantile_sorted<T: Real>(sorted: &[T], q: T) -> T {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.max(T::zero()).min(T::one()) * T::from_usize_lossy(n - 1);
    let lo = pos.floor();
    let lo_idx = lo.to_usize().unwrap_or(0).min(n - 1);
    let hi_idx = (lo_idx + 1).min(n - 1);
    let frac = pos - lo;
    sorted[lo_idx] + frac * (sorted[hi_idx] - sorted[lo_idx])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_variance_f32_f64_agree() {
        let a64 = [1.0f64, 3.0];
        let a32 = [1.0f32, 3.0];
        assert_eq!(mean(&a64), Some(2.0));
        assert_eq!(mean(&a32), Some(2.0));
        assert_eq!(sample_variance(&a64), Some(2.0));
        assert_eq!(sample_variance(&a32), Some(2.0));
        assert!(mean::<f64>(&[]).is_none());
    }

    #[test]
    fn interpolated_quantiles() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 1.0), 4.0);
        assert!((quantile_sorted(&xs, 0.5) - 2.5).abs() < 1e-15);
        assert!((quantile_sorted(&xs, 1.0 / 3.0) - 2.0).abs() < 1e-12);
    }
}
