//! Tail probabilities of reference distributions.

use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, Normal, StudentsT};

fn clamp01(p: f64) -> f64 {
    if p.is_nan() {
        1.0
    } else {
        p.clamp(0.0, 1.0)
    }
}

/// `P(X > x)` for `X ~ chi2(dof)`.
pub fn chi2_sf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    clamp01(ChiSquared::new(dof).map(|d| d.sf(x)).unwrap_or(f64::NAN))
}

/// `P(X > x)` for `X ~ F(d1, d2)`.
pub fn f_sf(x: f64, d1: f64, d2: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    clamp01(FisherSnedecor::new(d1, d2).map(|d| d.sf(x)).unwrap_or(f64::NAN))
}

/// Two-sided standard normal p-value.
pub fn normal_two_sided(z: f64) -> f64 {
    let n = Normal::standard();
    clamp01(2.0 * n.sf(z.abs()))
}

/// Two-sided Student-t p-value.
pub fn t_two_sided(t: f64, dof: f64) -> f64 {
    clamp01(StudentsT::new(0.0, 1.0, dof).map(|d| 2.0 * d.sf(t.abs())).unwrap_or(f64::NAN))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_quantiles() {
        assert!((chi2_sf(3.841458820694124, 1.0) - 0.05).abs() < 1e-9);
        assert!((chi2_sf(15.507313055865453, 8.0) - 0.05).abs() < 1e-9);
        assert!((normal_two_sided(1.959963984540054) - 0.05).abs() < 1e-9);
        assert_eq!(f_sf(0.0, 6.0, 100.0), 1.0);
        assert!((t_two_sided(0.0, 10.0) - 1.0).abs() < 1e-12);
    }
}
