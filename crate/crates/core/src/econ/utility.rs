//! Negative exponential utility of the multinomial payoff.
//!
//! All quantities go through `ln(1 - EU)`, which for the payoff of `P`
//! independent days is `-λPF + P ln Σ_k p_k exp(-λ v_k)`. Working in logs
//! keeps the certainty equivalent exact when `EU` rounds to 1.

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::payoff::PayoffScheme;

fn check_probs<T: Real>(probs: &[T], scheme: &PayoffScheme<T>) -> Result<()> {
    if probs.len() != scheme.buckets.len() {
        return Err(Error::Domain(format!(
            "expected {} bucket probabilities, got {}",
            scheme.buckets.len(),
            probs.len()
        )));
    }
    if probs.iter().any(|p| !(*p >= T::zero() && *p <= T::one())) {
        return Err(Error::Domain("bucket probabilities must lie in [0, 1]".into()));
    }
    let total: T = probs.iter().copied().sum();
    if (total - T::one()).abs() > T::lit(1e-6) {
        return Err(Error::Domain(format!("bucket probabilities sum to {total}, not 1")));
    }
    Ok(())
}

fn check_lambda<T: Real>(lambda: T) -> Result<()> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::Domain("risk aversion must be positive".into()));
    }
    Ok(())
}

/// `ln(1 - EU)` for bucket frequencies `probs` over `p_days` days.
pub fn log_disutility<T: Real>(probs: &[T], scheme: &PayoffScheme<T>, p_days: usize, lambda: T) -> Result<T> {
    check_probs(probs, scheme)?;
    check_lambda(lambda)?;
    let exps: Vec<T> = probs
        .iter()
        .zip(&scheme.buckets)
        .filter(|(p, _)| **p > T::zero())
        .map(|(p, b)| p.ln() - lambda * b.euros)
        .collect();
    let m = exps.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = m + exps.iter().map(|&e| (e - m).exp()).sum::<T>().ln();
    let pf = T::from_usize_lossy(p_days);
    Ok(-lambda * pf * scheme.fixed_daily + pf * lse)
}

/// `EU = 1 - exp(-λPF) (Σ p_k exp(-λ v_k))^P`.
pub fn expected_utility<T: Real>(probs: &[T], scheme: &PayoffScheme<T>, p_days: usize, lambda: T) -> Result<T> {
    Ok(-log_disutility(probs, scheme, p_days, lambda)?.exp_m1())
}

/// Utility of a sure payoff.
pub fn utility<T: Real>(payoff: T, lambda: T) -> T {
    -(-lambda * payoff).exp_m1()
}

/// `V_i = π* EU_i / EU(π*)`.
pub fn value_of_information<T: Real>(eu: T, pi_star: T, lambda: T) -> Result<T> {
    check_lambda(lambda)?;
    let eu_star = utility(pi_star, lambda);
    if !(eu_star > T::zero()) {
        return Err(Error::Domain("utility of the perfect payoff must be positive".into()));
    }
    Ok(pi_star * eu / eu_star)
}

/// `CE = -ln(1 - EU) / λ`.
pub fn certainty_equivalent<T: Real>(eu: T, lambda: T) -> Result<T> {
    check_lambda(lambda)?;
    if !(eu < T::one()) {
        return Err(Error::Domain("expected utility must be below 1".into()));
    }
    Ok(-(-eu).ln_1p() / lambda)
}

/// Certainty equivalent straight from the log disutility, avoiding the
/// round trip through `EU`.
pub fn certainty_equivalent_from_log<T: Real>(log_disutility: T, lambda: T) -> Result<T> {
    check_lambda(lambda)?;
    Ok(-log_disutility / lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn degenerate(k: usize) -> Vec<f64> {
        let mut p = vec![0.0; 7];
        p[k] = 1.0;
        p
    }

    #[test]
    fn perfect_forecaster_utility() {
        let s = PayoffScheme::<f64>::default();
        for &lam in &[0.0002, 0.0003, 0.0005, 0.01] {
            let eu = expected_utility(&degenerate(3), &s, 351, lam).unwrap();
            assert!((eu - (1.0 - (-lam * 18603.0f64).exp())).abs() < 1e-12);
            let v = value_of_information(eu, 18603.0, lam).unwrap();
            assert!((v - 18603.0).abs() < 1e-9);
            let ld = log_disutility(&degenerate(3), &s, 351, lam).unwrap();
            assert!((certainty_equivalent_from_log(ld, lam).unwrap() - 18603.0).abs() < 1e-9);
        }
    }

    #[test]
    fn hand_evaluated_utility() {
        let s = PayoffScheme {
            buckets: vec![super::super::payoff::Bucket { lower: 0.0, upper: None, euros: 10.0 }],
            fixed_daily: 0.0,
        };
        let eu: f64 = expected_utility(&[1.0], &s, 2, 0.1).unwrap();
        assert!((eu - 0.864_664_716_763_387_3).abs() < 1e-12);
        assert!((certainty_equivalent(eu, 0.1).unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn small_lambda_approaches_mean_payoff() {
        let s = PayoffScheme::<f64>::default();
        let p = [0.05, 0.1, 0.15, 0.4, 0.15, 0.1, 0.05];
        let lam = 1e-10;
        let eu = expected_utility(&p, &s, 351, lam).unwrap();
        let mean: f64 = 351.0 * (43.0 + p.iter().zip(&s.buckets).map(|(p, b)| p * b.euros).sum::<f64>());
        assert!(((eu / lam) - mean).abs() / mean < 1e-4);
    }

    #[test]
    fn transforms_preserve_order() {
        let eus = [-3.0, -0.5, 0.0, 0.2, 0.7, 0.99];
        for w in eus.windows(2) {
            let lam = 0.0003;
            assert!(certainty_equivalent(w[0], lam).unwrap() < certainty_equivalent(w[1], lam).unwrap());
            assert!(value_of_information(w[0], 18603.0, lam).unwrap() < value_of_information(w[1], 18603.0, lam).unwrap());
        }
        assert_eq!(value_of_information(0.0, 18603.0, 0.0002).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = PayoffScheme::<f64>::default();
        assert!(expected_utility(&[0.5; 7], &s, 10, 0.1).is_err());
        assert!(expected_utility(&degenerate(0), &s, 10, 0.0).is_err());
        assert!(certainty_equivalent(1.0, 0.1).is_err());
        assert!(value_of_information(0.5, 100.0, -1.0).is_err());
    }
}
