//! Lag-polynomial helpers for (seasonal) ARMA recursions.
//!
//! AR polynomials are stored as the coefficients `a_1..a_p` of
//! `x_t = a_1 x_{t-1} + ... + a_p x_{t-p} + ...`, MA polynomials as the
//! `b_1..b_q` of `e_t + b_1 e_{t-1} + ... + b_q e_{t-q}`; index 0 is lag 1.

/// Dense coefficients of `1 - sum(coef * L^lag)` products, returned in the
/// AR convention above.
pub fn expand_ar(factors: &[&[(usize, f64)]]) -> Vec<f64> {
    // work with the full polynomial c(L) = 1 + c_1 L + ..., then negate
    let mut poly = vec![1.0];
    for terms in factors {
        let mut factor = vec![1.0];
        for &(lag, coef) in terms.iter() {
            if factor.len() <= lag {
                factor.resize(lag + 1, 0.0);
            }
            factor[lag] -= coef;
        }
        poly = multiply(&poly, &factor);
    }
    poly.iter().skip(1).map(|c| -c).collect()
}

/// Dense coefficients of a product of `1 + sum(coef * L^lag)` factors.
pub fn expand_ma(factors: &[&[(usize, f64)]]) -> Vec<f64> {
    let mut poly = vec![1.0];
    for terms in factors {
        let mut factor = vec![1.0];
        for &(lag, coef) in terms.iter() {
            if factor.len() <= lag {
                factor.resize(lag + 1, 0.0);
            }
            factor[lag] += coef;
        }
        poly = multiply(&poly, &factor);
    }
    poly.into_iter().skip(1).collect()
}

/// Product of two polynomials given by ascending coefficients.
pub fn multiply(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// True when the AR recursion with coefficients `a` is stationary, i.e. all
/// roots of `1 - a_1 z - ... - a_p z^p` lie outside the unit circle.
/// Uses the step-down (Schur-Cohn) recursion on partial autocorrelations.
pub fn is_stationary(a: &[f64]) -> bool {
    let mut cur: Vec<f64> = a.to_vec();
    while cur.last() == Some(&0.0) {
        cur.pop();
    }
    while let Some(&kappa) = cur.last() {
        if !kappa.is_finite() || kappa.abs() >= 1.0 {
            return false;
        }
        let k = cur.len();
        let denom = 1.0 - kappa * kappa;
        let next: Vec<f64> = (0..k - 1).map(|j| (cur[j] + kappa * cur[k - 2 - j]) / denom).collect();
        cur = next;
    }
    true
}

/// True when `1 + b_1 z + ... + b_q z^q` has all roots outside the unit circle.
pub fn is_invertible(b: &[f64]) -> bool {
    let neg: Vec<f64> = b.iter().map(|v| -v).collect();
    is_stationary(&neg)
}

/// First `n` MA(∞) weights `psi_0 = 1, psi_1, ...` of an ARMA process.
pub fn psi_weights(ar: &[f64], ma: &[f64], n: usize) -> Vec<f64> {
    let mut psi = vec![0.0; n];
    if n == 0 {
        return psi;
    }
    psi[0] = 1.0;
    for j in 1..n {
        let mut v = if j <= ma.len() { ma[j - 1] } else { 0.0 };
        for i in 1..=ar.len().min(j) {
            v += ar[i - 1] * psi[j - i];
        }
        psi[j] = v;
    }
    psi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplicative_seasonal_expansion() {
        // (1 - 0.5L)(1 - 0.3L^7) = 1 - 0.5L - 0.3L^7 + 0.15L^8
        let a = expand_ar(&[&[(1, 0.5)], &[(7, 0.3)]]);
        assert_eq!(a.len(), 8);
        assert!((a[0] - 0.5).abs() < 1e-15);
        assert!((a[6] - 0.3).abs() < 1e-15);
        assert!((a[7] + 0.15).abs() < 1e-15);
        let b = expand_ma(&[&[(1, 0.4)], &[(8, -0.6)]]);
        assert!((b[0] - 0.4).abs() < 1e-15);
        assert!((b[7] + 0.6).abs() < 1e-15);
        assert!((b[8] + 0.24).abs() < 1e-15);
    }

    #[test]
    fn stationarity_checks() {
        assert!(is_stationary(&[0.5]));
        assert!(!is_stationary(&[1.0]));
        assert!(!is_stationary(&[1.2]));
        assert!(is_stationary(&[1.2, -0.5]));
        assert!(!is_stationary(&[0.6, 0.5]));
        assert!(is_stationary(&[]));
        assert!(is_invertible(&[0.9]));
        assert!(!is_invertible(&[-1.1]));
        // product of stationary factors is stationary
        assert!(is_stationary(&expand_ar(&[&[(1, 0.9)], &[(7, 0.95)]])));
        assert!(!is_stationary(&expand_ar(&[&[(1, 0.9)], &[(7, 1.01)]])));
    }

    #[test]
    fn psi_weights_of_ar1_and_ma1() {
        let p = psi_weights(&[0.5], &[], 4);
        assert_eq!(p, vec![1.0, 0.5, 0.25, 0.125]);
        let q = psi_weights(&[], &[0.3], 3);
        assert_eq!(q, vec![1.0, 0.3, 0.0]);
    }
}
