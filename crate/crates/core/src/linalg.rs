//! Ordinary least squares on top of a Householder QR factorisation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
    pub fitted: DVector<f64>,
    pub ssr: f64,
    /// `(X'X)^{-1}`.
    pub xtx_inv: DMatrix<f64>,
    pub n: usize,
    pub k: usize,
}

impl OlsFit {
    /// Residual variance with `n - k` degrees of freedom.
    pub fn sigma2(&self) -> f64 {
        self.ssr / (self.n.saturating_sub(self.k)).max(1) as f64
    }

    pub fn std_errors(&self) -> DVector<f64> {
        let s2 = self.sigma2();
        DVector::from_iterator(self.k, (0..self.k).map(|i| (s2 * self.xtx_inv[(i, i)]).max(0.0).sqrt()))
    }

    /// Uncentered R² (`1 - SSR / y'y`).
    pub fn r2_uncentered(&self, y: &DVector<f64>) -> f64 {
        let yy = y.dot(y);
        if yy == 0.0 {
            0.0
        } else {
            1.0 - self.ssr / yy
        }
    }

    /// Centered R² (`1 - SSR / TSS`), meaningful when the design spans a constant.
    pub fn r2_centered(&self, y: &DVector<f64>) -> f64 {
        let m = y.mean();
        let tss: f64 = y.iter().map(|v| (v - m) * (v - m)).sum();
        if tss == 0.0 {
            0.0
        } else {
            1.0 - self.ssr / tss
        }
    }
}

/// Fits `y = X b + e` by QR. Rank deficiency (a pivot below `1e-10` times the
/// largest pivot) is reported as [`Error::Singular`].
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if n != y.len() {
        return Err(Error::Alignment(format!("design has {n} rows, response {}", y.len())));
    }
    if n < k || k == 0 {
        return Err(Error::Singular(format!("{n} observations for {k} regressors")));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let max_pivot = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    for i in 0..k {
        if r[(i, i)].abs() <= 1e-10 * max_pivot.max(f64::MIN_POSITIVE) {
            return Err(Error::Singular(format!("column {i} is collinear")));
        }
    }
    let qty = qr.q().transpose() * y;
    let coefficients = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    let fitted = x * &coefficients;
    let residuals = y - &fitted;
    let ssr = residuals.dot(&residuals);
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::Singular("inverse of R failed".into()))?;
    let xtx_inv = &r_inv * r_inv.transpose();
    Ok(OlsFit { coefficients, residuals, fitted, ssr, xtx_inv, n, k })
}

/// Builds a design matrix from column vectors.
pub fn design(columns: &[Vec<f64>]) -> DMatrix<f64> {
    let n = columns.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i])
}

/// Symmetric matrix inverse via Cholesky, falling back to LU.
pub fn invert_symmetric(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(ch) = m.clone().cholesky() {
        return Some(ch.inverse());
    }
    m.clone().try_inverse()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_linear_relation() {
        let x = design(&[vec![1.0; 5], vec![0.0, 1.0, 2.0, 3.0, 4.0]]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0, 9.0]);
        let f = ols(&x, &y).unwrap();
        assert!((f.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((f.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(f.ssr < 1e-20);
    }

    #[test]
    fn collinear_columns_are_singular() {
        let x = design(&[vec![1.0; 4], vec![2.0; 4]]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(ols(&x, &y), Err(Error::Singular(_))));
    }

    #[test]
    fn covariance_matches_textbook_formula() {
        let x = design(&[vec![1.0; 6], vec![0.5, 1.0, 2.5, 3.0, 4.5, 7.0]]);
        let y = DVector::from_vec(vec![1.1, 1.9, 3.2, 3.8, 5.1, 7.4]);
        let f = ols(&x, &y).unwrap();
        let direct = (x.transpose() * &x).try_inverse().unwrap();
        assert!((f.xtx_inv - direct).abs().max() < 1e-10);
    }
}
