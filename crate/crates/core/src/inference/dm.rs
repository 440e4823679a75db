use super::TestResult;
use crate::dist::normal_two_sided;
use crate::error::{Error, Result};

/// Diebold-Mariano test of equal expected loss for the differential
/// `d_t = L_A,t - L_B,t` of `h`-step forecasts. The long-run variance uses
/// autocovariances up to lag `h - 1` with a rectangular kernel, falling
/// back to the variance when that estimate is not positive.
pub fn dm_test(d: &[f64], h: usize) -> Result<TestResult> {
    let p = d.len();
    if p < 2 || h == 0 {
        return Err(Error::Domain("DM test needs at least two differentials and h >= 1".into()));
    }
    let n = p as f64;
    let mean = d.iter().sum::<f64>() / n;
    let gamma = |k: usize| (k..p).map(|t| (d[t] - mean) * (d[t - k] - mean)).sum::<f64>() / n;
    let g0 = gamma(0);
    if !(g0 > 1e-300) {
        return Err(Error::Domain("loss differential is constant".into()));
    }
    let mut lrv = g0 + 2.0 * (1..h.min(p)).map(gamma).sum::<f64>();
    if lrv <= 0.0 {
        lrv = g0;
    }
    let stat = mean / (lrv / n).sqrt();
    Ok(TestResult { statistic: stat, p_value: normal_two_sided(stat), method: "dm".into() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn hand_computed_statistic() {
        let d = [1.0, 2.0, 3.0, 2.0];
        // mean 2, gamma0 = 0.5, t = 2 / sqrt(0.5 / 4)
        let r = dm_test(&d, 1).unwrap();
        assert!((r.statistic - 2.0 / (0.125f64).sqrt()).abs() < 1e-12);
        // gamma1 = (0*-1 + 1*0 + 0*1)/4 = 0
        assert!((dm_test(&d, 2).unwrap().statistic - r.statistic).abs() < 1e-12);
        assert!(dm_test(&[0.0; 10], 1).is_err());
    }

    #[test]
    fn size_and_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut rej0 = 0;
        let mut rej1 = 0;
        for _ in 0..1000 {
            let d: Vec<f64> = (0..351).map(|_| StandardNormal.sample(&mut rng)).collect();
            rej0 += usize::from(dm_test(&d, 1).unwrap().p_value < 0.05);
            let d1: Vec<f64> = d.iter().map(|v| v + 0.5).collect();
            rej1 += usize::from(dm_test(&d1, 1).unwrap().p_value < 0.05);
        }
        assert!((30..=70).contains(&rej0), "size {rej0}/1000");
        assert!(rej1 > 990, "power {rej1}/1000");
    }
}
