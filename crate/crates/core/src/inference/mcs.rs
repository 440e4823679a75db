//! Model confidence set with the range statistic.
//!
//! For producers i, j in the surviving set, `d_ij = mean(L_i - L_j)` and
//! `t_ij = d_ij / sqrt(var*(d_ij))`. The set is rejected when
//! `max |t_ij|` is large relative to its bootstrap distribution; the
//! producer with the largest `max_j t_ij` is then dropped.

use serde::{Deserialize, Serialize};

use super::bootstrap::bootstrap_means;
use super::{check_aligned, BootstrapConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSet {
    /// Indices of the producers in the set.
    pub survivors: Vec<usize>,
    pub level: f64,
    /// Eliminated producers in order, with their (monotone) MCS p-values.
    pub eliminated: Vec<(usize, f64)>,
}

impl ConfidenceSet {
    pub fn contains(&self, i: usize) -> bool {
        self.survivors.contains(&i)
    }

    /// MCS p-value of producer `i`: its elimination p-value, or 1 for survivors.
    pub fn p_value(&self, i: usize) -> f64 {
        self.eliminated.iter().find(|(k, _)| *k == i).map_or(1.0, |(_, p)| *p)
    }
}

pub fn model_confidence_set(losses: &[&[f64]], level: f64, cfg: &BootstrapConfig) -> Result<ConfidenceSet> {
    cfg.validate()?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("MCS level must lie in (0, 1), got {level}")));
    }
    let m = losses.len();
    if m == 0 {
        return Err(Error::Config("MCS needs at least one producer".into()));
    }
    let n = check_aligned(losses)? as f64;
    let mean: Vec<f64> = losses.iter().map(|l| l.iter().sum::<f64>() / n).collect();
    let boot = bootstrap_means(losses, cfg);
    let b = boot.len() as f64;
    // bootstrap variance of each pairwise mean differential
    let mut var = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            let d = mean[i] - mean[j];
            let v = boot.iter().map(|r| (r[i] - r[j] - d).powi(2)).sum::<f64>() / b;
            var[i][j] = v;
            var[j][i] = v;
        }
    }
    let scale = |i: usize, j: usize| {
        let v = var[i][j];
        let floor = 1e-24 * (mean[i].abs() + mean[j].abs()).powi(2);
        if v > floor {
            v.sqrt()
        } else {
            f64::INFINITY
        }
    };

    let mut alive: Vec<usize> = (0..m).collect();
    let mut eliminated = Vec::new();
    let mut running = 0.0f64;
    let alpha = 1.0 - level;
    while alive.len() > 1 {
        let mut stat = 0.0f64;
        let mut worst = alive[0];
        let mut worst_t = f64::NEG_INFINITY;
        for &i in &alive {
            let mut row = f64::NEG_INFINITY;
            for &j in &alive {
                if i == j {
                    continue;
                }
                let t = (mean[i] - mean[j]) / scale(i, j);
                stat = stat.max(t.abs());
                row = row.max(t);
            }
            if row > worst_t {
                worst_t = row;
                worst = i;
            }
        }
        let exceed = boot
            .iter()
            .filter(|r| {
                let mut t_star = 0.0f64;
                for (a, &i) in alive.iter().enumerate() {
                    for &j in &alive[a + 1..] {
                        let dev = (r[i] - r[j] - (mean[i] - mean[j])).abs() / scale(i, j);
                        t_star = t_star.max(dev);
                    }
                }
                t_star >= stat
            })
            .count();
        let p = exceed as f64 / b;
        running = running.max(p);
        if running >= alpha {
            break;
        }
        eliminated.push((worst, running));
        alive.retain(|&k| k != worst);
    }
    Ok(ConfidenceSet { survivors: alive, level, eliminated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn losses(shifts: &[f64], n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let common: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        shifts
            .iter()
            .map(|s| common.iter().map(|c| c + s + 0.5 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)).collect())
            .collect()
    }

    #[test]
    fn clearly_worse_producers_are_dropped() {
        let l = losses(&[0.0, 0.0, 1.0, 2.0], 351, 1);
        let refs: Vec<&[f64]> = l.iter().map(Vec::as_slice).collect();
        let set = model_confidence_set(&refs, 0.9, &BootstrapConfig::default()).unwrap();
        assert!(set.contains(0) && set.contains(1));
        assert!(!set.contains(2) && !set.contains(3));
        assert_eq!(set.eliminated[0].0, 3);
        assert_eq!(set.p_value(0), 1.0);
    }

    #[test]
    fn p_values_are_monotone() {
        let l = losses(&[0.0, 0.05, 0.1, 0.2, 0.3], 351, 2);
        let refs: Vec<&[f64]> = l.iter().map(Vec::as_slice).collect();
        let set = model_confidence_set(&refs, 0.99, &BootstrapConfig::default()).unwrap();
        assert!(set.eliminated.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn identical_producers_all_survive() {
        let l = losses(&[0.0], 200, 3);
        let refs: Vec<&[f64]> = vec![&l[0], &l[0], &l[0]];
        let set = model_confidence_set(&refs, 0.9, &BootstrapConfig::default()).unwrap();
        assert_eq!(set.survivors, vec![0, 1, 2]);
    }

    #[test]
    fn higher_level_gives_a_superset() {
        let l = losses(&[0.0, 0.1, 0.15, 0.3, 0.5], 351, 4);
        let refs: Vec<&[f64]> = l.iter().map(Vec::as_slice).collect();
        let cfg = BootstrapConfig { replications: 499, ..Default::default() };
        let small = model_confidence_set(&refs, 0.75, &cfg).unwrap();
        let large = model_confidence_set(&refs, 0.95, &cfg).unwrap();
        assert!(small.survivors.iter().all(|i| large.contains(*i)));
    }
}
