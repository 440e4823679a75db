//! Stationary bootstrap: blocks start at uniform positions, have geometric
//! lengths with the configured mean, and wrap around the sample end.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::BootstrapConfig;
use crate::seed;

/// Resampled index sequence of length `n` from `rng`.
pub fn resample_indices<R: Rng>(n: usize, block_length: f64, rng: &mut R) -> Vec<usize> {
    let p = 1.0 / block_length;
    let mut out = Vec::with_capacity(n);
    let mut cur = rng.random_range(0..n);
    out.push(cur);
    for _ in 1..n {
        cur = if rng.random::<f64>() < p { rng.random_range(0..n) } else { (cur + 1) % n };
        out.push(cur);
    }
    out
}

pub(crate) fn replication_rng(cfg: &BootstrapConfig, b: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, &[b as u64]))
}

/// Index streams for all replications. Replication `b` always uses the same
/// derived seed.
pub fn stationary_bootstrap(n: usize, cfg: &BootstrapConfig) -> Vec<Vec<usize>> {
    (0..cfg.replications).map(|b| resample_indices(n, cfg.block_length, &mut replication_rng(cfg, b))).collect()
}

/// Bootstrap means of every series: `out[b][k]` is the mean of series `k`
/// over replication `b`'s indices.
pub(crate) fn bootstrap_means(series: &[&[f64]], cfg: &BootstrapConfig) -> Vec<Vec<f64>> {
    let n = series[0].len();
    (0..cfg.replications)
        .into_par_iter()
        .map(|b| {
            let idx = resample_indices(n, cfg.block_length, &mut replication_rng(cfg, b));
            series.iter().map(|s| idx.iter().map(|&i| s[i]).sum::<f64>() / n as f64).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let cfg = BootstrapConfig { replications: 3, block_length: 5.0, seed: 42 };
        let a = stationary_bootstrap(50, &cfg);
        assert_eq!(a, stationary_bootstrap(50, &cfg));
        assert!(a.iter().flatten().all(|&i| i < 50));
    }

    #[test]
    fn unit_block_length_is_iid() {
        // with mean length one every position starts a new block
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let idx = resample_indices(10_000, 1.0, &mut rng);
        let runs = idx.windows(2).filter(|w| w[1] == (w[0] + 1) % 10_000).count();
        assert!(runs < 10, "{runs} consecutive pairs");
    }

    #[test]
    fn mean_block_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let idx = resample_indices(n, 29.0, &mut rng);
        // a block boundary is any position not continuing the previous one
        // (a fresh start equal to prev + 1 has probability 1/n and is ignored)
        let blocks = 1 + idx.windows(2).filter(|w| w[1] != (w[0] + 1) % n).count();
        let mean = n as f64 / blocks as f64;
        assert!(blocks > 10_000);
        assert!((mean - 29.0).abs() / 29.0 < 0.02, "mean block length {mean}");
    }

    #[test]
    fn indices_are_uniform() {
        // the index at a fixed position is uniform and independent across
        // replications, so a plain chi-square test applies
        use crate::dist::chi2_sf;
        let cfg = BootstrapConfig { replications: 100_000, block_length: 29.0, seed: 3 };
        let n = 50;
        let mut counts = vec![0usize; n];
        for b in 0..cfg.replications {
            counts[resample_indices(n, cfg.block_length, &mut replication_rng(&cfg, b))[n / 2]] += 1;
        }
        let e = cfg.replications as f64 / n as f64;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        assert!(chi2_sf(stat, (n - 1) as f64) > 0.01, "chi2 {stat}");
    }
}
