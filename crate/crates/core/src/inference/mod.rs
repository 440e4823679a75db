//! Forecast comparison tests built on the stationary bootstrap.

mod bootstrap;
mod dm;
mod mcs;
mod spa;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bootstrap::{resample_indices, stationary_bootstrap};
pub use dm::dm_test;
pub use mcs::{model_confidence_set, ConfidenceSet};
pub use spa::spa_test;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Expected block length in days.
    #[serde(default = "default_block_length")]
    pub block_length: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_replications() -> usize {
    999
}

fn default_block_length() -> f64 {
    29.0
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { replications: default_replications(), block_length: default_block_length(), seed: 0 }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("bootstrap needs at least one replication".into()));
        }
        if !(self.block_length >= 1.0) {
            return Err(Error::Config(format!("block length must be at least 1, got {}", self.block_length)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: String,
}

impl TestResult {
    pub fn bucket(&self) -> &'static str {
        bucket(self.p_value)
    }
}

/// Reporting band of a p-value.
pub fn bucket(p: f64) -> &'static str {
    if p < 0.05 {
        "p<0.05"
    } else if p < 0.1 {
        "0.05<=p<0.1"
    } else {
        "p>=0.1"
    }
}

pub(crate) fn check_aligned(series: &[&[f64]]) -> Result<usize> {
    let n = series.first().map_or(0, |s| s.len());
    if n < 2 {
        return Err(Error::Alignment("loss series need at least two dates".into()));
    }
    if series.iter().any(|s| s.len() != n) {
        return Err(Error::Alignment("loss series have different lengths".into()));
    }
    if series.iter().any(|s| s.iter().any(|v| !v.is_finite())) {
        return Err(Error::Domain("non-finite loss".into()));
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buckets() {
        assert_eq!(bucket(0.01), "p<0.05");
        assert_eq!(bucket(0.05), "0.05<=p<0.1");
        assert_eq!(bucket(0.1), "p>=0.1");
        assert!(BootstrapConfig { block_length: 0.5, ..Default::default() }.validate().is_err());
    }
}
