//! Forecast combination over fixed model groups.
//!
//! Every method here works in real time: it only needs the member
//! forecasts at the origin (and, for information-criterion averaging, the
//! members' in-sample criteria on the same window).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelId;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GroupId {
    G1,
    G2,
    G3,
    G4,
    G5,
}

impl GroupId {
    pub const ALL: [GroupId; 5] = [GroupId::G1, GroupId::G2, GroupId::G3, GroupId::G4, GroupId::G5];

    pub fn members(self) -> Vec<ModelId> {
        use ModelId::*;
        match self {
            GroupId::G1 => vec![M1, M2, M3, M4, M5, M6, M7, M8, M9, M10, M11, M12],
            GroupId::G2 => vec![M1, M2, M3],
            GroupId::G3 => vec![M1, M2, M3, M4, M5, M6],
            GroupId::G4 => vec![M1, M2, M3, M4, M5],
            GroupId::G5 => vec![M8, M9, M10],
        }
    }

    /// Information-criterion averaging is undefined for G1, whose members
    /// model different dependent variables.
    pub fn allows_abma(self) -> bool {
        self != GroupId::G1
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelGroup {
    pub id: GroupId,
    pub members: Vec<ModelId>,
}

impl From<GroupId> for ModelGroup {
    fn from(id: GroupId) -> Self {
        ModelGroup { id, members: id.members() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// c1
    Avg,
    /// c2: drops one highest and one lowest member
    Trim,
    /// c3
    Med,
    /// c4: smallest member forecast
    Min,
    /// c5: largest member forecast
    Max,
    /// c6
    Sic,
    /// c7
    Aic,
}

impl Method {
    pub const ALL: [Method; 7] = [Method::Avg, Method::Trim, Method::Med, Method::Min, Method::Max, Method::Sic, Method::Aic];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Avg => "avg",
            Method::Trim => "trim",
            Method::Med => "med",
            Method::Min => "min",
            Method::Max => "max",
            Method::Sic => "sic",
            Method::Aic => "aic",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.tag() == s)
    }

    pub fn is_abma(self) -> bool {
        matches!(self, Method::Sic | Method::Aic)
    }

    pub fn criterion(self) -> Option<Criterion> {
        match self {
            Method::Sic => Some(Criterion::Sic),
            Method::Aic => Some(Criterion::Aic),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    Sic,
    Aic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedForecast<T = f64> {
    pub group: GroupId,
    pub method: Method,
    pub value: T,
    pub weights: Option<Vec<T>>,
}

/// Producer identifier of a combination, e.g. `avg.G3`.
pub fn producer_id(method: Method, group: GroupId) -> String {
    format!("{}.{}", method.tag(), group)
}

/// Simple (untrained) combinations c1..c5 of member forecasts.
pub fn combine_simple<T: Real>(forecasts: &[T], method: Method) -> Result<T> {
    if forecasts.is_empty() {
        return Err(Error::Degenerate("no member forecasts".into()));
    }
    let n = forecasts.len();
    let mut sorted = forecasts.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mean = |xs: &[T]| xs.iter().copied().sum::<T>() / T::from_usize_lossy(xs.len());
    match method {
        Method::Avg => Ok(mean(forecasts)),
        Method::Trim => {
            if n < 3 {
                return Err(Error::Config("trimmed average needs at least three members".into()));
            }
            Ok(mean(&sorted[1..n - 1]))
        }
        Method::Med => Ok(if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / T::lit(2.0)
        }),
        Method::Min => Ok(sorted[0]),
        Method::Max => Ok(sorted[n - 1]),
        Method::Sic | Method::Aic => Err(Error::Config("information-criterion averaging needs weights".into())),
    }
}

/// Softmax weights from information criteria.
///
/// Criteria are smaller-is-better, so `zeta_m = -IC_m - max(-IC)` gives the
/// best model the largest weight. `literal_orientation` instead applies
/// `zeta_m = IC_m - max(IC)` as printed in the source tables.
pub fn abma_weights<T: Real>(ics: &[T], literal_orientation: bool) -> Result<Vec<T>> {
    if ics.is_empty() {
        return Err(Error::Degenerate("no information criteria".into()));
    }
    if ics.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite information criterion".into()));
    }
    let score: Vec<T> = ics.iter().map(|&v| if literal_orientation { v } else { -v }).collect();
    let top = score.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = score.iter().map(|&s| (s - top).exp()).collect();
    let total: T = e.iter().copied().sum();
    Ok(e.into_iter().map(|v| v / total).collect())
}

/// Weighted combination (c6/c7).
pub fn combine_abma<T: Real>(forecasts: &[T], weights: &[T]) -> Result<T> {
    if forecasts.len() != weights.len() {
        return Err(Error::Alignment(format!("{} forecasts vs {} weights", forecasts.len(), weights.len())));
    }
    if forecasts.is_empty() {
        return Err(Error::Degenerate("no member forecasts".into()));
    }
    Ok(forecasts.iter().zip(weights).map(|(&f, &w)| f * w).sum())
}

/// Combines member forecasts with any method; `ics` are required for the
/// information-criterion methods.
pub fn combine<T: Real>(group: GroupId, method: Method, forecasts: &[T], ics: Option<&[T]>) -> Result<CombinedForecast<T>> {
    if method.is_abma() {
        if !group.allows_abma() {
            return Err(Error::Config(format!("{} is excluded from information-criterion averaging", group)));
        }
        let ics = ics.ok_or_else(|| Error::Config("missing information criteria".into()))?;
        let w = abma_weights(ics, false)?;
        let value = combine_abma(forecasts, &w)?;
        Ok(CombinedForecast { group, method, value, weights: Some(w) })
    } else {
        Ok(CombinedForecast { group, method, value: combine_simple(forecasts, method)?, weights: None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn group_membership() {
        assert_eq!(GroupId::G1.members().len(), 12);
        assert!(!GroupId::G1.members().contains(&ModelId::M0));
        assert!(!GroupId::G1.members().contains(&ModelId::M13));
        assert_eq!(GroupId::G4.members(), vec![ModelId::M1, ModelId::M2, ModelId::M3, ModelId::M4, ModelId::M5]);
        assert!(!GroupId::G1.allows_abma());
        assert_eq!(producer_id(Method::Aic, GroupId::G4), "aic.G4");
    }

    #[test]
    fn simple_methods() {
        assert_eq!(combine_simple(&[1.0, 2.0, 3.0], Method::Avg).unwrap(), 2.0);
        assert_eq!(combine_simple(&[1.0, 2.0, 3.0, 10.0], Method::Trim).unwrap(), 2.5);
        assert_eq!(combine_simple(&[3.0, 1.0, 10.0, 2.0], Method::Med).unwrap(), 2.5);
        for m in [Method::Med, Method::Min, Method::Max, Method::Avg] {
            assert_eq!(combine_simple(&[5.0], m).unwrap(), 5.0);
        }
        assert_eq!(combine_simple(&[4.0, 9.0, 1.0], Method::Min).unwrap(), 1.0);
        assert_eq!(combine_simple(&[4.0, 9.0, 1.0], Method::Max).unwrap(), 9.0);
        assert!(combine_simple(&[1.0, 2.0], Method::Trim).is_err());
        assert!(combine_simple(&[2.0f32, 4.0], Method::Avg).unwrap() == 3.0);
    }

    #[test]
    fn abma_weight_values() {
        let w = abma_weights(&[7.0f64, 7.0, 7.0, 7.0], false).unwrap();
        assert!(w.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        // smaller criterion wins; gap ln 9 gives 0.9 / 0.1
        let w = abma_weights(&[0.0, 9f64.ln()], false).unwrap();
        assert!((w[0] - 0.9).abs() < 1e-12 && (w[1] - 0.1).abs() < 1e-12);
        let lit = abma_weights(&[0.0, 9f64.ln()], true).unwrap();
        assert!((lit[1] - 0.9).abs() < 1e-12);
        assert!(abma_weights(&[1.0, f64::NAN], false).is_err());
        assert_eq!(combine_abma(&[10.0, 20.0], &[0.9, 0.1]).unwrap(), 11.0);
        assert_eq!(combine_abma(&[10.0, 20.0, 30.0], &[0.0, 1.0, 0.0]).unwrap(), 20.0);
        assert!(combine_abma(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn uniform_weights_reduce_to_average() {
        let f = [3.0f64, 8.0, 1.5, 4.0];
        let w = abma_weights(&[2.0f64; 4], false).unwrap();
        assert!((combine_abma(&f, &w).unwrap() - combine_simple(&f, Method::Avg).unwrap()).abs() < 1e-14);
        assert!(combine(GroupId::G1, Method::Aic, &f, Some(&[1.0; 4])).is_err());
    }

    proptest! {
        #[test]
        fn combinations_stay_in_envelope(
            f in proptest::collection::vec(-1e4f64..1e4, 3..12),
            ics_seed in proptest::collection::vec(-50.0f64..50.0, 12),
        ) {
            let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let ics = &ics_seed[..f.len()];
            for m in Method::ALL {
                let c = combine(GroupId::G3, m, &f, Some(ics)).unwrap();
                prop_assert!(c.value >= lo - 1e-9 && c.value <= hi + 1e-9);
                if let Some(w) = &c.weights {
                    prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    prop_assert!(w.iter().all(|&v| v >= 0.0));
                }
            }
            prop_assert_eq!(combine_simple(&f, Method::Min).unwrap(), lo);
            prop_assert_eq!(combine_simple(&f, Method::Max).unwrap(), hi);
        }

        #[test]
        fn permutation_invariant(
            f in proptest::collection::vec(-100.0f64..100.0, 3..8),
            ics in proptest::collection::vec(-20.0f64..20.0, 8),
            rot in 0usize..8,
        ) {
            let n = f.len();
            let ics = &ics[..n];
            let r = rot % n;
            let mut fp = f.clone();
            fp.rotate_left(r);
            let mut ip = ics.to_vec();
            ip.rotate_left(r);
            for m in Method::ALL {
                let a = combine(GroupId::G3, m, &f, Some(ics)).unwrap().value;
                let b = combine(GroupId::G3, m, &fp, Some(&ip)).unwrap().value;
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }

        #[test]
        fn abma_shift_invariant(ics in proptest::collection::vec(-30.0f64..30.0, 2..6), c in -1e3f64..1e3) {
            let a = abma_weights(&ics, false).unwrap();
            let shifted: Vec<f64> = ics.iter().map(|v| v + c).collect();
            let b = abma_weights(&shifted, false).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn avg_and_max_monotone(f in proptest::collection::vec(-100.0f64..100.0, 2..8), k in 0usize..8, bump in 0.0f64..50.0) {
            let k = k % f.len();
            let mut g = f.clone();
            g[k] += bump;
            prop_assert!(combine_simple(&g, Method::Avg).unwrap() >= combine_simple(&f, Method::Avg).unwrap() - 1e-9);
            prop_assert!(combine_simple(&g, Method::Max).unwrap() >= combine_simple(&f, Method::Max).unwrap());
            prop_assert!(combine_simple(&g, Method::Min).unwrap() >= combine_simple(&f, Method::Min).unwrap());
        }
    }
}
