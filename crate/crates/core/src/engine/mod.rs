//! Recursive/rolling estimation and forecasting loop, and the evaluation
//! driver on top of it.

mod evaluate;
mod manifest;
mod report;
mod store;

use std::collections::BTreeMap;
use std::fmt;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combine::{combine, producer_id, Criterion, GroupId, Method};
use crate::density::{simulate_density, DensityConfig, DensityForecast, DENSITY_MODELS};
use crate::error::{Error, Result};
use crate::models::{
    fit, forecast, refilter, select_specification, FitOptions, FittedModel, ModelId, ModelSpec, SelectionOptions,
    MAX_HORIZON,
};
use crate::series::ArrivalSeries;

pub use evaluate::{evaluate, EvalConfig, EvalReport, OptimalRatio, TestRow};
pub use manifest::{content_hash, RunManifest};
pub use report::render_report;
pub use store::{ForecastStore, StoreEntry, StoreKey};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Expanding window starting at the first observation.
    #[default]
    Recursive,
    /// Fixed-length window of the last `R` observations.
    Rolling,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Recursive => "recursive",
            Scheme::Rolling => "rolling",
        })
    }
}

/// A combination producer such as `aic.G4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Combination {
    pub method: Method,
    pub group: GroupId,
}

impl Combination {
    pub fn parse(s: &str) -> Result<Self> {
        let (m, g) = s.split_once('.').ok_or_else(|| Error::Config(format!("combination `{s}` is not METHOD.GROUP")))?;
        let method = Method::parse(m).ok_or_else(|| Error::Config(format!("unknown combination method `{m}`")))?;
        let group = GroupId::ALL
            .into_iter()
            .find(|id| id.to_string() == g)
            .ok_or_else(|| Error::Config(format!("unknown model group `{g}`")))?;
        if method.is_abma() && !group.allows_abma() {
            return Err(Error::Config(format!("{g} cannot be combined by information criteria")));
        }
        Ok(Combination { method, group })
    }

    pub fn id(&self) -> String {
        producer_id(self.method, self.group)
    }
}

fn default_window() -> usize {
    371
}

fn default_horizon() -> usize {
    MAX_HORIZON
}

fn default_models() -> Vec<ModelId> {
    ModelId::ALL.to_vec()
}

fn default_refit() -> usize {
    1
}

fn default_starts() -> usize {
    2
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub scheme: Scheme,
    /// Initial (recursive) or fixed (rolling) window length `R`.
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_horizon")]
    pub max_horizon: usize,
    #[serde(default = "default_models")]
    pub models: Vec<ModelId>,
    /// Combination producers, e.g. `["avg.G4", "aic.G4"]`.
    #[serde(default)]
    pub combinations: Vec<String>,
    /// Re-estimate every `k` origins; in between the last estimates are
    /// re-filtered on the new window.
    #[serde(default = "default_refit")]
    pub refit_every: usize,
    /// Run the specification search on the first window. When off, the
    /// catalogue defaults (or `specs`) are used.
    #[serde(default = "default_true")]
    pub select: bool,
    /// Fixed specifications; these skip the search.
    #[serde(default)]
    pub specs: BTreeMap<ModelId, ModelSpec>,
    /// Optimizer restarts per refit.
    #[serde(default = "default_starts")]
    pub starts: usize,
    /// One-step density forecasts for the density models, when set.
    #[serde(default)]
    pub density: Option<DensityConfig>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scheme: Scheme::default(),
            window: default_window(),
            max_horizon: default_horizon(),
            models: default_models(),
            combinations: Vec::new(),
            refit_every: default_refit(),
            select: true,
            specs: BTreeMap::new(),
            starts: default_starts(),
            density: None,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Checks the configuration against a series of length `n`.
    pub fn validate(&self, n: usize) -> Result<Vec<Combination>> {
        if self.window < 14 {
            return Err(Error::Config(format!("window R = {} must be at least 14", self.window)));
        }
        if self.window >= n {
            return Err(Error::Config(format!("window R = {} must be shorter than the series length {n}", self.window)));
        }
        if self.max_horizon == 0 || self.max_horizon > MAX_HORIZON {
            return Err(Error::Config(format!("max_horizon must lie in 1..={MAX_HORIZON}")));
        }
        if self.refit_every == 0 {
            return Err(Error::Config("refit_every must be at least 1".into()));
        }
        if self.models.is_empty() && self.combinations.is_empty() {
            return Err(Error::Config("no producers configured".into()));
        }
        let mut seen = self.models.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.models.len() {
            return Err(Error::Config("duplicate model in producer list".into()));
        }
        for (id, spec) in &self.specs {
            if spec.family != id.family() {
                return Err(Error::Config(format!("spec for {id} has family {:?}", spec.family)));
            }
            spec.validate()?;
        }
        let combos = self.combinations.iter().map(|c| Combination::parse(c)).collect::<Result<Vec<_>>>()?;
        for c in &combos {
            if let Some(m) = c.group.members().into_iter().find(|m| !self.models.contains(m)) {
                return Err(Error::Config(format!("{} needs model {m}, which is not in the producer list", c.id())));
            }
        }
        Ok(combos)
    }

    /// Window end indices (inclusive) at which forecasts are issued.
    pub fn origins(&self, n: usize) -> std::ops::RangeInclusive<usize> {
        self.window - 1..=n - 2
    }

    fn window_start(&self, origin: usize) -> usize {
        match self.scheme {
            Scheme::Recursive => 0,
            Scheme::Rolling => origin + 1 - self.window,
        }
    }
}

/// Something noteworthy that happened during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostic {
    pub producer: String,
    pub origin: Option<NaiveDate>,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub store: ForecastStore,
    pub specs: BTreeMap<ModelId, ModelSpec>,
    pub diagnostics: Vec<RunDiagnostic>,
}

/// What information-criterion weighting needs from one fit.
struct OriginIc {
    aic: f64,
    sic: f64,
    n_params: usize,
    terms: Option<Vec<f64>>,
}

impl OriginIc {
    /// Criteria from the last `n` log-likelihood terms, or the fit's own
    /// when the terms are unavailable.
    fn on_tail(&self, n: usize, crit: Criterion) -> f64 {
        let k = self.n_params as f64;
        match &self.terms {
            Some(t) if t.len() >= n => {
                let ll: f64 = t[t.len() - n..].iter().sum();
                match crit {
                    Criterion::Aic => -2.0 * ll + 2.0 * k,
                    Criterion::Sic => -2.0 * ll + k * (n as f64).ln(),
                }
            }
            _ => match crit {
                Criterion::Aic => self.aic,
                Criterion::Sic => self.sic,
            },
        }
    }
}

/// Criteria of the group members at one origin, computed on the days all
/// of them condition on so that the likelihoods are comparable.
fn common_sample_ics(members: &[&OriginIc], crit: Criterion) -> Vec<f64> {
    let n = members.iter().filter_map(|m| m.terms.as_ref().map(Vec::len)).min().unwrap_or(0);
    members.iter().map(|m| m.on_tail(n, crit)).collect()
}

struct ModelRun {
    id: ModelId,
    entries: Vec<(StoreKey, StoreEntry)>,
    ics: Vec<(NaiveDate, OriginIc)>,
    densities: Vec<DensityForecast>,
    diagnostics: Vec<RunDiagnostic>,
}

fn choose_spec(id: ModelId, series: &ArrivalSeries, cfg: &RunConfig) -> (ModelSpec, Vec<String>) {
    if let Some(s) = cfg.specs.get(&id) {
        return (s.clone(), Vec::new());
    }
    if !cfg.select {
        return (ModelSpec::default_for(id), Vec::new());
    }
    let first = series.window(0, cfg.window);
    let opts = SelectionOptions { fit: FitOptions { starts: 1, seed: cfg.seed, ..Default::default() }, ..Default::default() };
    match select_specification(id.family(), &first, &opts) {
        Ok(out) => (out.spec, out.warnings),
        Err(e) => (ModelSpec::default_for(id), vec![format!("specification search failed ({e}); using the default")]),
    }
}

fn run_model(id: ModelId, spec: &ModelSpec, series: &ArrivalSeries, cfg: &RunConfig, keep_terms: bool) -> ModelRun {
    let n = series.len();
    let producer = id.to_string();
    let mut out = ModelRun { id, entries: Vec::new(), ics: Vec::new(), densities: Vec::new(), diagnostics: Vec::new() };
    let note = |origin: Option<NaiveDate>, message: String, diags: &mut Vec<RunDiagnostic>| {
        diags.push(RunDiagnostic { producer: producer.clone(), origin, message });
    };
    let want_density = cfg.density.as_ref().filter(|_| DENSITY_MODELS.contains(&id));
    let mut prev: Option<FittedModel> = None;
    for (i, o) in cfg.origins(n).enumerate() {
        let window = series.window(cfg.window_start(o), o + 1);
        let date = window.date_at(window.len() - 1);
        let refit = i % cfg.refit_every == 0 || prev.is_none();
        let fitted = if refit {
            let opts = FitOptions {
                starts: cfg.starts,
                seed: crate::seed::derive(cfg.seed, &[id.index() as u64]),
                warm_start: prev.as_ref().map(|p| p.params.clone()),
                ..Default::default()
            };
            match fit(spec, &window, &opts) {
                Ok(f) => Ok(f),
                Err(e) => match &prev {
                    Some(p) => {
                        note(Some(date), format!("refit failed ({e}); previous estimates reused"), &mut out.diagnostics);
                        refilter(p, &window)
                    }
                    None => Err(e),
                },
            }
        } else {
            refilter(prev.as_ref().expect("checked"), &window)
        };
        let fitted = match fitted {
            Ok(f) => f,
            Err(e) => {
                note(Some(date), format!("no forecast: {e}"), &mut out.diagnostics);
                continue;
            }
        };
        let h_max = cfg.max_horizon.min(n - 1 - o);
        match forecast(&fitted, &window, h_max) {
            Ok(fc) => {
                for f in fc {
                    out.entries.push((
                        StoreKey { producer: producer.clone(), origin: date, horizon: f.horizon },
                        StoreEntry { point: f.point, log_point: f.log_point, variance: f.forecast_variance },
                    ));
                }
                let terms = if keep_terms { fitted.loglik_terms() } else { None };
                out.ics.push((date, OriginIc { aic: fitted.aic, sic: fitted.sic, n_params: fitted.n_params, terms }));
            }
            Err(e) => note(Some(date), format!("no forecast: {e}"), &mut out.diagnostics),
        }
        if let Some(dc) = want_density {
            match simulate_density(&fitted, &window, &producer, dc) {
                Ok(d) => out.densities.push(d),
                Err(e) => note(Some(date), format!("no density: {e}"), &mut out.diagnostics),
            }
        }
        prev = Some(fitted);
    }
    out
}

/// Runs every configured producer over all forecast origins.
pub fn run(series: &ArrivalSeries, cfg: &RunConfig) -> Result<RunOutput> {
    let combos = cfg.validate(series.len())?;
    let chosen: Vec<(ModelId, ModelSpec, Vec<String>)> = cfg
        .models
        .par_iter()
        .map(|&id| {
            let (spec, warnings) = choose_spec(id, series, cfg);
            (id, spec, warnings)
        })
        .collect();
    let mut diagnostics = Vec::new();
    for (id, _, warnings) in &chosen {
        for w in warnings {
            diagnostics.push(RunDiagnostic { producer: id.to_string(), origin: None, message: w.clone() });
        }
    }
    let weighted = |id: ModelId| combos.iter().any(|c| c.method.is_abma() && c.group.members().contains(&id));
    let mut runs: Vec<ModelRun> =
        chosen.par_iter().map(|(id, spec, _)| run_model(*id, spec, series, cfg, weighted(*id))).collect();
    runs.sort_by_key(|r| r.id);

    let mut store = ForecastStore::new(cfg.scheme, cfg.window, cfg.max_horizon);
    for r in &mut runs {
        for (k, e) in r.entries.drain(..) {
            store.insert(k, e)?;
        }
        for d in r.densities.drain(..) {
            store.insert_density(&r.id.to_string(), d);
        }
        diagnostics.append(&mut r.diagnostics);
    }

    let ics: BTreeMap<(ModelId, NaiveDate), &OriginIc> =
        runs.iter().flat_map(|r| r.ics.iter().map(move |(d, ic)| ((r.id, *d), ic))).collect();
    for c in &combos {
        let members = c.group.members();
        let name = c.id();
        for o in cfg.origins(series.len()) {
            let date = series.date_at(o);
            let ic: Option<Vec<f64>> = c.method.criterion().map(|crit| {
                members
                    .iter()
                    .map(|m| ics.get(&(*m, date)).copied())
                    .collect::<Option<Vec<&OriginIc>>>()
                    .map(|v| common_sample_ics(&v, crit))
                    .unwrap_or_default()
            });
            for h in 1..=cfg.max_horizon.min(series.len() - 1 - o) {
                let pts: Option<Vec<f64>> = members.iter().map(|m| store.point(&m.to_string(), date, h)).collect();
                let Some(pts) = pts else { continue };
                if ic.as_ref().is_some_and(|v| v.len() != pts.len()) {
                    continue;
                }
                match combine(c.group, c.method, &pts, ic.as_deref()) {
                    Ok(cf) => store.insert(
                        StoreKey { producer: name.clone(), origin: date, horizon: h },
                        StoreEntry { point: cf.value, log_point: None, variance: None },
                    )?,
                    Err(e) => diagnostics.push(RunDiagnostic {
                        producer: name.clone(),
                        origin: Some(date),
                        message: format!("combination failed: {e}"),
                    }),
                }
            }
        }
    }
    let specs = chosen.into_iter().map(|(id, s, _)| (id, s)).collect();
    Ok(RunOutput { store, specs, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{simulate_dgp, DgpSpec};

    fn series(len: usize, seed: u64) -> ArrivalSeries {
        let mut spec = DgpSpec::weekly(NaiveDate::from_ymd_opt(2020, 1, 6).unwrap(), 8.0);
        spec.ar = vec![(1, 0.5)];
        spec.noise_var = 0.01;
        simulate_dgp(&spec, len, seed).unwrap()
    }

    fn quick(models: Vec<ModelId>) -> RunConfig {
        RunConfig { window: 371, models, select: false, starts: 1, ..Default::default() }
    }

    #[test]
    fn criteria_use_the_shared_tail() {
        let short = OriginIc { aic: 0.0, sic: 0.0, n_params: 2, terms: Some(vec![1.0; 5]) };
        let long = OriginIc { aic: 0.0, sic: 0.0, n_params: 3, terms: Some(vec![9.0, 9.0, 0.5, 0.5, 0.5, 0.5, 0.5]) };
        let aic = common_sample_ics(&[&short, &long], Criterion::Aic);
        assert_eq!(aic, vec![-2.0 * 5.0 + 4.0, -2.0 * 2.5 + 6.0]);
        let sic = common_sample_ics(&[&short, &long], Criterion::Sic);
        assert!((sic[1] - (-5.0 + 3.0 * 5f64.ln())).abs() < 1e-12);
        // without terms the fit's own criteria are used
        let bare = OriginIc { aic: 7.0, sic: 8.0, n_params: 1, terms: None };
        assert_eq!(common_sample_ics(&[&bare, &short], Criterion::Sic)[0], 8.0);
    }

    #[test]
    fn origin_geometry() {
        let s = series(400, 1);
        let out = run(&s, &quick(vec![ModelId::M0])).unwrap();
        assert_eq!(out.store.origins("M0", 1).len(), 29);
        assert_eq!(out.store.origins("M0", 28).len(), 2);
        let cfg = RunConfig { window: 371, ..Default::default() };
        assert_eq!(cfg.origins(749).count(), 378);
        assert_eq!(cfg.origins(749).filter(|o| o + 28 <= 748).count(), 351);
    }

    #[test]
    fn validation_messages() {
        let cfg = RunConfig { window: 500, ..Default::default() };
        let e = cfg.validate(400).unwrap_err();
        assert!(e.to_string().contains("window R = 500"));
        let cfg = RunConfig { models: vec![ModelId::M1], combinations: vec!["avg.G4".into()], ..Default::default() };
        assert!(cfg.validate(749).is_err());
        assert!(Combination::parse("aic.G1").is_err());
        assert_eq!(Combination::parse("trim.G3").unwrap().id(), "trim.G3");
    }

    #[test]
    fn first_origin_matches_across_schemes() {
        let s = series(390, 2);
        let rec = run(&s, &quick(vec![ModelId::M1, ModelId::M8])).unwrap();
        let rol = run(&s, &RunConfig { scheme: Scheme::Rolling, ..quick(vec![ModelId::M1, ModelId::M8]) }).unwrap();
        let first = s.date_at(370);
        for p in ["M1", "M8"] {
            for h in 1..=19 {
                assert_eq!(rec.store.get(p, first, h), rol.store.get(p, first, h));
            }
        }
        assert_ne!(rec.store.get("M1", s.date_at(380), 1), rol.store.get("M1", s.date_at(380), 1));
    }

    #[test]
    fn no_look_ahead() {
        let s = series(400, 3);
        let cfg = RunConfig { window: 371, refit_every: 5, ..quick(vec![ModelId::M1, ModelId::M11]) };
        let base = run(&s, &cfg).unwrap();
        // scramble everything after origin index 380
        let mut counts = s.counts().to_vec();
        for c in &mut counts[381..] {
            *c = *c * 3 + 17;
        }
        let mutated = ArrivalSeries::from_counts(s.start(), counts, Default::default()).unwrap();
        let other = run(&mutated, &cfg).unwrap();
        for o in 370..=380 {
            for h in 1..=28 {
                for p in ["M1", "M11"] {
                    assert_eq!(base.store.get(p, s.date_at(o), h), other.store.get(p, s.date_at(o), h));
                }
            }
        }
    }

    #[test]
    fn combinations_and_order_independence() {
        let s = series(385, 4);
        let models = vec![ModelId::M1, ModelId::M2, ModelId::M3, ModelId::M4, ModelId::M5];
        let cfg = RunConfig { combinations: vec!["avg.G4".into(), "aic.G4".into()], refit_every: 7, ..quick(models.clone()) };
        let a = run(&s, &cfg).unwrap();
        let mut rev = models;
        rev.reverse();
        let b = run(&s, &RunConfig { models: rev, ..cfg.clone() }).unwrap();
        assert_eq!(a.store.to_csv_string().unwrap(), b.store.to_csv_string().unwrap());
        let d = s.date_at(375);
        let members: Vec<f64> = ["M1", "M2", "M3", "M4", "M5"].iter().map(|p| a.store.point(p, d, 3).unwrap()).collect();
        let avg = members.iter().sum::<f64>() / 5.0;
        assert!((a.store.point("avg.G4", d, 3).unwrap() - avg).abs() < 1e-9 * avg);
        let lo = members.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = members.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w = a.store.point("aic.G4", d, 3).unwrap();
        assert!(lo - 1e-9 <= w && w <= hi + 1e-9);
    }
}
