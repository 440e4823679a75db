use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use super::ForecastStore;
use crate::density::{optimal_point_forecast, rmsfe_ratio, summarize, write_summary_csv, DensitySummary};
use crate::econ::{evaluate_econ, EconConfig, EconReport};
use crate::error::{Error, Result};
use crate::inference::{bucket, dm_test, model_confidence_set, spa_test, BootstrapConfig, ConfidenceSet};
use crate::loss::{date_losses, rank_producers, HorizonSet, LossConfig, LossTable};
use crate::series::ArrivalSeries;

fn default_level() -> f64 {
    0.9
}

fn default_econ() -> Option<EconConfig<f64>> {
    Some(EconConfig::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Ranking grid; by default ρ ∈ {1, 2} × φ ∈ {0.42, 0.5, 0.58} over
    /// the one-step horizon and all horizons jointly.
    #[serde(default)]
    pub losses: Option<Vec<LossConfig<f64>>>,
    /// Loss behind the SPA, DM and MCS comparisons; defaults to the
    /// symmetric quadratic loss over all horizons.
    #[serde(default)]
    pub test_loss: Option<LossConfig<f64>>,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    /// SPA benchmarks; all producers when absent.
    #[serde(default)]
    pub spa_benchmarks: Option<Vec<String>>,
    /// DM comparisons are against this producer (`M0` when present).
    #[serde(default)]
    pub dm_benchmark: Option<String>,
    #[serde(default = "default_level")]
    pub mcs_level: f64,
    #[serde(default = "default_econ")]
    pub econ: Option<EconConfig<f64>>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            losses: None,
            test_loss: None,
            bootstrap: BootstrapConfig::default(),
            spa_benchmarks: None,
            dm_benchmark: None,
            mcs_level: default_level(),
            econ: default_econ(),
        }
    }
}

impl EvalConfig {
    pub fn loss_grid(&self, max_h: usize) -> Result<Vec<LossConfig<f64>>> {
        match &self.losses {
            Some(l) => Ok(l.clone()),
            None => {
                let mut sets = vec![HorizonSet::Single(1)];
                if max_h > 1 {
                    sets.push(HorizonSet::UpTo(max_h));
                }
                let mut out = Vec::new();
                for hs in sets {
                    for rho in [1.0, 2.0] {
                        for phi in [0.42, 0.5, 0.58] {
                            out.push(LossConfig::new(rho, phi, hs.clone())?);
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn test_loss(&self, max_h: usize) -> Result<LossConfig<f64>> {
        match &self.test_loss {
            Some(l) => Ok(l.clone()),
            None => LossConfig::new(2.0, 0.5, HorizonSet::UpTo(max_h)),
        }
    }

    pub fn validate(&self, max_h: usize) -> Result<()> {
        self.bootstrap.validate()?;
        for c in self.loss_grid(max_h)?.iter().chain(std::iter::once(&self.test_loss(max_h)?)) {
            c.validate()?;
            if c.horizons.max_horizon() > max_h {
                return Err(Error::Config(format!("loss {} needs horizons beyond {max_h}", c.label())));
            }
        }
        if !(self.mcs_level > 0.0 && self.mcs_level < 1.0) {
            return Err(Error::Config("mcs_level must lie in (0, 1)".into()));
        }
        if let Some(e) = &self.econ {
            e.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub benchmark: String,
    pub test: String,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalRatio {
    pub producer: String,
    /// RMSFE of `exp(ŷ + σ²/2)` over RMSFE of `exp(ŷ)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub loss_tables: Vec<LossTable<f64>>,
    pub tests: Vec<TestRow>,
    pub mcs_producers: Vec<String>,
    pub mcs: Option<ConfidenceSet>,
    pub econ: Option<EconReport<f64>>,
    pub density: Vec<DensitySummary<f64>>,
    pub optimal: Vec<OptimalRatio>,
}

struct Actuals<'a> {
    series: &'a ArrivalSeries,
}

impl Actuals<'_> {
    fn at(&self, origin: NaiveDate, h: usize) -> Option<f64> {
        let t = (origin - self.series.start()).num_days() + h as i64;
        (t >= 0 && (t as usize) < self.series.len()).then(|| self.series.observed(t as usize))
    }

    fn closed(&self, origin: NaiveDate, h: usize) -> bool {
        self.series.is_closing(origin + Duration::days(h as i64))
    }
}

/// Origins at which every producer has all `horizons` with observed targets.
fn common_origins(store: &ForecastStore, producers: &[String], horizons: &[usize], act: &Actuals) -> Vec<NaiveDate> {
    let h_max = *horizons.iter().max().expect("nonempty");
    let mut set: Option<BTreeSet<NaiveDate>> = None;
    for p in producers {
        let mine: BTreeSet<NaiveDate> = store
            .origins(p, h_max)
            .into_iter()
            .filter(|&o| act.at(o, h_max).is_some() && horizons.iter().all(|&h| store.get(p, o, h).is_some()))
            .collect();
        set = Some(match set {
            None => mine,
            Some(s) => s.intersection(&mine).copied().collect(),
        });
    }
    set.unwrap_or_default().into_iter().collect()
}

fn error_block(store: &ForecastStore, p: &str, origins: &[NaiveDate], horizons: &[usize], act: &Actuals) -> Vec<Vec<f64>> {
    origins
        .iter()
        .map(|&o| horizons.iter().map(|&h| act.at(o, h).expect("observed") - store.point(p, o, h).expect("present")).collect())
        .collect()
}

/// Evaluates every producer in `store` against `series`.
pub fn evaluate(store: &ForecastStore, series: &ArrivalSeries, cfg: &EvalConfig) -> Result<EvalReport> {
    let max_h = store.max_horizon;
    cfg.validate(max_h)?;
    let producers = store.producers();
    if producers.is_empty() {
        return Err(Error::Alignment("forecast store is empty".into()));
    }
    let act = Actuals { series };

    let mut loss_tables = Vec::new();
    for lc in cfg.loss_grid(max_h)? {
        let hs = lc.horizons.horizons();
        let origins = common_origins(store, &producers, &hs, &act);
        if origins.is_empty() {
            return Err(Error::Alignment(format!("no common evaluation dates for {}", lc.label())));
        }
        let blocks: Vec<(String, Vec<Vec<f64>>)> =
            producers.iter().map(|p| (p.clone(), error_block(store, p, &origins, &hs, &act))).collect();
        loss_tables.push(rank_producers(&blocks, &lc)?);
    }

    let tl = cfg.test_loss(max_h)?;
    let hs = tl.horizons.horizons();
    let origins = common_origins(store, &producers, &hs, &act);
    if origins.is_empty() {
        return Err(Error::Alignment("no common evaluation dates for the test loss".into()));
    }
    let losses: Vec<Vec<f64>> =
        producers.iter().map(|p| date_losses(&error_block(store, p, &origins, &hs, &act), &tl)).collect::<Result<_>>()?;

    let mut tests = Vec::new();
    if producers.len() > 1 {
        let benches = cfg.spa_benchmarks.clone().unwrap_or_else(|| producers.clone());
        for b in &benches {
            let bi = producers
                .iter()
                .position(|p| p == b)
                .ok_or_else(|| Error::Config(format!("SPA benchmark {b} has no forecasts")))?;
            let alts: Vec<&[f64]> = (0..producers.len()).filter(|&k| k != bi).map(|k| losses[k].as_slice()).collect();
            let r = spa_test(&losses[bi], &alts, &cfg.bootstrap)?;
            tests.push(TestRow { benchmark: b.clone(), test: "spa".into(), statistic: r.statistic, p_value: r.p_value });
        }
        let dm_bench = cfg.dm_benchmark.clone().or_else(|| producers.contains(&"M0".to_string()).then(|| "M0".into()));
        if let Some(b) = dm_bench {
            let bi = producers
                .iter()
                .position(|p| *p == b)
                .ok_or_else(|| Error::Config(format!("DM benchmark {b} has no forecasts")))?;
            for (k, p) in producers.iter().enumerate() {
                if k == bi {
                    continue;
                }
                let d: Vec<f64> = losses[bi].iter().zip(&losses[k]).map(|(a, c)| a - c).collect();
                match dm_test(&d, tl.horizons.max_horizon()) {
                    Ok(r) => tests.push(TestRow {
                        benchmark: b.clone(),
                        test: format!("dm:{p}"),
                        statistic: r.statistic,
                        p_value: r.p_value,
                    }),
                    Err(e) => log::warn!("DM test {b} vs {p} skipped: {e}"),
                }
            }
        }
    }

    let refs: Vec<&[f64]> = losses.iter().map(Vec::as_slice).collect();
    let mcs = Some(model_confidence_set(&refs, cfg.mcs_level, &cfg.bootstrap)?);

    let one_step = common_origins(store, &producers, &[1], &act);
    let econ = match &cfg.econ {
        Some(ec) => {
            let actuals: Vec<f64> = one_step.iter().map(|&o| act.at(o, 1).expect("observed")).collect();
            let fc: Vec<(String, Vec<f64>)> = producers
                .iter()
                .map(|p| (p.clone(), one_step.iter().map(|&o| store.point(p, o, 1).expect("present")).collect()))
                .collect();
            Some(evaluate_econ(&fc, &actuals, ec)?)
        }
        None => None,
    };

    let mut density = Vec::new();
    let dp = store.density_producers();
    if !dp.is_empty() {
        let mut common: Option<BTreeSet<NaiveDate>> = None;
        for p in &dp {
            let mine: BTreeSet<NaiveDate> =
                store.density_origins(p).into_iter().filter(|&o| act.at(o, 1).is_some() && !act.closed(o, 1)).collect();
            common = Some(match common {
                None => mine,
                Some(s) => s.intersection(&mine).copied().collect(),
            });
        }
        let common: Vec<NaiveDate> = common.unwrap_or_default().into_iter().collect();
        if !common.is_empty() {
            let ys: Vec<f64> = common.iter().map(|&o| act.at(o, 1).expect("observed")).collect();
            for p in &dp {
                let draws: Vec<&[f64]> = common.iter().map(|&o| store.density(p, o).expect("present").draws.as_slice()).collect();
                density.push(summarize(p, &draws, &ys)?);
            }
        }
    }

    let open: Vec<NaiveDate> = one_step.iter().copied().filter(|&o| !act.closed(o, 1)).collect();
    let mut optimal = Vec::new();
    for p in &producers {
        let pairs: Option<Vec<(f64, f64)>> = open
            .iter()
            .map(|&o| store.get(p, o, 1).and_then(|e| Some((e.log_point?, e.variance?))))
            .collect();
        let Some(pairs) = pairs.filter(|v| !v.is_empty()) else { continue };
        let ys: Vec<f64> = open.iter().map(|&o| act.at(o, 1).expect("observed")).collect();
        let naive: Vec<f64> = pairs.iter().map(|&(lp, _)| lp.exp()).collect();
        let opt: Vec<f64> = pairs.iter().map(|&(lp, v)| optimal_point_forecast(lp, v)).collect::<Result<_>>()?;
        match rmsfe_ratio(&opt, &naive, &ys) {
            Ok(ratio) => optimal.push(OptimalRatio { producer: p.clone(), ratio }),
            Err(e) => log::warn!("optimal/naive ratio for {p} skipped: {e}"),
        }
    }

    Ok(EvalReport { loss_tables, tests, mcs_producers: producers, mcs, econ, density, optimal })
}

fn writer(dir: &Path, name: &str, written: &mut Vec<PathBuf>) -> Result<csv::Writer<BufWriter<File>>> {
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    written.push(path);
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

impl EvalReport {
    /// Writes the evaluation tables as CSV files into `dir` and returns
    /// their paths.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();

        let mut w = writer(dir, "rankings.csv", &mut written)?;
        w.write_record(["producer", "rho", "phi", "horizon_set", "loss_stat", "rank"])?;
        for t in &self.loss_tables {
            for r in &t.rows {
                w.write_record([
                    r.producer.clone(),
                    t.config.rho.to_string(),
                    t.config.phi.to_string(),
                    t.config.horizons.label(),
                    r.loss_stat.to_string(),
                    r.rank.to_string(),
                ])?;
            }
        }
        w.flush()?;

        let mut w = writer(dir, "tests.csv", &mut written)?;
        w.write_record(["benchmark", "test", "statistic", "p_value", "bucket"])?;
        for t in &self.tests {
            w.write_record([&t.benchmark, &t.test, &t.statistic.to_string(), &t.p_value.to_string(), bucket(t.p_value)])?;
        }
        w.flush()?;

        let mut w = writer(dir, "mcs.csv", &mut written)?;
        w.write_record(["producer", "in_mcs", "elimination_p"])?;
        if let Some(set) = &self.mcs {
            for (i, p) in self.mcs_producers.iter().enumerate() {
                w.write_record([p.clone(), set.contains(i).to_string(), set.p_value(i).to_string()])?;
            }
        }
        w.flush()?;

        if let Some(e) = &self.econ {
            let mut w = writer(dir, "econ.csv", &mut written)?;
            w.write_record(["producer", "lambda", "payoff", "eu", "v", "delta_v", "ce", "delta"])?;
            for r in &e.rows {
                w.write_record([
                    r.producer.clone(),
                    r.lambda.to_string(),
                    r.payoff.to_string(),
                    r.eu.to_string(),
                    r.v.to_string(),
                    r.delta_v.to_string(),
                    r.ce.to_string(),
                    r.delta.to_string(),
                ])?;
            }
            w.flush()?;
        }

        if !self.density.is_empty() {
            let path = dir.join("density.csv");
            let f = File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            write_summary_csv(&self.density, BufWriter::new(f))?;
            written.push(path);
        }

        let mut w = writer(dir, "optimal_naive.csv", &mut written)?;
        w.write_record(["producer", "ratio"])?;
        for r in &self.optimal {
            w.write_record([r.producer.clone(), r.ratio.to_string()])?;
        }
        w.flush()?;
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::DensityForecast;
    use crate::engine::{run, RunConfig, StoreEntry, StoreKey};
    use crate::models::ModelId;
    use crate::series::{simulate_dgp, DgpSpec};

    #[test]
    fn perfect_producer_wins_everything() {
        let mut spec = DgpSpec::weekly(NaiveDate::from_ymd_opt(2020, 1, 6).unwrap(), 9.0);
        spec.ar = vec![(1, 0.4)];
        spec.noise_var = 0.01;
        let s = simulate_dgp(&spec, 420, 5).unwrap();
        let cfg = RunConfig {
            models: vec![ModelId::M0, ModelId::M1, ModelId::M8],
            select: false,
            starts: 1,
            refit_every: 7,
            max_horizon: 7,
            density: Some(Default::default()),
            ..Default::default()
        };
        let mut out = run(&s, &cfg).unwrap();
        for o in cfg.origins(s.len()) {
            let date = s.date_at(o);
            for h in 1..=7.min(s.len() - 1 - o) {
                let y = s.observed(o + h);
                out.store
                    .insert(StoreKey { producer: "perfect".into(), origin: date, horizon: h }, StoreEntry { point: y, log_point: None, variance: None })
                    .unwrap();
            }
            out.store.insert_density("perfect", DensityForecast { origin: date, draws: vec![s.observed(o + 1); 50], source: "point".into() });
        }
        let ec = EvalConfig { bootstrap: BootstrapConfig { replications: 199, ..Default::default() }, ..Default::default() };
        let rep = evaluate(&out.store, &s, &ec).unwrap();
        for t in &rep.loss_tables {
            assert_eq!(t.rank_of("perfect"), Some(1), "{}", t.config.label());
        }
        let perfect = rep.density.iter().find(|d| d.producer == "perfect").unwrap();
        assert_eq!(perfect.avg_rps, 0.0);
        let econ = rep.econ.as_ref().unwrap();
        for r in econ.rows.iter().filter(|r| r.producer == "perfect") {
            assert!((r.v - econ.perfect_payoff).abs() < 1e-9);
        }
        let idx = rep.mcs_producers.iter().position(|p| p == "perfect").unwrap();
        assert!(rep.mcs.as_ref().unwrap().contains(idx));
        assert!(rep.optimal.iter().any(|r| r.producer == "M1"));

        let again = evaluate(&out.store, &s, &ec).unwrap();
        assert_eq!(rep, again);
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let f1 = rep.write_dir(d1.path()).unwrap();
        again.write_dir(d2.path()).unwrap();
        for f in f1 {
            let name = f.file_name().unwrap();
            assert_eq!(std::fs::read(&f).unwrap(), std::fs::read(d2.path().join(name)).unwrap());
        }
    }
}
