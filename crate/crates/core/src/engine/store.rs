use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::Scheme;
use crate::density::DensityForecast;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StoreKey {
    pub producer: String,
    pub origin: NaiveDate,
    pub horizon: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoreEntry {
    pub point: f64,
    pub log_point: Option<f64>,
    pub variance: Option<f64>,
}

/// Forecasts keyed by (producer, origin, horizon); the target date is
/// `origin + horizon`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForecastStore {
    pub scheme: Scheme,
    pub window: usize,
    pub max_horizon: usize,
    entries: BTreeMap<StoreKey, StoreEntry>,
    densities: BTreeMap<String, BTreeMap<NaiveDate, DensityForecast>>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    producer: String,
    origin: NaiveDate,
    horizon: usize,
    point: f64,
    log_point: Option<f64>,
    variance: Option<f64>,
}

impl ForecastStore {
    pub fn new(scheme: Scheme, window: usize, max_horizon: usize) -> Self {
        ForecastStore { scheme, window, max_horizon, ..Default::default() }
    }

    /// Adds an entry; keys are never overwritten.
    pub fn insert(&mut self, key: StoreKey, entry: StoreEntry) -> Result<()> {
        if self.entries.contains_key(&key) {
            return Err(Error::Validation(format!(
                "duplicate forecast for {} at {} h={}",
                key.producer, key.origin, key.horizon
            )));
        }
        self.entries.insert(key, entry);
        Ok(())
    }

    pub fn insert_density(&mut self, producer: &str, d: DensityForecast) {
        self.densities.entry(producer.to_string()).or_default().insert(d.origin, d);
    }

    pub fn get(&self, producer: &str, origin: NaiveDate, horizon: usize) -> Option<&StoreEntry> {
        self.entries.get(&StoreKey { producer: producer.to_string(), origin, horizon })
    }

    pub fn point(&self, producer: &str, origin: NaiveDate, horizon: usize) -> Option<f64> {
        self.get(producer, origin, horizon).map(|e| e.point)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&StoreKey, &StoreEntry)> {
        self.entries.iter()
    }

    /// Producers in identifier order.
    pub fn producers(&self) -> Vec<String> {
        let mut p: Vec<String> = self.entries.keys().map(|k| k.producer.clone()).collect();
        p.dedup();
        p
    }

    /// Origins at which `producer` has an `h`-step forecast.
    pub fn origins(&self, producer: &str, horizon: usize) -> Vec<NaiveDate> {
        self.entries.keys().filter(|k| k.producer == producer && k.horizon == horizon).map(|k| k.origin).collect()
    }

    pub fn density(&self, producer: &str, origin: NaiveDate) -> Option<&DensityForecast> {
        self.densities.get(producer).and_then(|m| m.get(&origin))
    }

    pub fn density_producers(&self) -> Vec<String> {
        self.densities.keys().cloned().collect()
    }

    pub fn density_origins(&self, producer: &str) -> Vec<NaiveDate> {
        self.densities.get(producer).map(|m| m.keys().copied().collect()).unwrap_or_default()
    }

    /// Writes `producer,origin,horizon,point,log_point,variance`. Densities
    /// are not persisted.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (k, e) in &self.entries {
            w.serialize(CsvRow {
                producer: k.producer.clone(),
                origin: k.origin,
                horizon: k.horizon,
                point: e.point,
                log_point: e.log_point,
                variance: e.variance,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn read_csv<R: Read>(reader: R, scheme: Scheme, window: usize, max_horizon: usize) -> Result<Self> {
        let mut store = ForecastStore::new(scheme, window, max_horizon);
        for row in csv::Reader::from_reader(reader).deserialize() {
            let r: CsvRow = row?;
            store.insert(
                StoreKey { producer: r.producer, origin: r.origin, horizon: r.horizon },
                StoreEntry { point: r.point, log_point: r.log_point, variance: r.variance },
            )?;
        }
        Ok(store)
    }
}
