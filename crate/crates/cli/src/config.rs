//! The JSON configuration file and its resolution against the file system.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use arriva::engine::{EvalConfig, RunConfig};
use arriva::series::{io, validate_and_impute, ArrivalSeries};
use arriva::Error;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub calls: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closing_days: Option<PathBuf>,
}

/// Published schema: `config.schema.json` next to this crate's manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub data: DataPaths,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub evaluate: EvalConfig,
    /// Output directory, relative to the config file. `--out` wins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// A config file together with the directory its relative paths refer to.
pub struct Loaded {
    pub file: ConfigFile,
    pub bytes: Vec<u8>,
    pub base: PathBuf,
}

pub fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::new("load", Error::Io(format!("{}: {e}", path.display()))))
}

pub fn load(path: &Path) -> Result<Loaded, Failure> {
    let bytes = read(path)?;
    let file: ConfigFile = serde_json::from_slice(&bytes)
        .map_err(|e| Failure::new("schema", Error::Config(format!("{}: {e}", path.display()))))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { file, bytes, base })
}

impl Loaded {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// Overrides every seed in the configuration.
    pub fn set_seed(&mut self, seed: u64) {
        self.file.run.seed = seed;
        self.file.evaluate.bootstrap.seed = seed;
        if let Some(d) = &mut self.file.run.density {
            d.seed = seed;
        }
    }

    /// Reads and validates the arrival data. Returns the series and the raw
    /// bytes of each input keyed by its path as written in the config.
    pub fn series(&self) -> Result<(ArrivalSeries, Vec<(String, Vec<u8>)>), Failure> {
        let data = &self.file.data;
        let mut inputs = Vec::new();
        let calls_bytes = read(&self.resolve(&data.calls))?;
        let raw = io::read_calls(calls_bytes.as_slice()).map_err(|e| Failure::new("load", e))?;
        inputs.push((data.calls.display().to_string(), calls_bytes));
        let mut closing: BTreeSet<NaiveDate> = BTreeSet::new();
        if let Some(p) = &data.closing_days {
            let bytes = read(&self.resolve(p))?;
            closing = io::read_closing_days(BufReader::new(bytes.as_slice())).map_err(|e| Failure::new("load", e))?;
            inputs.push((p.display().to_string(), bytes));
        }
        let series = validate_and_impute(&raw, &closing).map_err(|e| Failure::new("series", e))?;
        Ok((series, inputs))
    }

    /// Semantic checks that need the series length.
    pub fn check(&self, n: usize) -> Result<(), Failure> {
        self.file.run.validate(n).map_err(|e| Failure::new("run", e))?;
        self.file.evaluate.validate(self.file.run.max_horizon).map_err(|e| Failure::new("evaluate", e))?;
        Ok(())
    }

    pub fn output_dir(&self, out: Option<PathBuf>) -> Result<PathBuf, Failure> {
        out.or_else(|| self.file.output.as_ref().map(|p| self.resolve(p)))
            .ok_or_else(|| Failure::new("config", Error::Config("no output directory: pass --out or set `output`".into())))
    }
}

pub fn create_file(path: &Path) -> Result<File, Failure> {
    File::create(path).map_err(|e| Failure::new("write", Error::Io(format!("{}: {e}", path.display()))))
}
