//! `arriva`: run the forecasting pipeline from a JSON configuration.
//!
//! Every outcome is one line of JSON: a summary on stdout on success, or
//! `{"error":{"stage","kind","message"}}` on stderr with a nonzero exit.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use arriva::engine::{content_hash, evaluate, render_report, run, RunConfig, RunManifest};
use arriva::models::ModelId;
use arriva::series::{io, simulate_dgp, DgpSpec, GarchSpec};
use arriva::Error;
use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use config::{create_file, ConfigFile, DataPaths};

#[derive(Parser)]
#[command(name = "arriva", version, about = "Forecast and evaluate daily call-centre arrivals")]
struct Cli {
    /// Worker threads; all cores when absent.
    #[arg(long, global = true, env = "ARRIVA_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config (and its data) or a run manifest (and its outputs).
    Validate {
        #[arg(long, env = "ARRIVA_CONFIG")]
        config: PathBuf,
    },
    /// Forecast, evaluate and write all artifacts plus `manifest.json`.
    Run {
        #[arg(long, env = "ARRIVA_CONFIG")]
        config: PathBuf,
        #[arg(long, env = "ARRIVA_OUT")]
        out: Option<PathBuf>,
        /// Replaces every seed in the config.
        #[arg(long, env = "ARRIVA_SEED")]
        seed: Option<u64>,
    },
    /// Render `report.md` and the table CSVs from a completed run.
    Report {
        #[arg(long, env = "ARRIVA_OUT")]
        out: PathBuf,
    },
    /// Write a synthetic series and a config that runs on it.
    Simulate {
        /// DGP file `{"dgp": {...}, "length": n}`; a built-in process when absent.
        #[arg(long, env = "ARRIVA_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long, env = "ARRIVA_OUT")]
        out: PathBuf,
        #[arg(long, env = "ARRIVA_SEED", default_value_t = 0)]
        seed: u64,
    },
}

/// An error with the pipeline stage it came from.
#[derive(Debug)]
pub struct Failure {
    stage: &'static str,
    error: Error,
}

impl Failure {
    pub fn new(stage: &'static str, error: Error) -> Self {
        Failure { stage, error }
    }

    fn to_json(&self) -> Value {
        let message = self.error.to_string().replace('\n', " ");
        json!({ "error": { "stage": self.stage, "kind": self.error.kind(), "message": message } })
    }
}

fn io_err(stage: &'static str, path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new(stage, Error::Io(format!("{}: {e}", path.display())))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    create_file(path)?.write_all(bytes).map_err(|e| io_err("write", path, e))
}

fn pretty(v: &impl serde::Serialize) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("serializable");
    s.push(b'\n');
    s
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn cmd_validate(path: &Path) -> Result<Value, Failure> {
    let bytes = config::read(path)?;
    let value: Value = serde_json::from_slice(&bytes).map_err(|e| Failure::new("schema", Error::Parse(e.to_string())))?;
    if value.get("tool_version").is_some() {
        return validate_manifest(path, value);
    }
    let loaded = config::load(path)?;
    let (series, _) = loaded.series()?;
    loaded.check(series.len())?;
    let origins = loaded.file.run.origins(series.len()).count();
    Ok(json!({ "status": "ok", "command": "validate", "observations": series.len(), "origins": origins }))
}

/// Parses the embedded config and checks the recorded output hashes against
/// the files next to the manifest.
fn validate_manifest(path: &Path, value: Value) -> Result<Value, Failure> {
    let m: RunManifest = serde_json::from_value(value).map_err(|e| Failure::new("schema", Error::Config(format!("manifest: {e}"))))?;
    let _: ConfigFile =
        serde_json::from_value(m.config.clone()).map_err(|e| Failure::new("schema", Error::Config(format!("manifest config: {e}"))))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    for (name, hash) in &m.outputs {
        let p = dir.join(name);
        let bytes = std::fs::read(&p).map_err(|e| io_err("manifest", &p, e))?;
        if &content_hash(&bytes) != hash {
            return Err(Failure::new("manifest", Error::Validation(format!("{name} does not match its recorded hash"))));
        }
    }
    Ok(json!({ "status": "ok", "command": "validate", "manifest": true, "outputs_verified": m.outputs.len() }))
}

fn cmd_run(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<Value, Failure> {
    let mut loaded = config::load(path)?;
    if let Some(s) = seed {
        loaded.set_seed(s);
    }
    let (series, inputs) = loaded.series()?;
    loaded.check(series.len())?;
    let dir = loaded.output_dir(out)?;
    std::fs::create_dir_all(&dir).map_err(|e| io_err("write", &dir, e))?;

    let cfg = &loaded.file;
    let result = run(&series, &cfg.run).map_err(|e| Failure::new("run", e))?;
    let report = evaluate(&result.store, &series, &cfg.evaluate).map_err(|e| Failure::new("evaluate", e))?;

    let mut outputs = Vec::new();
    let forecasts = dir.join("forecasts.csv");
    let csv = result.store.to_csv_string().map_err(|e| Failure::new("write", e))?;
    write_bytes(&forecasts, csv.as_bytes())?;
    outputs.push(forecasts);

    let specs = dir.join("specs.json");
    write_bytes(&specs, &pretty(&result.specs))?;
    outputs.push(specs);

    let diagnostics = dir.join("diagnostics.csv");
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let rec = |w: &mut csv::Writer<Vec<u8>>, r: [&str; 3]| w.write_record(r).map_err(|e| Failure::new("write", Error::from(e)));
    rec(&mut w, ["producer", "origin", "message"])?;
    for d in &result.diagnostics {
        let origin = d.origin.map(|o| o.to_string()).unwrap_or_default();
        rec(&mut w, [&d.producer, &origin, &d.message])?;
    }
    let bytes = w.into_inner().map_err(|e| io_err("write", &diagnostics, e))?;
    write_bytes(&diagnostics, &bytes)?;
    outputs.push(diagnostics);

    outputs.extend(report.write_dir(&dir).map_err(|e| Failure::new("write", e))?);

    // The echo leaves out the output directory so the manifest does not
    // depend on where it was written.
    let echo = ConfigFile { output: None, ..cfg.clone() };
    let mut manifest = RunManifest::new(serde_json::to_value(&echo).expect("serializable"));
    manifest.inputs.insert("config".into(), content_hash(&loaded.bytes));
    for (name, bytes) in &inputs {
        manifest.inputs.insert(name.clone(), content_hash(bytes));
    }
    for p in &outputs {
        let bytes = std::fs::read(p).map_err(|e| io_err("write", p, e))?;
        manifest.outputs.insert(file_name(p), content_hash(&bytes));
    }
    write_bytes(&dir.join("manifest.json"), &pretty(&manifest))?;

    Ok(json!({
        "status": "ok",
        "command": "run",
        "out": dir.display().to_string(),
        "forecasts": result.store.len(),
        "diagnostics": result.diagnostics.len(),
        "files": outputs.len() + 1,
    }))
}

fn cmd_report(dir: &Path) -> Result<Value, Failure> {
    let files = render_report(dir).map_err(|e| Failure::new("report", e))?;
    let names: Vec<String> = files.iter().map(|p| file_name(p)).collect();
    Ok(json!({ "status": "ok", "command": "report", "files": names }))
}

fn default_length() -> usize {
    749
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateFile {
    dgp: DgpSpec,
    #[serde(default = "default_length")]
    length: usize,
}

/// Log-normal weekly process with seasonal ARMA dynamics and GARCH errors.
fn default_dgp() -> DgpSpec {
    let mut d = DgpSpec::weekly(NaiveDate::from_ymd_opt(2018, 1, 1).expect("valid date"), 9.0);
    d.ar = vec![(1, 0.6)];
    d.seasonal_ar = vec![(7, 0.5)];
    d.seasonal_ma = vec![(7, -0.3)];
    d.garch = Some(GarchSpec { omega: 0.0005, alpha: 0.15, beta: 0.8 });
    d
}

fn cmd_simulate(path: Option<&Path>, dir: &Path, seed: u64) -> Result<Value, Failure> {
    let spec = match path {
        Some(p) => serde_json::from_slice::<SimulateFile>(&config::read(p)?)
            .map_err(|e| Failure::new("schema", Error::Config(format!("{}: {e}", p.display()))))?,
        None => SimulateFile { dgp: default_dgp(), length: default_length() },
    };
    let series = simulate_dgp(&spec.dgp, spec.length, seed).map_err(|e| Failure::new("simulate", e))?;
    std::fs::create_dir_all(dir).map_err(|e| io_err("write", dir, e))?;

    let mut calls = Vec::new();
    io::write_calls(&series, &mut calls).map_err(|e| Failure::new("write", e))?;
    write_bytes(&dir.join("calls.csv"), &calls)?;
    let mut files = vec!["calls.csv", "config.json"];
    let closing_days = if series.closing_days().is_empty() {
        None
    } else {
        let mut bytes = Vec::new();
        io::write_closing_days(series.closing_days(), &mut bytes).map_err(|e| Failure::new("write", e))?;
        write_bytes(&dir.join("closing_days.txt"), &bytes)?;
        files.push("closing_days.txt");
        Some(PathBuf::from("closing_days.txt"))
    };

    // a one-year window when the series allows it
    let window = 371.min(spec.length.saturating_sub(spec.length / 3)).max(14);
    let cfg = ConfigFile {
        data: DataPaths { calls: "calls.csv".into(), closing_days },
        run: RunConfig {
            window,
            models: ModelId::ALL[..6].to_vec(),
            combinations: vec!["avg.G4".into(), "aic.G4".into()],
            refit_every: 7,
            seed,
            ..Default::default()
        },
        evaluate: Default::default(),
        output: Some("out".into()),
    };
    write_bytes(&dir.join("config.json"), &pretty(&cfg))?;
    Ok(json!({ "status": "ok", "command": "simulate", "observations": series.len(), "files": files }))
}

fn usage_failure(e: &clap::Error) -> Value {
    let text = e.to_string();
    let message = text
        .lines()
        .map(str::trim)
        .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" ");
    json!({ "error": { "stage": "cli", "kind": "usage", "message": message.trim_start_matches("error: ") } })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", usage_failure(&e));
            return ExitCode::from(2);
        }
    };
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("{}", Failure::new("cli", Error::Config(format!("--jobs: {e}"))).to_json());
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Validate { config } => cmd_validate(config),
        Command::Run { config, out, seed } => cmd_run(config, out.clone(), *seed),
        Command::Report { out } => cmd_report(out),
        Command::Simulate { config, out, seed } => cmd_simulate(config.as_deref(), out, *seed),
    };
    match result {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::FAILURE
        }
    }
}
