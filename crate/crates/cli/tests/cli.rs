use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_arriva"));
    for var in ["ARRIVA_CONFIG", "ARRIVA_OUT", "ARRIVA_SEED", "ARRIVA_JOBS"] {
        c.env_remove(var);
    }
    c
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn bundled() -> PathBuf {
    root().join("configs/synthetic/config.json")
}

fn arriva(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    let s = String::from_utf8(o.stdout.clone()).unwrap();
    assert_eq!(s.trim_end().lines().count(), 1, "stdout: {s}");
    serde_json::from_str(&s).unwrap()
}

/// Asserts a failed invocation and returns its parsed error object.
fn failure(o: &Output) -> Value {
    assert!(!o.status.success());
    let s = String::from_utf8(o.stderr.clone()).unwrap();
    assert_eq!(s.trim_end().lines().count(), 1, "stderr: {s}");
    let v: Value = serde_json::from_str(&s).unwrap();
    for k in ["stage", "kind", "message"] {
        assert!(v["error"][k].is_string(), "missing {k}: {s}");
    }
    v["error"].clone()
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn run_into(dir: &Path, extra: &[&str]) -> Output {
    let cfg = bundled();
    let mut args = vec!["run", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    arriva(&args)
}

/// One shared run of the bundled config.
fn base_run() -> &'static Path {
    static DIR: OnceLock<TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let d = tempfile::tempdir().unwrap();
        let o = run_into(d.path(), &[]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        d
    })
    .path()
}

#[test]
fn bundled_config_runs_and_writes_declared_files() {
    let dir = base_run();
    let manifest: Value = serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    let declared: Vec<&String> = manifest["outputs"].as_object().unwrap().keys().collect();
    for name in ["forecasts.csv", "specs.json", "diagnostics.csv", "rankings.csv", "tests.csv", "mcs.csv", "econ.csv", "density.csv"] {
        assert!(declared.iter().any(|d| d.as_str() == name), "{name} not declared");
    }
    for name in declared {
        assert!(dir.join(name).is_file(), "{name} missing");
    }
    let csv = std::fs::read_to_string(dir.join("forecasts.csv")).unwrap();
    assert!(csv.starts_with("producer,origin,horizon,point,log_point,variance\n"));
    assert!(!csv.contains('\r'));
}

#[test]
fn window_longer_than_series_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg: Value = serde_json::from_slice(&std::fs::read(bundled()).unwrap()).unwrap();
    cfg["data"]["calls"] = Value::String(root().join("configs/synthetic/calls.csv").display().to_string());
    cfg["data"]["closing_days"] = Value::String(root().join("configs/synthetic/closing_days.txt").display().to_string());
    cfg["run"]["window"] = 1000.into();
    let path = tmp.path().join("c.json");
    std::fs::write(&path, serde_json::to_vec(&cfg).unwrap()).unwrap();
    let out = tmp.path().join("out");
    for cmd in ["validate", "run"] {
        let mut args = vec![cmd, "--config", path.to_str().unwrap()];
        if cmd == "run" {
            args.extend(["--out", out.to_str().unwrap()]);
        }
        let e = failure(&arriva(&args));
        let msg = e["message"].as_str().unwrap();
        assert!(msg.contains("window R = 1000") && msg.contains("series length 420"), "{msg}");
        assert_eq!(e["kind"], "config");
    }
    assert!(!out.exists());
}

#[test]
fn rerun_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_into(a.path(), &["--seed", "5", "--jobs", "1"]).status.success());
    let o = bin()
        .args(["run", "--config", bundled().to_str().unwrap()])
        .env("ARRIVA_OUT", b.path())
        .env("ARRIVA_SEED", "5")
        .env("ARRIVA_JOBS", "3")
        .output()
        .unwrap();
    assert!(o.status.success());
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert!(fa.len() >= 10);
    assert_eq!(fa, fb);
    // the seed override reaches the manifest and changes the bootstrap
    let m: Value = serde_json::from_slice(&fa["manifest.json"]).unwrap();
    assert_eq!(m["config"]["run"]["seed"], 5);
    assert_eq!(m["config"]["evaluate"]["bootstrap"]["seed"], 5);
    assert_ne!(files(base_run())["tests.csv"], fa["tests.csv"]);
}

#[test]
fn report_regeneration_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, bytes) in files(base_run()) {
        std::fs::write(tmp.path().join(name), bytes).unwrap();
    }
    let dir = tmp.path().to_str().unwrap();
    let first = arriva(&["report", "--out", dir]);
    let v = stdout_json(&first);
    assert!(v["files"].as_array().unwrap().iter().any(|f| f == "report.md"));
    let once = files(tmp.path());
    assert!(arriva(&["report", "--out", dir]).status.success());
    assert_eq!(once, files(tmp.path()));
    let md = String::from_utf8(once["report.md"].clone()).unwrap();
    assert!(md.contains("M0") && md.contains("avg.G2"));
}

#[test]
fn manifest_config_matches_schema_and_reparses() {
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(root().join("crates/cli/config.schema.json")).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();

    let bundled_cfg: Value = serde_json::from_slice(&std::fs::read(bundled()).unwrap()).unwrap();
    assert!(validator.is_valid(&bundled_cfg));

    let path = base_run().join("manifest.json");
    let manifest: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    let config = &manifest["config"];
    let errors: Vec<String> = validator.iter_errors(config).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 3);

    // the echo is a complete config: written back, it validates like the original
    let tmp = tempfile::tempdir().unwrap();
    for f in ["calls.csv", "closing_days.txt"] {
        std::fs::copy(root().join("configs/synthetic").join(f), tmp.path().join(f)).unwrap();
    }
    let echo = tmp.path().join("echo.json");
    std::fs::write(&echo, serde_json::to_vec(config).unwrap()).unwrap();
    let v = stdout_json(&arriva(&["validate", "--config", echo.to_str().unwrap()]));
    assert_eq!(v["observations"], 420);

    let v = stdout_json(&arriva(&["validate", "--config", path.to_str().unwrap()]));
    assert_eq!(v["manifest"], true);

    let mut bad = config.clone();
    bad["run"]["extra"] = 1.into();
    assert!(!validator.is_valid(&bad));
}

#[test]
fn tampered_output_fails_manifest_check() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, bytes) in files(base_run()) {
        std::fs::write(tmp.path().join(name), bytes).unwrap();
    }
    std::fs::write(tmp.path().join("mcs.csv"), "producer,in_mcs,elimination_p\n").unwrap();
    let e = failure(&arriva(&["validate", "--config", tmp.path().join("manifest.json").to_str().unwrap()]));
    assert!(e["message"].as_str().unwrap().contains("mcs.csv"));
}

#[test]
fn simulate_emits_a_valid_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim");
    let v = stdout_json(&arriva(&["simulate", "--out", out.to_str().unwrap(), "--seed", "9"]));
    assert_eq!(v["observations"], 749);
    let cfg = out.join("config.json");
    let v = stdout_json(&arriva(&["validate", "--config", cfg.to_str().unwrap()]));
    assert_eq!(v["origins"], 749 - 371);
    let again = tmp.path().join("again");
    arriva(&["simulate", "--out", again.to_str().unwrap(), "--seed", "9"]);
    assert_eq!(files(&out), files(&again));
}

#[test]
fn failures_are_single_line_json() {
    let tmp = tempfile::tempdir().unwrap();
    let garbage = tmp.path().join("garbage.json");
    std::fs::write(&garbage, "{ not json").unwrap();
    let unknown = tmp.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"data":{"calls":"calls.csv"},"run":{"windw":300}}"#).unwrap();
    let no_data = tmp.path().join("no_data.json");
    std::fs::write(&no_data, r#"{"data":{"calls":"missing.csv"}}"#).unwrap();
    let bad_csv = tmp.path().join("bad.csv");
    std::fs::write(&bad_csv, "day,n\n2020-01-01,3\n").unwrap();
    let bad_header = tmp.path().join("bad_header.json");
    std::fs::write(&bad_header, r#"{"data":{"calls":"bad.csv"}}"#).unwrap();
    let p = |q: &Path| q.to_str().unwrap().to_string();

    let cases: Vec<(Vec<String>, &str)> = vec![
        (vec![], "usage"),
        (vec!["frobnicate".into()], "usage"),
        (vec!["run".into()], "usage"),
        (vec!["run".into(), "--config".into(), p(&bundled()), "--seed".into(), "x".into()], "usage"),
        (vec!["validate".into(), "--config".into(), p(&tmp.path().join("absent.json"))], "io"),
        (vec!["validate".into(), "--config".into(), p(&garbage)], "parse"),
        (vec!["validate".into(), "--config".into(), p(&unknown)], "config"),
        (vec!["validate".into(), "--config".into(), p(&no_data)], "io"),
        (vec!["validate".into(), "--config".into(), p(&bad_header)], "parse"),
        (vec!["run".into(), "--config".into(), p(&bad_header)], "parse"),
        (vec!["report".into(), "--out".into(), p(tmp.path())], "io"),
    ];
    for (args, kind) in cases {
        let e = failure(&bin().args(&args).output().unwrap());
        assert_eq!(e["kind"], kind, "{args:?}: {e}");
    }
}
