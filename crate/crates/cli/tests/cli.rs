use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gaussmarg(out_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaussmarg"))
        .args(args)
        .env("GAUSSMARG_OUT_DIR", out_dir)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const DEMO: &str = r#"
method = "manifold-walk"
seed = 7
n_samples = 300
burn_in = 100
chains = 2

[constraints]
format_version = 1
windows = [[2.0], [2.0], [2.0]]

[observables]
subsystem = [0]
orders = [2]
pairs = [[0, 1]]
"#;

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = gaussmarg(dir.path(), &["verify", "--suite", "analytic"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify_report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert!(dir.path().join("verify_manifest.json").exists());

    let tight = gaussmarg(
        dir.path(),
        &[
            "verify",
            "--suite",
            "analytic",
            "--tol",
            "analytic.entropy_continuation=1e-15",
        ],
    );
    assert_eq!(tight.status.code(), Some(1));
    assert!(stdout(&tight).contains("[FAIL] analytic.entropy_continuation"));

    assert_eq!(
        gaussmarg(dir.path(), &["verify", "--suite", "bogus"]).status.code(),
        Some(2)
    );
    assert_eq!(
        gaussmarg(dir.path(), &["verify", "--tol", "no.such=1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        gaussmarg(dir.path(), &["verify", "--tol", "novalue"]).status.code(),
        Some(2)
    );
}

#[test]
fn verify_replica_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = gaussmarg(
        dir.path(),
        &["verify", "--suite", "replica", "--prefactor-samples", "100000"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("replica.master_determinant "));
}

#[test]
fn sample_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("demo.toml");
    fs::write(&cfg, DEMO).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = gaussmarg(out, &["sample", cfg.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let stats = fs::read_to_string(a.join("statistics.csv")).unwrap();
    let row = stats.lines().find(|l| l.starts_with("renyi_trace[0],2,")).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert!((fields[3].parse::<f64>().unwrap() - 0.5).abs() < 1e-9);
    assert!(fields[4].parse::<f64>().is_ok());
    assert!(stats.contains("pair_norm[0+1]"));
    for name in [
        "batch.json",
        "batch_samples.csv",
        "statistics.csv",
        "sample_manifest.json",
    ] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("sample_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);
    assert_eq!(manifest["started_unix"], 1_700_000_000u64);
}

#[test]
fn sample_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        gaussmarg(dir.path(), &["sample", "missing.toml"]).status.code(),
        Some(2)
    );
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, DEMO.replace("[[2.0], [2.0], [2.0]]", "[[0.5], [2.0], [2.0]]")).unwrap();
    assert_eq!(
        gaussmarg(dir.path(), &["sample", cfg.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert!(!dir.path().join("batch.json").exists());
}

#[test]
fn page_slope_uniform_spec_is_linear() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    fs::write(&spec, "format_version = 1\nwindows = [[3.0], [3.0], [3.0], [3.0]]\n").unwrap();
    let o = gaussmarg(dir.path(), &["page-slope", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("page_slope.csv")).unwrap();
    let values: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 5);
    for (k, v) in values.iter().enumerate() {
        assert!((v - k as f64 * values[1]).abs() < 1e-12);
    }

    fs::write(&spec, "format_version = 1\nwindows = []\n").unwrap();
    assert_eq!(
        gaussmarg(dir.path(), &["page-slope", spec.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

fn reported_count(o: &Output) -> f64 {
    let out = stdout(o);
    let line = out.lines().find(|l| l.starts_with("total mode count")).unwrap();
    line.rsplit(' ').next().unwrap().parse().unwrap()
}

#[test]
fn hawking_counts_and_presets() {
    let dir = tempfile::tempdir().unwrap();
    let solar = gaussmarg(dir.path(), &["hawking", "--mass", "1", "--count-only"]);
    assert_eq!(solar.status.code(), Some(0));
    let count = reported_count(&solar);
    assert!((count.log10() - 76.0).abs() <= 1.0, "{count}");

    let doubled = gaussmarg(dir.path(), &["hawking", "--mass", "1", "--k", "2", "--count-only"]);
    assert!((reported_count(&doubled) / count - 0.5).abs() < 1e-12);

    let capped = gaussmarg(dir.path(), &["hawking", "--mass", "1"]);
    assert_eq!(capped.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&capped.stderr).contains("mode cap"));

    let toy = gaussmarg(dir.path(), &["hawking", "--mass-planck", "3", "--windows", "0..2"]);
    assert_eq!(toy.status.code(), Some(0), "{}", String::from_utf8_lossy(&toy.stderr));
    let text = fs::read_to_string(dir.path().join("hawking_spec.toml")).unwrap();
    let file = gaussmarg::constraints::ConstraintFile::parse(&text).unwrap();
    assert_eq!(file.to_spec().unwrap().n_modes(), 5);
}
