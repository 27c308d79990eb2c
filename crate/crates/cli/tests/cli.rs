use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use seasonal_dispersal::RunManifest;

const BIN: &str = env!("CARGO_BIN_EXE_seasonal-dispersal");

fn config(delta: f64, rho: f64, b: f64) -> String {
    format!(
        r#"{{
  "grid": {{"x_min": -4, "x_max": 4, "n": 40, "boundary": "periodic_wrap"}},
  "kernel": {{"family": "tent", "gamma": 1.0}},
  "operator": {{"d": 1.0}},
  "season": {{"omega": 2.0, "rho": {rho}, "delta": {delta}}},
  "growth": {{"b": {b}}},
  "solver": {{"periods": 4}}
}}"#
    )
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn no_args_prints_usage_and_exits_1() {
    let o = run(&[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_subcommand_exits_1() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn help_exits_0() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn eigen_writes_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &config(0.5, 0.5, 1.0));
    let out = dir.path().join("e.csv");
    let o = run(&["eigen", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "R,lambda_p,lambda_p_omega,residual,iterations,bound_lo,bound_hi"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    // constant b on a normalized periodic grid: lambda_p = -b exactly
    let lp: f64 = row[1].parse().unwrap();
    let lpo: f64 = row[2].parse().unwrap();
    assert!((lp + 1.0).abs() < 1e-10, "{lp}");
    assert!((lpo - (0.5 * 0.5 + 0.5 * lp)).abs() < 1e-10, "{lpo}");
    let m = RunManifest::read(dir.path().join("e.manifest.json")).unwrap();
    assert_eq!(m.command, "eigen");
    assert_eq!(m.files.len(), 1);
    assert!(m.verify().is_empty());
}

#[test]
fn eigen_sweep_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &config(0.5, 0.5, 1.0));
    let out = dir.path().join("sweep.csv");
    let o = run(&["eigen", "--config", s(&cfg), "--sweep-R", "8,16,32", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 4);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sweep_summary.json")).unwrap())
            .unwrap();
    assert!(summary["lambda_p_omega_limit"].is_number());
    let m = RunManifest::read(dir.path().join("sweep.manifest.json")).unwrap();
    assert_eq!(m.files.len(), 2);
}

#[test]
fn periodic_in_extinction_regime_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // lambda_p_omega = 2*0.5 + 0.5*(-0.5) > 0
    let cfg = write_config(dir.path(), "c.json", &config(2.0, 0.5, 0.5));
    let out = dir.path().join("p.csv");
    let o = run(&["periodic", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("extinction regime: no positive periodic solution"),
        "{err}"
    );
    assert!(!out.exists());
}

#[test]
fn periodic_both_methods_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &config(0.5, 0.5, 1.0));
    let out = dir.path().join("p.csv");
    let o = run(&["periodic", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("p_summary.json")).unwrap())
            .unwrap();
    let a = summary[0]["u_star_if_constant"].as_f64().unwrap();
    let b = summary[1]["u_star_if_constant"].as_f64().unwrap();
    assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    assert!(dir.path().join("p_poincare.csv").exists());
}

#[test]
fn config_range_violation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &config(0.5, 1.2, 1.0));
    let out = dir.path().join("e.csv");
    let o = run(&["eigen", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("season.rho must lie in (0,1)"));
}

#[test]
fn missing_config_file_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e.csv");
    let o = run(&["eigen", "--config", s(&dir.path().join("nope.json")), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_columns_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &config(0.5, 0.5, 1.0));
    let out1 = dir.path().join("a.csv");
    let out2 = dir.path().join("b.csv");
    for out in [&out1, &out2] {
        let o = run(&["simulate", "--config", s(&cfg), "--out", s(out)]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(&out1).unwrap();
    assert_eq!(a, std::fs::read(&out2).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,season,node_index,x,u");
    // initial state plus four period ends, 40 nodes each
    assert_eq!(text.lines().count(), 1 + 5 * 40);
    let m1 = RunManifest::read(dir.path().join("a.manifest.json")).unwrap();
    let m2 = RunManifest::read(dir.path().join("b.manifest.json")).unwrap();
    assert_eq!(m1.files[0].sha256, m2.files[0].sha256);
}

#[test]
fn classify_and_sweep_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &config(0.5, 0.5, 1.0));
    let out = dir.path().join("v.json");
    let o = run(&["classify", "--config", s(&cfg), "--periods", "60", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["verdict"]["predicted"], "persistence");
    assert_eq!(doc["verdict"]["observed"], "persistent");

    // classification needs a long horizon from the config itself
    let text = config(0.5, 0.5, 1.0).replace("\"periods\": 4", "\"periods\": 60");
    let cfg = write_config(dir.path(), "long.json", &text);
    let out = dir.path().join("grid.csv");
    let o = run(&[
        "sweep", "--config", s(&cfg), "--delta", "0.5,3", "--rho", "0.3,0.5", "--out", s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "delta,rho,lambda_p_omega,predicted,observed,agreement"
    );
    assert_eq!(lines.filter(|l| l.ends_with("true")).count(), 4, "{text}");
}
