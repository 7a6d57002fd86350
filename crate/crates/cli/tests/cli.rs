use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn asm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asm")).args(args).env_remove("ASM_JOBS").output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let out = dir.join("out");
    let text = format!("{body}\n[output]\ndir = {:?}\n", out.to_str().unwrap());
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const GAUSS: &str = r#"
seed = 5

[target]
name = "gaussian"
dim = 1

[adapt]
alpha_star = 0.234
n_steps = 1000

[[functionals]]
kind = "power"
index = 0
power = 2
"#;

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn summary(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn minimal_run_writes_trace_and_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "g.toml", GAUSS);
    let out = asm(&["run", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("out/asm_r0.trace.csv"));
    assert_eq!(header, ["n", "x1", "s", "theta", "alpha", "accepted", "eta"]);
    assert_eq!(rows.len(), 1000);
    let mut last_n = 0u64;
    for row in &rows {
        let n: u64 = row[0].parse().unwrap();
        assert!(n > last_n);
        last_n = n;
        let s: f64 = row[2].parse().unwrap();
        let theta: f64 = row[3].parse().unwrap();
        assert!((theta - s.exp()).abs() <= 1e-12 * theta);
        assert!(row[5] == "0" || row[5] == "1");
        // shortest round-trip formatting
        for (k, field) in row.iter().enumerate().skip(1) {
            if k == 5 {
                continue;
            }
            let v: f64 = field.parse().unwrap();
            assert_eq!(&format!("{v:?}"), field);
        }
    }
    let s = summary(&dir.path().join("out/asm_r0.summary.json"));
    assert_eq!(s["chain"]["steps"], 1000);
    assert_eq!(s["trace_rows"], 1000);
    assert_eq!(s["slln"][0]["truth"], 1.0);
    assert_eq!(s["config_hash"].as_str().unwrap().len(), 16);
}

#[test]
fn runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "g.toml", GAUSS);
    assert!(asm(&["run", cfg.to_str().unwrap()]).status.success());
    let a = fs::read(dir.path().join("out/asm_r0.trace.csv")).unwrap();
    let sa = fs::read(dir.path().join("out/asm_r0.summary.json")).unwrap();
    assert!(asm(&["run", cfg.to_str().unwrap(), "--jobs", "3"]).status.success());
    assert_eq!(a, fs::read(dir.path().join("out/asm_r0.trace.csv")).unwrap());
    assert_eq!(sa, fs::read(dir.path().join("out/asm_r0.summary.json")).unwrap());
}

#[test]
fn replicas_have_distinct_seeds_and_stable_prefixes() {
    let dir = TempDir::new().unwrap();
    let two = write_config(dir.path(), "two.toml", &format!("replicas = 2\n{GAUSS}"));
    assert!(asm(&["run", two.to_str().unwrap()]).status.success());
    let first = fs::read(dir.path().join("out/asm_r1.trace.csv")).unwrap();

    let four = write_config(dir.path(), "four.toml", &format!("replicas = 4\n{GAUSS}"));
    let out = asm(&["run", four.to_str().unwrap(), "--jobs", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sums: Vec<Value> = (0..4).map(|k| summary(&dir.path().join(format!("out/asm_r{k}.summary.json")))).collect();
    let mut seeds: Vec<u64> = sums.iter().map(|s| s["seed"].as_u64().unwrap()).collect();
    seeds.sort();
    seeds.dedup();
    assert_eq!(seeds.len(), 4);
    assert!(sums.iter().all(|s| s["config_hash"] == sums[0]["config_hash"]));
    assert_eq!(first, fs::read(dir.path().join("out/asm_r1.trace.csv")).unwrap());
}

#[test]
fn thinning_and_seed_override() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("t.toml");
    fs::write(&cfg, format!("{GAUSS}\n[output]\ndir = {:?}\nthinning = 7\n", dir.path().join("out").to_str().unwrap())).unwrap();
    assert!(asm(&["run", cfg.to_str().unwrap()]).status.success());
    let (_, rows) = read_csv(&dir.path().join("out/asm_r0.trace.csv"));
    assert_eq!(rows.len(), 1000 / 7);
    let s = summary(&dir.path().join("out/asm_r0.summary.json"));
    assert_eq!(s["chain"]["steps"], 1000);

    assert!(asm(&["run", cfg.to_str().unwrap(), "--seed", "99"]).status.success());
    let t = summary(&dir.path().join("out/asm_r0.summary.json"));
    assert_ne!(s["seed"], t["seed"]);
    assert_ne!(s["config_hash"], t["config_hash"]);
}

#[test]
fn restricted_and_am_runs() {
    let dir = TempDir::new().unwrap();
    let r = write_config(
        dir.path(),
        "r.toml",
        &format!("{GAUSS}\n[restriction]\nkind = \"fixed\"\na1 = 0.5\na2 = 1.0\n"),
    );
    let out = asm(&["run", r.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = read_csv(&dir.path().join("out/asm_r0.trace.csv"));
    assert!(rows.iter().all(|row| {
        let s: f64 = row[2].parse().unwrap();
        (0.5..=1.0).contains(&s)
    }));

    let am = write_config(
        dir.path(),
        "am.toml",
        "[target]\nname = \"gaussian\"\ndim = 2\ncovariance = [1.0, 0.5, 0.5, 1.0]\n[adapt]\nalpha_star = 0.234\nn_steps = 2000\n\
         [am]\nlambda_min = 0.01\nlambda_max = 100.0\nharmonic_weights = true\n",
    );
    let out = asm(&["run", am.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&dir.path().join("out/asm_r0.summary.json"));
    assert_eq!(s["am"]["covariance"].as_array().unwrap().len(), 4);
    let (header, rows) = read_csv(&dir.path().join("out/asm_r0.trace.csv"));
    assert_eq!(header, ["n", "x1", "x2", "s", "theta", "alpha", "accepted", "eta"]);
    assert_eq!(rows.len(), 2000);
}

#[test]
fn usage_and_config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad = write_config(dir.path(), "bad.toml", &GAUSS.replace("dim = 1", "dim = 1\nwidth = 3"));
    let out = asm(&["run", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("width") && err.contains("line"), "{err}");

    assert_eq!(asm(&["run", "/nonexistent/config.toml"]).status.code(), Some(2));
    assert_eq!(asm(&["verify", "nonsense"]).status.code(), Some(2));
    assert_eq!(asm(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn verify_single_proposition() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("r.jsonl");
    let out = asm(&["verify", "proposition:lower_bound", "--report", report.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines: Vec<Value> =
        fs::read_to_string(&report).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(!lines.is_empty());
    assert!(lines.iter().all(|l| l["check"] == "lower_bound" && l["pass"] == true));
}

#[test]
fn verify_skips_quadrature_in_three_dimensions() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "g3.toml",
        "[target]\nname = \"gaussian\"\ndim = 3\n[adapt]\nalpha_star = 0.234\nn_steps = 20000\n",
    );
    let out = asm(&["verify", "proposition:oracle_coherence", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let line: Value = serde_json::from_slice(out.stdout.split(|b| *b == b'\n').next().unwrap()).unwrap();
    assert_eq!(line["skipped"], true);
    assert!(line["notice"].as_str().unwrap().contains("d <= 2"));

    let out = asm(&["verify", "proposition:envelope", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let line: Value = serde_json::from_slice(out.stdout.split(|b| *b == b'\n').next().unwrap()).unwrap();
    assert_eq!(line["skipped"], false);
}

#[test]
fn sweep_cross_product() {
    let dir = TempDir::new().unwrap();
    let body = GAUSS.replace("n_steps = 1000", "n_steps = 2000")
        + "\n[sweep]\nalpha_star = [0.1, 0.234, 0.44]\ngamma = [0.6, 1.0]\n";
    let cfg = write_config(dir.path(), "s.toml", &body);
    let out = asm(&["sweep", cfg.to_str().unwrap(), "--jobs", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("out/asm_sweep.csv"));
    assert_eq!(rows.len(), 6);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let cells: Vec<(String, String)> = rows.iter().map(|r| (r[col("alpha_star")].clone(), r[col("gamma")].clone())).collect();
    assert_eq!(cells[0], ("0.1".to_string(), "0.6".to_string()));
    assert_eq!(cells[5], ("0.44".to_string(), "1.0".to_string()));
    assert!(rows.iter().all(|r| r[col("status")] == "ok"));
    assert!(header.contains(&"mean[x1^2]".to_string()));
}

#[test]
fn sweep_over_target_parameters_with_replicas() {
    let dir = TempDir::new().unwrap();
    let body = "replicas = 8\n[target]\nname = \"uniform_ball\"\ndim = 1\n[adapt]\nalpha_star = 0.234\nn_steps = 20000\n\
                [sweep]\ntarget = { dim = [1, 2] }\n";
    let cfg = write_config(dir.path(), "s.toml", body);
    let out = asm(&["sweep", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = read_csv(&dir.path().join("out/asm_sweep.csv"));
    assert_eq!(rows.len(), 16);
    let stab = fs::read_to_string(dir.path().join("out/asm_sweep_stability.jsonl")).unwrap();
    assert_eq!(stab.lines().count(), 2);
}

#[test]
fn empty_sweep_is_a_no_op() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "e.toml", &format!("{GAUSS}\n[sweep]\nalpha_star = []\n"));
    let out = asm(&["sweep", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!dir.path().join("out/asm_sweep.csv").exists());
}

#[test]
fn failing_cells_are_recorded() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "f.toml", &format!("{GAUSS}\n[sweep]\ngamma = [0.7, 1.5]\n"));
    let out = asm(&["sweep", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let (header, rows) = read_csv(&dir.path().join("out/asm_sweep.csv"));
    let status = header.iter().position(|h| h == "status").unwrap();
    assert_eq!(rows[0][status], "ok");
    assert_eq!(rows[1][status], "error");
    assert!(rows[1][status + 1].contains("gamma"));
}
