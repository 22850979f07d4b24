//! Black-box tests of the `simkit` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn simkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simkit"))
        .args(args)
        .env_remove("SIMKIT_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

const QUICK: [&str; 4] = ["--set", "n_iterations=3", "--set", "scenario.n_buildings=20"];

#[test]
fn run_is_reproducible_and_writes_every_file() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let mut args = vec!["run", "--preset", "paper", "--set", "scenario.seed=7", "--out", dir.to_str().unwrap()];
        args.extend(QUICK);
        let o = simkit(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["results.json", "summary.csv", "boxplot.csv", "cellbars.csv", "manifest.json"] {
        assert_eq!(read(&a, name), read(&b, name), "{name} differs");
    }
    let boxplot = String::from_utf8(read(&a, "boxplot.csv")).unwrap();
    assert_eq!(boxplot.lines().next(), Some("method,band,p5,median,p95,mean"));
    assert_eq!(boxplot.lines().count(), 10);
    let manifest: serde_json::Value = serde_json::from_slice(&read(&a, "manifest.json")).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["schema_version"], 1);
    let results: serde_json::Value = serde_json::from_slice(&read(&a, "results.json")).unwrap();
    assert_eq!(results["config_hash"], manifest["config_hash"]);
    assert_eq!(results["config"]["n_iterations"], 3);
}

#[test]
fn cellbars_stack_to_cell_capacity() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "--preset", "paper", "--out", tmp.path().to_str().unwrap()];
    args.extend(QUICK);
    assert!(simkit(&args).status.success());
    let (bars_raw, summary_raw) = (read(tmp.path(), "cellbars.csv"), read(tmp.path(), "summary.csv"));
    let mut bars = csv::Reader::from_reader(&bars_raw[..]);
    let mut summary = csv::Reader::from_reader(&summary_raw[..]);
    let totals: Vec<(String, String, f64)> = summary
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_string(), r[1].to_string(), r[6].parse().unwrap())
        })
        .collect();
    let rows: Vec<csv::StringRecord> = bars.records().map(Result::unwrap).collect();
    for (method, band, cell) in totals {
        let top = rows
            .iter()
            .filter(|r| r[0] == method && r[1] == band)
            .map(|r| r[4].parse::<f64>().unwrap())
            .fold(0.0, f64::max);
        assert!((top - cell).abs() <= 1e-6 * cell.max(1.0), "{method} {band}");
    }
}

#[test]
fn missing_configuration_exits_2() {
    let o = simkit(&["run"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("config"));
    let o = simkit(&["run", "--config", "/nonexistent/simkit.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn strict_config_rejects_typos_by_name() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(&path, "[scenario]\nn_bildings = 5\n").unwrap();
    let o = simkit(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("scenario.n_bildings"));
}

#[test]
fn oscillating_repeater_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec![
        "run",
        "--preset",
        "paper",
        "--set",
        "bands.0.methods.l1_repeater.isolation=5",
        "--out",
        tmp.path().to_str().unwrap(),
    ];
    args.extend(QUICK);
    assert_eq!(simkit(&args).status.code(), Some(3));
}

#[test]
fn export_scenario_has_300_rows_and_repeats() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a.csv"), tmp.path().join("b.csv"));
    for p in [&a, &b] {
        let o = simkit(&["export-scenario", "--preset", "paper", "--path", p.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 301);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(tmp.path().join("a.manifest.json").exists());
}

#[test]
fn export_scenario_rejects_zero_buildings() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("s.csv");
    let o = simkit(&["export-scenario", "--preset", "paper", "--set", "scenario.n_buildings=0", "--path", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn range_reports_finite_unbounded_and_threshold_monotone() {
    let mmwave = simkit(&["range", "--preset", "rural", "--band", "26GHz-400MHz"]);
    assert!(mmwave.status.success());
    let text = stdout(&mmwave);
    let metres: f64 = text.trim().strip_suffix(" m").expect("distance in meters").parse().unwrap();
    assert!(metres > 100.0 && metres < 1000.0, "{text}");

    let sub6 = simkit(&["range", "--preset", "rural", "--band", "3.6GHz-100MHz", "--ceiling", "600"]);
    assert_eq!(stdout(&sub6).trim(), "unbounded within 600 m");

    let strict = simkit(&["range", "--preset", "rural", "--band", "26GHz-400MHz", "--threshold-db=-2", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&strict.stdout).unwrap();
    assert!(v["outcome"]["distance_m"].as_f64().unwrap() < metres);

    let unreachable = simkit(&["range", "--preset", "rural", "--threshold-db", "60"]);
    assert_eq!(stdout(&unreachable).trim(), "unreachable");

    let bad = simkit(&["range", "--preset", "rural", "--band", "5GHz"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn sweep_writes_one_result_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec![
        "sweep",
        "--preset",
        "paper",
        "--param",
        "bands.0.methods.l1_repeater.delay",
        "--values",
        "1e-6,3e-6",
        "--out",
        tmp.path().to_str().unwrap(),
    ];
    args.extend(QUICK);
    let o = simkit(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("results_0.json").exists());
    assert!(tmp.path().join("results_1.json").exists());
    let text = String::from_utf8(read(tmp.path(), "sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 9);

    let bad = simkit(&["sweep", "--preset", "paper", "--param", "scenario.nope", "--values", "1"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn overrides_are_echoed_in_results() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec![
        "run",
        "--preset",
        "paper",
        "--set",
        "scenario.d_max=900",
        "--set",
        "scenario.d_max=950",
        "--seed",
        "21",
        "--format",
        "json",
        "--out",
        tmp.path().to_str().unwrap(),
    ];
    args.extend(QUICK);
    let o = simkit(&args);
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["seed"], 21);
    let results: serde_json::Value = serde_json::from_slice(&read(tmp.path(), "results.json")).unwrap();
    assert_eq!(results["config"]["scenario"]["d_max"], 950.0);
}
