use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

fn haberman() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/haberman.csv")
}

fn sugeno(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sugeno"))
        .args(args)
        .env_remove("SUGENO_SEED")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = sugeno(args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok(args)).expect("valid JSON on stdout")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Pinned single-point grids keep these tests fast.
fn fit_pinned(dir: &TempDir, extra: &[&str]) -> PathBuf {
    let model = dir.path().join("model.json");
    let data = haberman();
    let mut args = vec![
        "fit", "--data", s(&data), "--label", "survival", "--positive", "2",
        "--k", "2", "--rho", "0.05", "--direction-mode", "detect", "--out", s(&model),
    ];
    args.extend_from_slice(extra);
    ok(&args);
    model
}

#[test]
fn fit_writes_model_and_prints_summary() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("m.json");
    let out = ok(&[
        "fit", "--data", s(&haberman()), "--label", "survival", "--positive", "1",
        "--seed", "7", "--k", "1,2", "--rho", "0,0.05", "--folds", "3", "--out", s(&model),
    ]);
    assert!(out.contains("k = ") && out.contains("beta = ") && out.contains("training loss"));
    assert!(out.contains("cross-validation:"));
    let v: Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(v["seed"], 7);
    assert_eq!(v["feature_names"], serde_json::json!(["age", "year", "nodes"]));
    assert_eq!(v["cv"].as_array().unwrap().len(), 4);
}

#[test]
fn pinned_grid_skips_cross_validation() {
    let dir = TempDir::new().unwrap();
    let model = fit_pinned(&dir, &[]);
    let v: Value = serde_json::from_str(&fs::read_to_string(model).unwrap()).unwrap();
    assert_eq!(v["k"], 2);
    assert_eq!(v["rho"], 0.05);
    assert!(v["cv"].as_array().unwrap().is_empty());
}

#[test]
fn export_lp_writes_program_text() {
    let dir = TempDir::new().unwrap();
    let lp = dir.path().join("capacity.lp");
    fit_pinned(&dir, &["--export-lp", s(&lp)]);
    let text = fs::read_to_string(lp).unwrap();
    assert!(text.contains("Minimize"), "{text}");
    assert!(text.contains("c_1_2"));
    assert!(text.trim_end().ends_with("End"));
}

#[test]
fn predict_reproduces_training_loss() {
    let dir = TempDir::new().unwrap();
    let model = fit_pinned(&dir, &[]);
    let meta: Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    let v = json(&[
        "--json", "predict", "--model", s(&model), "--data", s(&haberman()),
        "--label", "survival", "--positive", "2",
    ]);
    assert_eq!(v["predictions"].as_array().unwrap().len(), 306);
    let loss = v["loss"].as_f64().unwrap();
    assert!((loss - meta["training_loss"].as_f64().unwrap()).abs() < 1e-12);

    let csv = ok(&["predict", "--model", s(&model), "--data", s(&haberman()), "--label", "survival"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("row,score,prediction"));
    assert_eq!(lines.count(), 306);
}

#[test]
fn predict_clamps_out_of_range_values() {
    let dir = TempDir::new().unwrap();
    let model = fit_pinned(&dir, &[]);
    let data = dir.path().join("far.csv");
    fs::write(&data, "age,year,nodes\n-1000,5000,99999\n").unwrap();
    let v = json(&["--json", "predict", "--model", s(&model), "--data", s(&data)]);
    let score = v["predictions"][0]["score"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&score));
}

#[test]
fn column_mismatch_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let model = fit_pinned(&dir, &[]);
    let data = dir.path().join("other.csv");
    fs::write(&data, "age,weight,nodes\n30,60,1\n").unwrap();
    let o = sugeno(&["predict", "--model", s(&model), "--data", s(&data)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_data_file_is_a_data_error() {
    let o = sugeno(&["fit", "--data", "/nonexistent/file.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(sugeno(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(sugeno(&["fit"]).status.code(), Some(1));
    assert_eq!(sugeno(&[]).status.code(), Some(1));
    let o = sugeno(&["fit", "--data", s(&haberman()), "--rho", "0.7"]);
    assert_eq!(o.status.code(), Some(1));
    let o = sugeno(&["stability", "--builtin", "cardinality", "--eps", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn rules_recover_planted_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let p = sugeno::random::planted_rules(&mut rng, 5, 500, 3, 2, 0.5).unwrap();
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("planted.csv");
    let mut text = String::from("x1,x2,x3,x4,x5,y\n");
    for (row, y) in p.rows.iter().zip(&p.labels) {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        text.push_str(&format!("{},{}\n", cells.join(","), u8::from(*y)));
    }
    fs::write(&data, text).unwrap();
    let model = dir.path().join("planted.json");
    ok(&[
        "fit", "--data", s(&data), "--threshold", "reoptimize",
        "--out", s(&model),
    ]);
    let v = json(&["--json", "rules", "--model", s(&model)]);
    let mut found: Vec<Vec<u64>> = v["rules"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["indices"].as_array().unwrap().iter().map(|i| i.as_u64().unwrap()).collect())
        .collect();
    found.sort();
    let mut planted: Vec<Vec<u64>> = p.rules.iter().map(|r| r.indices().map(|i| i as u64).collect()).collect();
    planted.sort();
    assert_eq!(found, planted, "{}", fs::read_to_string(&model).unwrap());

    let text = ok(&["rules", "--model", s(&model), "--raw"]);
    assert_eq!(text.matches("THEN positive").count(), 3, "{text}");
}

#[test]
fn constant_negative_model_warns() {
    let dir = TempDir::new().unwrap();
    let model = fit_pinned(&dir, &[]);
    let o = sugeno(&["rules", "--model", s(&model)]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("classifier is constant negative"));
    assert!(stdout(&o).contains("no rules"));
}

#[test]
fn benchmark_smoke_run() {
    let out = ok(&[
        "benchmark", "--data", s(&haberman()), "--label", "survival", "--positive", "2",
        "--splits", "2", "--fraction", "0.5", "--k", "1", "--rho", "0", "--compare-full",
    ]);
    assert!(!out.is_empty());
    let v = json(&[
        "--json", "benchmark", "--data", s(&haberman()), "--label", "survival", "--positive", "2",
        "--splits", "2", "--fraction", "0.2,0.5", "--k", "1", "--rho", "0", "--jobs", "2",
    ]);
    let reports = v.as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0]["train_fraction"], 0.2);
    assert_eq!(reports[1]["loss"]["count"], 2);
}

#[test]
fn benchmark_is_deterministic_across_jobs() {
    let run = |jobs: &str| {
        json(&[
            "--json", "--seed", "3", "benchmark", "--data", s(&haberman()), "--label", "survival",
            "--splits", "3", "--k", "1", "--rho", "0", "--jobs", jobs,
        ])
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn shatter_reports() {
    let out = ok(&["shatter", "--m", "4"]);
    assert!(out.contains("6 instances") && out.contains("64 of 64"), "{out}");
    let v = json(&["--json", "shatter", "--m", "2"]);
    assert_eq!((v["instances"].as_u64(), v["realized"].as_u64()), (Some(2), Some(4)));
    let v = json(&["--json", "shatter", "--m", "6", "--samples", "200"]);
    assert_eq!(v["instances"], 20);
    assert_eq!(v["realized"], 200);
    assert_eq!(v["exhaustive"], false);
}

#[test]
fn stability_reports() {
    let v = json(&["--json", "stability", "--builtin", "max-measure", "--m", "3", "--eps", "0"]);
    assert_eq!(v["k_star"], 1);
    assert_eq!(v["max_gap"], 0.0);
    let v = json(&["--json", "stability", "--builtin", "cardinality", "--m", "3", "--eps", "0.34"]);
    assert_eq!(v["k_star"], 2);
    assert!(v["max_gap"].as_f64().unwrap() <= 0.34);
    assert_eq!(v["holds"], true);
    let v = json(&["--json", "--seed", "5", "stability", "--builtin", "random", "--m", "4"]);
    assert_eq!(v["k_star"], 4);
    assert_eq!(v["max_gap"], 0.0);
    let text = ok(&["stability", "--builtin", "min-measure", "--m", "3"]);
    assert!(text.contains("within bound"), "{text}");
}

#[test]
fn stability_accepts_model_and_capacity_files() {
    let dir = TempDir::new().unwrap();
    let model = fit_pinned(&dir, &[]);
    let v = json(&["--json", "stability", "--model", s(&model), "--eps", "0.1"]);
    assert_eq!(v["holds"], true);
    let cap = dir.path().join("cap.json");
    fs::write(&cap, serde_json::to_string(&sugeno::Capacity::cardinality(3).unwrap()).unwrap()).unwrap();
    let v = json(&["--json", "stability", "--capacity", s(&cap), "--eps", "0.34"]);
    assert_eq!(v["k_star"], 2);
}

#[test]
fn runs_are_deterministic_under_seed() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        ok(&[
            "--seed", "11", "fit", "--data", s(&haberman()), "--label", "survival", "--k", "1,2",
            "--rho", "0.05", "--folds", "3", "--out", s(out),
        ]);
    }
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}
