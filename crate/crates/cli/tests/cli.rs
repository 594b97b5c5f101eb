use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn flexts(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flexts"))
        .args(args)
        .current_dir(dir)
        .env_remove("FLEXTS_SEED")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = flexts(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str], code: i32) -> String {
    let out = flexts(dir, args);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "stderr should be one line: {err:?}");
    assert!(err.starts_with("flexts: error["), "{err:?}");
    err
}

fn simulated(scenario: &str, n: usize) -> TempDir {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["simulate", "--scenario", scenario, "--n", &n.to_string(), "--seed", "5", "-o", "data.csv"]);
    dir
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().unwrap().iter().map(str::to_string).collect();
    let mut out = vec![header];
    out.extend(r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()));
    out
}

#[test]
fn simulate_is_seeded_and_honours_the_environment() {
    let dir = TempDir::new().unwrap();
    let a = ok(dir.path(), &["simulate", "--scenario", "arma_jump", "--n", "150", "--seed", "3", "--jumps"]);
    let b = ok(dir.path(), &["simulate", "--scenario", "arma_jump", "--n", "150", "--seed", "3", "--jumps"]);
    assert_eq!(a, b);
    assert!(a.starts_with("y,z_jump\n"));
    assert_eq!(a.lines().count(), 151);

    let env = Command::new(env!("CARGO_BIN_EXE_flexts"))
        .args(["simulate", "--scenario", "arma_jump", "--n", "150", "--jumps"])
        .env("FLEXTS_SEED", "3")
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(env.stdout).unwrap(), a);
}

#[test]
fn compared_methods_share_test_rows() {
    let dir = simulated("ar", 800);
    let d = dir.path();
    ok(d, &["fit", "--data", "data.csv", "--method", "flexcode", "-o", "f.json"]);
    ok(d, &["fit", "--data", "data.csv", "--method", "nnkcde", "-o", "n.json"]);
    ok(d, &["fit", "--data", "data.csv", "--method", "garch", "--lags", "1", "-o", "g.json"]);
    let out = ok(
        d,
        &[
            "evaluate", "--model", "f.json", "--model", "n.json", "--model", "g.json", "--data", "data.csv",
            "--oracle", "ar",
        ],
    );
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 4);
    assert_eq!(&rows[0][..6], ["method", "model", "n_test", "cde_loss", "se", "oracle_cde_loss"]);
    assert_eq!(rows[0].len(), 6 + 19);
    let methods: Vec<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(methods, ["flexcode", "nnkcde", "garch"]);
    assert!(rows[1..].iter().all(|r| r[2] == rows[1][2]));
    for r in &rows[1..] {
        let oracle: f64 = r[5].parse().unwrap();
        assert!(oracle >= 0.0 && oracle.is_finite());
    }
}

#[test]
fn fit_report_names_the_selection() {
    let dir = simulated("nonlinear_mean", 600);
    let out = ok(dir.path(), &["fit", "--data", "data.csv", "--backend", "knn", "--max-terms", "12", "-o", "m.json"]);
    assert!(out.contains("method: flexcode"));
    assert!(out.contains("backend: knn(k="), "{out}");
    let curve = out.lines().skip_while(|l| *l != "validation_curve:").skip(1).count();
    assert_eq!(curve, 13);
}

#[test]
fn predictions_are_monotone_and_reload_identically() {
    let dir = simulated("nonlinear_variance", 600);
    let d = dir.path();
    ok(d, &["fit", "--data", "data.csv", "-o", "m.json"]);
    let a = ok(d, &["predict", "--model", "m.json", "--data", "data.csv", "--density-out", "dens.csv"]);
    let b = ok(d, &["predict", "--model", "m.json", "--data", "data.csv"]);
    assert_eq!(a, b);
    let rows = csv_rows(&a);
    assert_eq!(rows[0], ["index", "y", "q_0.05", "q_0.25", "q_0.5", "q_0.75", "q_0.95"]);
    for r in &rows[1..] {
        let q: Vec<f64> = r[2..].iter().map(|v| v.parse().unwrap()).collect();
        assert!(q.windows(2).all(|w| w[0] <= w[1]), "{q:?}");
    }
    let dens = std::fs::read_to_string(d.join("dens.csv")).unwrap();
    assert!(dens.starts_with("index,y,density\n"));
    assert_eq!(dens.lines().count() - 1, (rows.len() - 1) * 1001);
}

#[test]
fn importance_ranks_features_and_rejects_garch() {
    let dir = simulated("ar", 1200);
    let d = dir.path();
    ok(d, &["fit", "--data", "data.csv", "--lags", "5", "--backend", "lasso", "-o", "m.json"]);
    let rows = csv_rows(&ok(d, &["importance", "--model", "m.json", "--data", "data.csv"]));
    assert_eq!(rows[0], ["feature", "score"]);
    assert_eq!(rows.len(), 6);
    let scores: Vec<f64> = rows[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));

    ok(d, &["fit", "--data", "data.csv", "--method", "garch", "-o", "g.json"]);
    let err = fails(d, &["importance", "--model", "g.json", "--data", "data.csv"], 2);
    assert!(err.contains("garch"));
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = simulated("ar", 600);
    let d = dir.path();
    std::fs::write(d.join("cfg.json"), r#"{"lags": 6, "max_terms": 8, "basis": "fourier"}"#).unwrap();
    let out = ok(d, &["fit", "--config", "cfg.json", "--data", "data.csv", "--max-terms", "5", "-o", "m.json"]);
    let curve = out.lines().skip_while(|l| *l != "validation_curve:").skip(1).count();
    assert_eq!(curve, 6);
    let model = std::fs::read_to_string(d.join("m.json")).unwrap();
    assert!(model.contains("\"fourier\""));
    let imp = csv_rows(&ok(d, &["importance", "--model", "m.json", "--data", "data.csv"]));
    assert_eq!(imp.len(), 7);
}

#[test]
fn usage_errors_exit_two() {
    let dir = simulated("ar", 300);
    let d = dir.path();
    fails(d, &["fit", "--data", "data.csv", "--no-such-flag", "-o", "m.json"], 2);
    fails(d, &["simulate", "--scenario", "nope"], 2);
    fails(d, &["fit", "--data", "data.csv", "--selection", "bogus", "-o", "m.json"], 2);
    ok(d, &["fit", "--data", "data.csv", "-o", "m.json"]);
    let err = fails(d, &["evaluate", "--model", "m.json", "--data", "data.csv", "--quantiles", "0,0.5"], 2);
    assert!(err.contains("quantile"));
    assert!(flexts(d, &["--help"]).status.success());
}

#[test]
fn data_errors_exit_three() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let mut text = String::from("y\n");
    for i in 0..100 {
        text.push_str(&format!("{}\n", (i as f64 * 0.37).sin()));
    }
    text.push_str("oops\n");
    std::fs::write(d.join("bad.csv"), &text).unwrap();
    let err = fails(d, &["fit", "--data", "bad.csv", "-o", "m.json"], 3);
    assert!(err.contains("line 102"), "{err}");
    fails(d, &["fit", "--data", "missing.csv", "-o", "m.json"], 3);
    fails(d, &["fit", "--data", "bad.csv", "--target", "x", "-o", "m.json"], 3);
}

#[test]
fn model_files_carry_a_format_version() {
    let dir = simulated("ar", 400);
    let d = dir.path();
    ok(d, &["fit", "--data", "data.csv", "-o", "m.json"]);
    let text = std::fs::read_to_string(d.join("m.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["format_version"], 1);
    let bumped = text.replacen("\"format_version\": 1", "\"format_version\": 99", 1);
    std::fs::write(d.join("future.json"), bumped).unwrap();
    let err = fails(d, &["predict", "--model", "future.json", "--data", "data.csv"], 3);
    assert!(err.contains("format"), "{err}");
}

#[test]
fn bench_resume_matches_a_fresh_run() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let base = ["bench", "--scenarios", "ar", "--n", "400", "--methods", "flexcode,garch", "--max-terms", "10"];
    let with = |extra: &[&str]| -> Vec<String> { base.iter().chain(extra).map(|s| s.to_string()).collect() };
    let args = with(&["--seeds", "0-2", "-o", "full.csv"]);
    ok(d, &args.iter().map(String::as_str).collect::<Vec<_>>());
    let args = with(&["--seeds", "0", "-o", "part.csv"]);
    ok(d, &args.iter().map(String::as_str).collect::<Vec<_>>());
    let args = with(&["--seeds", "0-2", "--resume", "-o", "part.csv"]);
    ok(d, &args.iter().map(String::as_str).collect::<Vec<_>>());
    let full = std::fs::read_to_string(d.join("full.csv")).unwrap();
    assert_eq!(full, std::fs::read_to_string(d.join("part.csv")).unwrap());
    let rows = csv_rows(&full);
    assert_eq!(rows.len(), 7);
    assert!(rows[1..].iter().all(|r| r.last().unwrap() == "ok"));
}
