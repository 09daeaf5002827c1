use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;
use turnpike::training::TrainConfig;
use turnpike::{Activation, ClassAnchor, NetworkWeights};
use turnpike_cli::formats::{dataset_from_csv, ModelFile, MODEL_FORMAT_VERSION};

fn turnpike(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_turnpike"))
        .current_dir(dir)
        .env("TURNPIKE_THREADS", "1")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = turnpike(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn gen_writes_requested_rows() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["gen", "--samples", "300", "--noise", "0.2", "--seed", "7", "--out", "data.csv"]);
    assert_eq!(data_rows(&dir.path().join("data.csv")), 300);
    let text = fs::read_to_string(dir.path().join("data.csv")).unwrap();
    let data = dataset_from_csv(&text, Path::new("data.csv")).unwrap();
    assert_eq!(data.labels().iter().filter(|l| **l == 1).count(), 150);
}

#[test]
fn gen_to_stdout() {
    let dir = TempDir::new().unwrap();
    let out = ok(dir.path(), &["gen", "--samples", "4", "--noise", "0", "--seed", "1", "--out", "-"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("x1,x2,label,anchor1,anchor2\n"));
}

#[test]
fn gen_rejects_odd_sample_count() {
    let dir = TempDir::new().unwrap();
    let out = turnpike(dir.path(), &["gen", "--samples", "3", "--out", "d.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("samples must be even"));
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let dir = TempDir::new().unwrap();
    assert_eq!(turnpike(dir.path(), &["bogus"]).status.code(), Some(1));
    assert_eq!(turnpike(dir.path(), &["gen", "--samples", "x", "--out", "-"]).status.code(), Some(1));
    assert_eq!(turnpike(dir.path(), &["--help"]).status.code(), Some(0));
    let out = turnpike(dir.path(), &["repro", "--table", "3", "--out", "t.csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_file_is_a_runtime_error() {
    let dir = TempDir::new().unwrap();
    let out = turnpike(dir.path(), &["train", "--data", "nope.csv", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nope.csv"));
}

#[test]
fn train_analyze_grid_pipeline() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--samples", "20", "--noise", "0", "--seed", "1", "--out", "data.csv"]);
    let out = ok(d, &["train", "--data", "data.csv", "--depth", "10", "--seed", "1", "--max-iters", "5000", "--out", "model.json"]);
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.contains("terminal loss") && summary.contains("empirical risk"), "{summary}");

    let model = ModelFile::load(&d.join("model.json")).unwrap();
    assert_eq!((model.dim, model.depth, model.format_version), (2, 10, MODEL_FORMAT_VERSION));
    assert_eq!(model.config.gamma, 2000.0);

    ok(d, &["analyze", "--model", "model.json", "--data", "data.csv", "--epsilon", "1", "--out", "report.json"]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    for key in ["beta", "rho", "n2_beta_rho", "n2", "n_inf", "q_eps_count", "empirical_risk"] {
        assert!(report[key].is_number(), "missing {key}");
    }

    ok(d, &["grid", "--model", "model.json", "--min", "-2", "--max", "2", "--res", "200", "--out", "grid.csv"]);
    assert_eq!(data_rows(&d.join("grid.csv")), 40_000);
    ok(d, &["grid", "--model", "model.json", "--res", "2", "--svg", "g.svg", "--data", "data.csv", "--out", "g2.csv"]);
    let grid = fs::read_to_string(d.join("g2.csv")).unwrap();
    assert_eq!(grid.lines().count(), 5);
    assert!(grid.starts_with("x,y,label\n"));
    assert!(fs::read_to_string(d.join("g.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn parameter_errors() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--samples", "4", "--seed", "1", "--out", "data.csv"]);
    let out = turnpike(d, &["train", "--data", "data.csv", "--depth", "0", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("depth must be ≥ 1"));
    let out = turnpike(d, &["train", "--data", "data.csv", "--dim", "3", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("dimension mismatch"));

    ok(d, &["train", "--data", "data.csv", "--depth", "2", "--max-iters", "10", "--out", "m.json"]);
    let out = turnpike(d, &["analyze", "--model", "m.json", "--data", "data.csv", "--epsilon", "0", "--out", "r.json"]);
    assert_eq!(out.status.code(), Some(1));
    let out = turnpike(d, &["analyze", "--model", "m.json", "--data", "data.csv", "--epsilon", "-1", "--out", "r.json"]);
    assert_eq!(out.status.code(), Some(1));
    let out = turnpike(d, &["grid", "--model", "m.json", "--min", "2", "--max", "-2", "--out", "g.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("min < max required"));
    let out = turnpike(d, &["grid", "--model", "m.json", "--res", "1", "--out", "g.csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn corrupt_model_reports_line_and_field() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--samples", "4", "--seed", "1", "--out", "data.csv"]);
    ok(d, &["train", "--data", "data.csv", "--depth", "2", "--max-iters", "10", "--out", "m.json"]);
    let text = fs::read_to_string(d.join("m.json")).unwrap();
    fs::write(d.join("bad.json"), text.replacen("\"depth\": 2", "\"depth\": \"two\"", 1)).unwrap();
    let out = turnpike(d, &["analyze", "--model", "bad.json", "--data", "data.csv", "--out", "r.json"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("bad.json") && msg.contains("line 4"), "{msg}");

    fs::write(d.join("short.json"), text.replacen("\"depth\": 2", "\"depth\": 3", 1)).unwrap();
    let out = turnpike(d, &["analyze", "--model", "short.json", "--data", "data.csv", "--out", "r.json"]);
    assert!(stderr(&out).contains("field depth"), "{}", stderr(&out));
}

#[test]
fn model_json_round_trip_preserves_weights() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--samples", "10", "--seed", "3", "--out", "data.csv"]);
    ok(d, &["train", "--data", "data.csv", "--depth", "3", "--max-iters", "200", "--out", "m.json"]);
    let model = ModelFile::load(&d.join("m.json")).unwrap();
    let again = ModelFile::from_json(&String::from_utf8(model.to_json()).unwrap(), Path::new("x")).unwrap();
    assert_eq!(again, model);
    assert_eq!(again.weights().unwrap().to_flat(), model.weights().unwrap().to_flat());
}

#[test]
fn model_at_anchors_has_zero_bounds() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let csv = "x1,x2,label,anchor1,anchor2\n1,0,1,1,0\n-1,0,2,-1,0\n1,0,1,1,0\n-1,0,2,-1,0\n";
    fs::write(d.join("data.csv"), csv).unwrap();
    let weights = NetworkWeights::zeros(2, 4);
    let model = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        dim: 2,
        depth: 4,
        activation: Activation::Tanh,
        matrix_layout: "column-major".into(),
        layers: weights.layers().to_vec(),
        classes: vec![
            ClassAnchor { label: 1, anchor: vec![1.0, 0.0] },
            ClassAnchor { label: 2, anchor: vec![-1.0, 0.0] },
        ],
        config: TrainConfig::two_spiral(4, 4),
        objective: 0.0,
        terminal_loss: 0.0,
        iterations: 0,
        converged: true,
    };
    fs::write(d.join("m.json"), model.to_json()).unwrap();
    ok(d, &["analyze", "--model", "m.json", "--data", "data.csv", "--out", "r.json"]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    for key in ["beta", "rho", "n2_beta_rho", "n2", "n_inf", "terminal_loss", "empirical_risk"] {
        assert_eq!(report[key].as_f64(), Some(0.0), "{key}");
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    for tag in ["a", "b"] {
        let data = format!("data_{tag}.csv");
        let model = format!("model_{tag}.json");
        let grid = format!("grid_{tag}.csv");
        ok(d, &["gen", "--samples", "12", "--seed", "9", "--deterministic", "--out", &data]);
        ok(d, &["train", "--data", &data, "--depth", "4", "--seed", "9", "--max-iters", "500", "--deterministic", "--out", &model]);
        ok(d, &["grid", "--model", &model, "--res", "20", "--deterministic", "--out", &grid]);
    }
    for stem in ["data_{}.csv", "model_{}.json", "grid_{}.csv"] {
        let a = fs::read(d.join(stem.replace("{}", "a"))).unwrap();
        let b = fs::read(d.join(stem.replace("{}", "b"))).unwrap();
        assert_eq!(a, b, "{stem}");
    }
}

#[test]
fn repro_small_grid_writes_fixed_row_order() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["repro", "--table", "2", "--depths", "2,3", "--samples", "4,6", "--max-iters", "50", "--out", "t.csv"]);
    let text = fs::read_to_string(d.join("t.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("N,D,beta,rho,n2_beta_rho,n2,n_inf"));
    let keys: Vec<(String, String)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 7);
            (f[0].to_string(), f[1].to_string())
        })
        .collect();
    let expected: Vec<(String, String)> = [("2", "4"), ("2", "6"), ("3", "4"), ("3", "6")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    assert_eq!(keys, expected);
}
