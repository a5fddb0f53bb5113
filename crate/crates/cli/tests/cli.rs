use std::process::Command;

use lifespan_lab::{PredictResult, Record, RunConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lifespan-lab"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().expect("spawn");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn predict_singular_log_large_kappa() {
    let (code, out, _) = run(&[
        "predict", "--N", "1", "--p", "2", "--profile", "singular-log:A=1,B=3", "--regime", "large-kappa",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out.trim(), "loglife-large:r=1");
}

#[test]
fn predict_global_for_small_kappa() {
    let (code, out, _) = run(&[
        "predict", "--N", "1", "--p", "3", "--profile", "power-decay:A=1", "--regime", "small-kappa",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out.trim(), "global:small-kappa");
}

#[test]
fn critical_exponent_shorthand() {
    let (code, out, _) = run(&[
        "predict", "--N", "2", "--p", "1+1/N", "--profile", "constant:c=1", "--regime", "large-kappa",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out.trim(), "power:e=-1");
}

#[test]
fn invalid_kappa_exits_one() {
    let (code, _, err) = run(&["solve", "--N", "1", "--p", "2", "--kappa", "0", "--profile", "constant:c=1"]);
    assert_eq!(code, 1);
    assert!(err.contains("kappa"), "{err}");
}

#[test]
fn inapplicable_pair_exits_two() {
    let (code, _, err) = run(&[
        "predict", "--N", "1", "--p", "2", "--profile", "power-decay:A=1", "--regime", "large-kappa",
    ]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn predict_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("predict.json");
    let (code, _, err) = run(&[
        "predict", "--N", "1", "--p", "3/2", "--profile", "singular-log:A=1/2,B=0", "--regime", "large-kappa",
        "--output", path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(&path).unwrap();
    let rec: Record<PredictResult> = serde_json::from_str(&text).unwrap();
    assert_eq!(rec.schema, 1);
    assert_eq!(rec.config.command, "predict");
    let again = serde_json::to_string_pretty(&rec).unwrap();
    assert_eq!(again.trim(), text.trim());
    assert!((rec.result.exponent.unwrap() + 4.0 / 3.0).abs() < 1e-12);
}

#[test]
fn solve_writes_trace_and_record() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("solve.json");
    let (code, _, err) = run(&[
        "solve", "--N", "1", "--p", "2", "--kappa", "1", "--profile", "constant:c=1",
        "--output", path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let rec: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let config: RunConfig = serde_json::from_value(rec["config"].clone()).unwrap();
    assert_eq!(config.kappa, Some(1.0));
    let t = rec["result"]["estimate"]["t_est"].as_f64().unwrap();
    assert!(t > 0.0 && t.is_finite());
    let csv = std::fs::read_to_string(path.with_extension("csv")).unwrap();
    assert!(csv.starts_with("# lifespan-lab"));
    assert!(csv.lines().any(|l| l == "t,w"));
}

#[test]
fn sweep_upper_bound_matches() {
    let (code, out, err) = run(&[
        "sweep", "--N", "1", "--p", "3/2", "--profile", "singular-log:A=1/2,B=0", "--regime", "large-kappa",
        "--method", "upper_bound", "--kappas", "10,100,1000,10000", "--jobs", "1",
    ]);
    assert_eq!(code, 0, "{err}");
    let rec: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(rec["result"]["verdict"], "match", "{out}");
}

#[test]
fn help_exits_zero() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("sweep"));
}
