use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const IDENTITY_QUBIT: &str = r#"{"d_in": 2, "d_out": 2, "kraus": [[[[1, 0], [0, 0]], [[0, 0], [1, 0]]]]}"#;

// amplitude damping with γ = 1/2
const DAMPING: &str = r#"{"d_in": 2, "d_out": 2, "kraus": [
  [[[1, 0], [0, 0]], [[0, 0], [0.7071067811865476, 0]]],
  [[[0, 0], [0.7071067811865476, 0]], [[0, 0], [0, 0]]]
]}"#;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_unitalcap"));
    for (key, _) in std::env::vars() {
        if key.starts_with("UNITALCAP_") {
            cmd.env_remove(key);
        }
    }
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn analyze_identity_qubit() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "id.json", IDENTITY_QUBIT);
    let out = run(&["--restarts", "4", "--seed", "9", "analyze", &file]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert!((r["lambda2"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert!((r["capacity"]["upper_bits"].as_f64().unwrap() - 3f64.log2()).abs() < 1e-9);
    assert_eq!(r["unital"], Value::Bool(true));
    assert_eq!(r["seed"], 9);
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert!(r.get("tensor_norm2").is_none());
}

#[test]
fn tensor_flag_adds_fields() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "id.json", IDENTITY_QUBIT);
    let r = json(&run(&["--restarts", "4", "analyze", &file, "--n", "2"]));
    assert_eq!(r["tensor_norm2"]["n"], 2);
    assert!(r["tensor_norm2"]["estimate"].as_f64().is_some());
    assert!(r["tensor_norm2"]["q_upper_2norm"].is_object());
}

#[test]
fn floats_are_printed_with_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "id.json", IDENTITY_QUBIT);
    let out = run(&["--restarts", "2", "analyze", &file]);
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.contains("\"upper_bits\"")).unwrap();
    let digits: String = line.split(':').nth(1).unwrap().trim().trim_end_matches(',').to_string();
    let mantissa = digits.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{digits}");
}

#[test]
fn non_unital_channels_report_without_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "amp.json", DAMPING);
    let out = run(&["--restarts", "4", "analyze", &file]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["unital"], Value::Bool(false));
    assert!(r["capacity"].is_null());
    assert_eq!(r["block_residuals"]["flagged"], Value::Bool(true));
}

#[test]
fn malformed_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "bad.json", "{\"d_in\": 2,\n");
    let out = run(&["analyze", &file]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line"), "{err}");

    let not_tp = write(
        dir.path(),
        "ntp.json",
        r#"{"d_in": 1, "d_out": 1, "kraus": [[[[2, 0]]]]}"#,
    );
    assert_eq!(run(&["analyze", &not_tp]).status.code(), Some(2));
    assert_eq!(run(&["analyze", "/nonexistent/channel.json"]).status.code(), Some(2));
}

#[test]
fn config_is_validated() {
    assert_eq!(run(&["--guard", "3", "verify", "blocks"]).status.code(), Some(2));
    assert_eq!(run(&["--tol", "0", "verify", "blocks"]).status.code(), Some(2));
    assert_eq!(run(&["--restarts", "0", "verify", "blocks"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "id.json", IDENTITY_QUBIT);
    assert_eq!(
        run(&["--guard", "4", "--restarts", "2", "analyze", &file])
            .status
            .code(),
        Some(0)
    );
}

#[test]
fn survey_writes_header_and_rows_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = run(&[
            "--seed",
            "5",
            "--restarts",
            "2",
            "expander-survey",
            "--d",
            "6",
            "--k",
            "4",
            "--trials",
            "3",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        let summary = json(&out);
        assert_eq!(summary["seed"], 5);
        assert!(String::from_utf8(out.stderr).unwrap().contains("seed=5"));
    }
    let text = fs::read(&a).unwrap();
    assert_eq!(text, fs::read(&b).unwrap());
    let text = String::from_utf8(text).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "seed,d,k,lambda2_sq,c_hat,q_upper_bits,q_lower_bits,norm2_est,norm2_cert_upper,alpha_hat"
    );
    assert_eq!(lines.count(), 3);
}

#[test]
fn single_trial_survey_to_stdout() {
    let out = run(&[
        "--restarts",
        "2",
        "expander-survey",
        "--d",
        "4",
        "--k",
        "2",
        "--trials",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 2);
}

#[test]
fn survey_is_independent_of_thread_count() {
    let one = run(&[
        "--threads",
        "1",
        "--restarts",
        "2",
        "expander-survey",
        "--d",
        "5",
        "--k",
        "4",
        "--trials",
        "3",
        "--n",
        "2",
    ]);
    let two = run(&[
        "--threads",
        "2",
        "--restarts",
        "2",
        "expander-survey",
        "--d",
        "5",
        "--k",
        "4",
        "--trials",
        "3",
        "--n",
        "2",
    ]);
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, two.stdout);
}

#[test]
fn survey_parameter_errors_exit_two() {
    assert_eq!(
        run(&["expander-survey", "--d", "4", "--k", "3", "--trials", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["expander-survey", "--d", "4", "--k", "2", "--trials", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["expander-survey", "--d", "4"]).status.code(), Some(2));
}

#[test]
fn env_overrides_flags() {
    let out = bin()
        .env("UNITALCAP_SEED", "77")
        .args(["--restarts", "2", "verify", "blocks", "--trials", "3"])
        .output()
        .unwrap();
    assert_eq!(json(&out)["seed"], 77);
}

#[test]
fn verify_suites() {
    let out = run(&["verify", "bk", "--trials", "500"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["pass"], Value::Bool(true));
    assert_eq!(r["trials"], 500);

    let out = run(&["--restarts", "8", "verify", "lemma5", "--trials", "50"]);
    assert_eq!(out.status.code(), Some(0));

    for suite in ["lemma3", "blocks", "pure-dominance"] {
        let out = run(&["--restarts", "4", "verify", suite, "--trials", "5"]);
        assert_eq!(out.status.code(), Some(0), "{suite}");
    }
}

#[test]
fn unknown_suite_exits_two() {
    let out = run(&["verify", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}
