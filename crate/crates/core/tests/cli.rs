//! End-to-end tests of the command-line surface: subcommands, file
//! formats, exit codes, and byte-determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn projconv(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_projconv"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path.to_string_lossy().into_owned()
}

const DIVERGING: &str = r#"{"matrices": [[[0, 1], [2, 0]]], "vector": [1, 1]}"#;
const CONVERGING: &str = r#"{"matrices": [[[1, 1], [0, 1]], [[1, 0], [1, 1]]], "vector": [1, 1]}"#;
const EXCLUDING: &str = r#"{"matrices": [[[1, 0], [0, 0]]], "vector": [0, 5]}"#;

#[test]
fn decide_diverging_and_converging() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_file(dir.path(), "div.json", DIVERGING);
    let out = projconv(&["decide", &f], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["converges_all"], false);
    assert_eq!(v["satisfied"].as_array().unwrap().len(), 0);

    let f = write_file(dir.path(), "conv.json", CONVERGING);
    let out = projconv(&["decide", &f], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(v["converges_all"], true);
    assert_eq!(v["satisfied"], serde_json::json!(["i", "ii", "iii"]));
}

#[test]
fn decide_identity_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_file(
        dir.path(),
        "id.json",
        r#"{"matrices": [[[1, 0], [0, 1]]], "vector": [1, 1]}"#,
    );
    let out = projconv(&["decide", &f], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(v["satisfied"], serde_json::json!(["i", "ii", "iii"]));
}

#[test]
fn parse_error_exits_2_and_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_file(
        dir.path(),
        "bad.json",
        r#"{"matrices": [[[1, "3/0"], [0, 1]]], "vector": [1, 1]}"#,
    );
    let out = projconv(&["decide", &f], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("$.matrices[0][0][1]"), "stderr: {err}");
}

#[test]
fn simulate_writes_csv_contract() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_file(dir.path(), "conv.json", CONVERGING);
    let out = projconv(
        &[
            "simulate",
            &f,
            "--omega",
            "01",
            "--steps",
            "2",
            "--out",
            "trace.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,symbol,ratio_num,ratio_den,ratio_float,u,v,w,interval_width,alpha,beta,gamma,in_L,in_U,det_sign"
    );
    assert_eq!(
        lines.next().unwrap(),
        "1,0,1,2,0.5,0/1,1/1,1/1,1/1,,,,0,1,plus"
    );
    assert_eq!(
        lines.next().unwrap(),
        "2,1,2,3,0.6666666666666666,1/2,1/1,1/2,1/2,1/2,1/1,1/1,1,0,plus"
    );
    assert!(lines.next().is_none());
}

#[test]
fn simulate_cycle_and_random_and_float() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_file(dir.path(), "conv.json", CONVERGING);
    for omega in ["cycle:01", "random:9"] {
        for mode in ["exact", "float"] {
            let out = projconv(
                &[
                    "simulate", &f, "--omega", omega, "--steps", "50", "--mode", mode,
                ],
                dir.path(),
            );
            assert_eq!(out.status.code(), Some(0), "omega={omega} mode={mode}");
            let text = String::from_utf8(out.stdout).unwrap();
            assert_eq!(text.lines().count(), 51);
        }
    }
}

#[test]
fn simulate_excluded_exits_3_with_flagged_row() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_file(dir.path(), "ex.json", EXCLUDING);
    let out = projconv(
        &["simulate", &f, "--omega", "cycle:0", "--steps", "10"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    let text = String::from_utf8(out.stdout).unwrap();
    let last = text.lines().last().unwrap();
    assert!(last.ends_with(",excluded"), "last row: {last}");
    assert_eq!(text.lines().count(), 2, "partial trace written");
}

#[test]
fn simulate_forge_spec_on_diverging_system() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_file(dir.path(), "div.json", DIVERGING);
    let out = projconv(
        &["simulate", &f, "--omega", "forge", "--steps", "8"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 9);

    // Forge spec on a converging system: exit 4.
    let f = write_file(dir.path(), "conv.json", CONVERGING);
    let out = projconv(
        &["simulate", &f, "--omega", "forge", "--steps", "8"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn simulate_bad_omega_symbol_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_file(dir.path(), "div.json", DIVERGING);
    let out = projconv(
        &["simulate", &f, "--omega", "012", "--steps", "3"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn forge_emits_certificate_and_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_file(dir.path(), "div.json", DIVERGING);
    let out = projconv(
        &["forge", &f, "--steps", "200", "--omega-out", "omega.txt"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(v["case"]["tag"], "const_antidiag");
    assert_eq!(v["case"]["k"], 0);
    assert_eq!(v["separation"]["exact"], "1/6");
    assert_eq!(v["cluster_lo"]["exact"], "1/1");
    assert_eq!(v["cluster_hi"]["exact"], "2/1");
    let omega = fs::read_to_string(dir.path().join("omega.txt")).unwrap();
    assert!(omega.trim().chars().all(|c| c == '0'));
    assert_eq!(omega.trim().len(), 2048);
}

#[test]
fn forge_not_applicable_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_file(dir.path(), "conv.json", CONVERGING);
    let out = projconv(&["forge", &f], dir.path());
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn verify_clean_system_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_file(dir.path(), "conv.json", CONVERGING);
    let out = projconv(&["verify", &f, "--depth", "6"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("paths=64"));
    assert!(text.contains("violations=0"));
}

#[test]
fn verify_budget_guard_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_file(dir.path(), "conv.json", CONVERGING);
    let out = projconv(
        &["verify", &f, "--depth", "30", "--budget", "100"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn stress_small_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run1 = projconv(
        &["stress", "--seed", "5", "--samples", "6", "--steps", "500"],
        dir.path(),
    );
    let run2 = projconv(
        &["stress", "--seed", "5", "--samples", "6", "--steps", "500"],
        dir.path(),
    );
    assert_eq!(run1.status.code(), Some(0));
    assert_eq!(
        run1.stdout, run2.stdout,
        "stress output must be byte-identical"
    );
    let text = String::from_utf8(run1.stdout).unwrap();
    assert!(text.contains("contradictions=0"), "{text}");
}

#[test]
fn decide_output_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_file(dir.path(), "div.json", DIVERGING);
    let a = projconv(&["decide", &f], dir.path());
    let b = projconv(&["decide", &f], dir.path());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn bits_limit_env_truncates_with_flag_row() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_file(
        dir.path(),
        "grow.json",
        r#"{"matrices": [[[2, 1], [1, 1]]], "vector": [1, 1]}"#,
    );
    let out = Command::new(env!("CARGO_BIN_EXE_projconv"))
        .args(["simulate", &f, "--omega", "cycle:0", "--steps", "1000"])
        .env("PROJCONV_BITS_LIMIT", "64")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let last = text.lines().last().unwrap();
    assert!(last.ends_with(",exhausted"), "last row: {last}");
    assert!(text.lines().count() < 1000);
}
