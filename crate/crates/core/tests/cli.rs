//! End-to-end tests of the `specgen` binary: exit codes, run-directory
//! artifacts, and the report/datasets subcommands.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_specgen")
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("process exited normally")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// Offline run against the replay scenario, then report and datasets on the
/// produced run directory.
#[test]
fn offline_run_report_datasets_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    let config_path = dir.path().join("config.toml");
    let config = format!(
        r#"
bundles = [{bundle:?}]
models = ["mock-model"]
combinations = ["LLNL", "ACSL + HLNL"]
mock_scenario = {scenario:?}
offline = true
output_dir = {out:?}

[tools]
verifier = {verifier:?}
"#,
        bundle = repo_root().join("bundles/stee"),
        scenario = fixture("scenarios/stee_pass.toml"),
        out = run_dir,
        verifier = fixture("bin/replay-wp-8-8"),
    );
    std::fs::write(&config_path, config).unwrap();

    let output = run(&["run", "--config", config_path.to_str().unwrap()]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr(&output));
    for artifact in [
        "config.toml",
        "results.json",
        "table_stee.md",
        "table_stee.csv",
        "summary.txt",
    ] {
        assert!(run_dir.join(artifact).is_file(), "missing {artifact}");
    }
    let table = std::fs::read_to_string(run_dir.join("table_stee.md")).unwrap();
    assert!(table.contains("| mock-model | LLNL |"), "{table}");
    assert!(table.contains("**8 / 8**"), "{table}");

    let report = run(&["report", run_dir.to_str().unwrap()]);
    assert_eq!(exit_code(&report), 0, "stderr: {}", stderr(&report));
    assert!(stdout(&report).contains("| mock-model | ACSL + HLNL |"));

    let report_csv = run(&["report", run_dir.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(exit_code(&report_csv), 0);
    assert!(stdout(&report_csv)
        .contains("model,specification_type,compiled,eq_check,verified,loc,fully_proved"));

    let datasets = run(&["datasets", run_dir.to_str().unwrap()]);
    assert_eq!(exit_code(&datasets), 0, "stderr: {}", stderr(&datasets));
    let sft = std::fs::read_to_string(run_dir.join("datasets/sft.jsonl")).unwrap();
    assert_eq!(sft.lines().count(), 2);
    for line in sft.lines() {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(record["schema_version"], 1);
    }
}

/// A run whose only cell fails to compile exits with status 1.
#[test]
fn failing_run_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    let output = run(&[
        "run",
        "--bundle",
        repo_root().join("bundles/stee").to_str().unwrap(),
        "--model",
        "mock-model",
        "--combination",
        "LLNL",
        "--mock-scenario",
        fixture("scenarios/stee_compile_fail.toml")
            .to_str()
            .unwrap(),
        "--offline",
        "--out",
        run_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 1, "stderr: {}", stderr(&output));
    assert!(run_dir.join("results.json").is_file());
}

#[test]
fn offline_without_scenario_is_a_usage_error() {
    let output = run(&[
        "run",
        "--bundle",
        repo_root().join("bundles/stee").to_str().unwrap(),
        "--model",
        "m",
        "--offline",
    ]);
    assert_eq!(exit_code(&output), 2);
    assert!(stderr(&output).contains("error:"));
}

#[test]
fn check_flags_a_goto_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("goto.c");
    std::fs::write(
        &path,
        "void f(void)\n{\n    int i = 0;\n    if (i == 0) {\n        goto out;\n    }\nout:\n    return;\n}\n",
    )
    .unwrap();
    let output = run(&["check", path.to_str().unwrap()]);
    assert_eq!(exit_code(&output), 1, "stdout: {}", stdout(&output));
    assert!(stdout(&output).contains("rule 1"), "{}", stdout(&output));
}

#[test]
fn check_passes_a_clean_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clean.c");
    std::fs::write(
        &path,
        "int add_sat(int a, int b)\n{\n    if (a > 100 - b) {\n        return 100;\n    }\n    return a + b;\n}\n",
    )
    .unwrap();
    let output = run(&["check", path.to_str().unwrap()]);
    assert_eq!(exit_code(&output), 0, "stdout: {}", stdout(&output));
    assert!(stdout(&output).contains("conforms: true"));
}

#[test]
fn verify_reports_goal_summary_via_replay_verifier() {
    let dir = tempfile::tempdir().unwrap();
    let source = dir.path().join("f.c");
    let contract = dir.path().join("f.acsl");
    std::fs::write(&source, "void f(void)\n{\n    return;\n}\n").unwrap();
    std::fs::write(&contract, "assigns \\nothing;\n").unwrap();
    let output = run(&[
        "verify",
        source.to_str().unwrap(),
        "--contract",
        contract.to_str().unwrap(),
        "--verifier",
        fixture("bin/replay-wp-8-8").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr(&output));
    assert!(stdout(&output).contains("Proved goals: 8 / 8"));
}

#[test]
fn report_on_missing_run_dir_is_an_infra_error() {
    let output = run(&["report", "/nonexistent/run-dir"]);
    assert_eq!(exit_code(&output), 2);
    assert!(stderr(&output).contains("error:"));
}
