//! End-to-end runs of the `cj` subcommands through [`causejudger_cli::dispatch`],
//! checking exit codes and the files each command leaves behind.

use std::path::Path;

use causejudger_cli::dispatch;
use serde_json::Value;

fn cj(args: &[&str]) -> i32 {
    let mut argv = vec!["cj"];
    argv.extend_from_slice(args);
    dispatch(argv)
}

fn gen_dataset(dir: &Path, count: usize) -> String {
    let out = dir.join("tasks.jsonl");
    let code = cj(&[
        "gen",
        "--level",
        "1",
        "--count",
        &count.to_string(),
        "--seed",
        "11",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    out.to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_writes_a_dataset_that_validates() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = gen_dataset(dir.path(), 6);
    assert!(dir.path().join("tasks.manifest.json").exists());
    assert_eq!(cj(&["validate", &dataset]), 0);
}

#[test]
fn gen_without_a_seed_is_a_usage_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tasks.jsonl");
    let code = cj(&["gen", "--level", "1", "--count", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(!out.exists(), "a usage error must not touch the filesystem");
}

#[test]
fn gen_rejects_an_out_of_range_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tasks.jsonl");
    let code = cj(&[
        "gen", "--level", "9", "--count", "4", "--seed", "1", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(!out.exists());
}

#[test]
fn validate_flags_a_tampered_label() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = gen_dataset(dir.path(), 4);
    let text = std::fs::read_to_string(&dataset).unwrap();
    assert!(text.contains("\"True\""), "seed 11 should yield at least one positive");
    std::fs::write(&dataset, text.replacen("\"True\"", "\"False\"", 1)).unwrap();
    assert_eq!(cj(&["validate", &dataset]), 1);
}

#[test]
fn gen_config_file_fills_gaps_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("gen.json");
    std::fs::write(
        &config,
        r#"{"level": 1, "count": 4, "seed": 5, "positive_fraction": 1.0}"#,
    )
    .unwrap();
    let out = dir.path().join("tasks.jsonl");
    let code = cj(&[
        "gen",
        "--config",
        config.to_str().unwrap(),
        "--count",
        "6",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let manifest = read_json(&dir.path().join("tasks.manifest.json"));
    assert_eq!(manifest["config"]["level"], 1, "level comes from the file");
    assert_eq!(manifest["config"]["count"], 6, "the flag overrides the file");
    assert_eq!(manifest["counts"]["positive"], 6, "fraction 1.0 comes from the file");
}

#[test]
fn gen_config_file_with_unknown_keys_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("gen.json");
    std::fs::write(&config, r#"{"level": 1, "count": 2, "seed": 1, "bogus": 3}"#).unwrap();
    let out = dir.path().join("tasks.jsonl");
    let code = cj(&[
        "gen",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(!out.exists());
}

#[test]
fn run_with_the_symbolic_backend_reports_a_perfect_cj() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = gen_dataset(dir.path(), 6);
    let out = dir.path().join("exp");
    let code = cj(&[
        "run",
        "--dataset",
        &dataset,
        "--methods",
        "cj,sc-cot",
        "--backend",
        "symbolic",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);

    let report = read_json(&out.join("report.json"));
    assert_eq!(report["subset_size"], 6);
    assert_eq!(report["incomplete_cells"], 0);
    let methods = report["methods"].as_array().unwrap();
    assert_eq!(methods[0]["method"], "cj");
    assert_eq!(methods[0]["success_rate"], 100.0);
    assert_eq!(methods[0]["avg_calls"], 2.0);
    assert_eq!(methods[1]["method"], "sc-cot:5");
    assert_eq!(methods[1]["avg_calls"], 5.0);
    assert!(out.join("traces.jsonl").exists());
    assert!(out.join("report.txt").exists());

    // `report` recomputes the same files from the traces without re-running.
    assert_eq!(cj(&["report", out.to_str().unwrap()]), 0);
    assert_eq!(read_json(&out.join("report.json")), report);
}

#[test]
fn run_accepts_a_config_file_for_the_whole_spec() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = gen_dataset(dir.path(), 4);
    let out = dir.path().join("exp");
    let config = dir.path().join("run.json");
    std::fs::write(
        &config,
        format!(
            r#"{{"dataset": {:?}, "methods": ["io"], "backend": {{"kind": "symbolic"}}, "out_dir": {:?}}}"#,
            dataset,
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    assert_eq!(cj(&["run", "--config", config.to_str().unwrap()]), 0);
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["methods"][0]["method"], "io");
    assert_eq!(report["methods"][0]["success_rate"], 100.0);
}

#[test]
fn run_rejects_bad_method_and_backend_flags() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = gen_dataset(dir.path(), 4);
    let out = dir.path().join("exp");
    let base = [
        "run",
        "--dataset",
        &dataset,
        "--out",
        out.to_str().unwrap(),
    ];

    let with = |extra: &[&str]| {
        let mut argv = base.to_vec();
        argv.extend_from_slice(extra);
        cj(&argv)
    };

    assert_eq!(with(&["--methods", "cj,frobnicate", "--backend", "symbolic"]), 2);
    assert_eq!(with(&["--methods", "cj", "--backend", "noisy"]), 2);
    // Noisy runs must pin their seed explicitly.
    assert_eq!(with(&["--methods", "cj", "--backend", "noisy:0.1"]), 2);
    // Remote backends need an endpoint and a model.
    assert_eq!(with(&["--methods", "cj", "--backend", "remote", "--model", "m"]), 2);
    // Remote-only flags are rejected elsewhere rather than ignored.
    assert_eq!(
        with(&["--methods", "cj", "--backend", "symbolic", "--temperature", "0.5"]),
        2
    );
    assert!(!out.exists(), "usage errors must not create the output directory");
}

#[test]
fn import_converts_good_records_and_skips_bad_ones() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("records.jsonl");
    std::fs::write(
        &input,
        concat!(
            r#"{"theory": "Anne is responsible. If a person is responsible and excited "#,
            r#"then this person is trustworthy.", "phenomenon": "Anne is trustworthy", "#,
            r#""abducible": "Anne is excited"}"#,
            "\n",
            r#"{"theory": "Bob is not happy.", "phenomenon": "Bob is happy", "abducible": "Bob is calm"}"#,
            "\n",
        ),
    )
    .unwrap();
    let output = dir.path().join("tasks.jsonl");
    let code = cj(&[
        "import",
        "--format",
        "proofwriter",
        input.to_str().unwrap(),
        output.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "skipped records do not fail the import");
    let text = std::fs::read_to_string(&output).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert_eq!(cj(&["validate", output.to_str().unwrap()]), 0);
}

#[test]
fn import_rejects_unknown_formats() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("records.jsonl");
    std::fs::write(&input, "").unwrap();
    let output = dir.path().join("tasks.jsonl");
    let code = cj(&[
        "import",
        "--format",
        "folio",
        input.to_str().unwrap(),
        output.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(!output.exists());
}

#[test]
fn report_on_a_directory_without_a_run_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cj(&["report", dir.path().to_str().unwrap()]), 1);
}
