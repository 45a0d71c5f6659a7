use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mobsis::dynamics::FractionTable;
use mobsis::StabilityReport;

fn mobsis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mobsis"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

const RING: &str = r#"{
  "schema": 1,
  "name": "ring",
  "graph": {"kind": "ring", "n": 4},
  "rates": {"kind": "uniform_out", "nu": 0.2},
  "beta": 0.3,
  "delta": DELTA,
  "mode": "deterministic",
  "t_end": 5.0
}"#;

#[test]
fn run_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let output = mobsis(&[
        "run",
        "--scenario",
        scenario("fig1a.json").to_str().unwrap(),
        "--out-dir",
        out,
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    let csv = fs::read_to_string(dir.path().join("fig1a.csv")).unwrap();
    let table = FractionTable::from_csv(&csv).unwrap();
    assert_eq!(table.n, 20);
    assert_eq!(table.times.len(), 201);
    assert!(fs::read_to_string(dir.path().join("fig1a.svg"))
        .unwrap()
        .starts_with("<svg"));
    assert!(dir.path().join("fig1a_deterministic.csv").exists());
}

#[test]
fn wrong_delta_length_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &RING.replace("DELTA", "[0.1, 0.2, 0.3]"));
    let output = mobsis(&[
        "run",
        "--scenario",
        path.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("`delta`"), "{}", stderr(&output));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        &RING
            .replace("DELTA", "0.1")
            .replace("\"t_end\"", "\"t_final\": 1, \"t_end\""),
    );
    let output = mobsis(&[
        "run",
        "--scenario",
        path.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("t_final"), "{}", stderr(&output));
}

#[test]
fn endemic_output_in_disease_free_regime_is_a_regime_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = RING.replace("DELTA", "0.5").replace(
        "\"t_end\": 5.0",
        "\"t_end\": 5.0, \"outputs\": {\"endemic_json\": \"p_star.json\"}",
    );
    let path = write_config(dir.path(), &text);
    let output = mobsis(&[
        "run",
        "--scenario",
        path.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(4), "{}", stderr(&output));
}

#[test]
fn analyze_reports_lambda2_of_complete_graph() {
    let dir = tempfile::tempdir().unwrap();
    let output = mobsis(&[
        "analyze",
        "--scenario",
        scenario("fig3.json").to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    let report: StabilityReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fig3_report.json")).unwrap()).unwrap();
    assert!((report.lambda2 - 0.2105).abs() <= 1e-4);
    assert!(report.condition_iv);
    // json only: no CSV or SVG.
    assert!(!dir.path().join("fig3.csv").exists());
}

#[test]
fn analyze_writes_endemic_state_when_it_exists() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &RING.replace("DELTA", "[0.1, 0.1, 0.2, 0.4]"));
    let output = mobsis(&[
        "analyze",
        "--scenario",
        path.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    let text = fs::read_to_string(dir.path().join("ring_endemic.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["p_star"].as_array().unwrap().len(), 4);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let output = mobsis(&[
            "reproduce",
            "--figure",
            "fig1c",
            "--seed",
            "7",
            "--format",
            "csv",
            "--out-dir",
            dir.path().to_str().unwrap(),
        ]);
        assert!(output.status.success(), "{}", stderr(&output));
    }
    let read = |dir: &tempfile::TempDir| fs::read(dir.path().join("fig1c.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn every_figure_reproduces_its_stated_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let output = mobsis(&[
        "reproduce",
        "--figure",
        "all",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        output.status.success(),
        "{}\n{}",
        String::from_utf8_lossy(&output.stdout),
        stderr(&output)
    );
    for figure in mobsis::scenario::Figure::ALL {
        let name = figure.name();
        for suffix in [".csv", ".svg", "_provenance.md"] {
            assert!(dir.path().join(format!("{name}{suffix}")).exists(), "{name}{suffix}");
        }
        let note = fs::read_to_string(dir.path().join(format!("{name}_provenance.md"))).unwrap();
        assert!(note.contains("## Assumed values"));
        assert!(note.contains("[pass]") && !note.contains("FAIL"), "{note}");
    }
}

#[test]
fn unknown_figure_is_rejected() {
    let output = mobsis(&["reproduce", "--figure", "fig4"]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("fig4"));
}
