//! End-to-end tests of the binary's command surface: each test runs the
//! compiled `fleetbed` executable the way an operator would and checks the
//! observable contract (files, exit codes, report JSON).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

/// Two clients exercising both record sources: scalar generators (one
/// clean, one compromised) and a 2D unit with color readings and requests.
const FIXTURE_SCENARIO: &str = r#"
seed = 9
records = 1200

[[client]]
id = "alpha"

[[client.component]]
kind = "generator"
distribution = "gaussian"
params = {}

[[client.component]]
kind = "generator"
distribution = "rayleigh"
params = {}
intrusion = "off_value"
level = "easy"

[[client]]
id = "beta"

[[client.component]]
kind = "unit"
color = true
requests = ["poi", "route"]
"#;

fn fleetbed() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fleetbed"))
}

fn write_fixture(dir: &TempDir) -> PathBuf {
    let path = dir.path().join("fixture.toml");
    fs::write(&path, FIXTURE_SCENARIO).expect("fixture scenario written");
    path
}

fn run_ok(command: &mut Command) -> Output {
    let output = command.output().expect("binary runs");
    assert!(
        output.status.success(),
        "command failed with {:?}: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

/// Generate the fixture log and return its path.
fn generate_fixture_log(dir: &TempDir, scenario: &Path) -> PathBuf {
    let out = dir.path().join("fixture.tsv");
    run_ok(fleetbed().args(["generate", "--scenario"]).arg(scenario).arg("--out").arg(&out));
    out
}

#[test]
fn missing_scenario_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let output = fleetbed()
        .args(["generate", "--scenario"])
        .arg(dir.path().join("absent.toml"))
        .arg("--out")
        .arg(dir.path().join("out.tsv"))
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("cannot read scenario file"),
        "stderr: {stderr}"
    );
}

#[test]
fn same_seed_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let scenario = write_fixture(&dir);
    let first = dir.path().join("first.tsv");
    let second = dir.path().join("second.tsv");
    run_ok(fleetbed().args(["generate", "--scenario"]).arg(&scenario).arg("--out").arg(&first));
    run_ok(fleetbed().args(["generate", "--scenario"]).arg(&scenario).arg("--out").arg(&second));

    let first_bytes = fs::read(&first).unwrap();
    assert_eq!(first_bytes, fs::read(&second).unwrap());
    let lines = first_bytes.split(|&b| b == b'\n').filter(|l| !l.is_empty()).count();
    assert_eq!(lines, 1200, "record budget respected");
}

#[test]
fn seed_and_record_overrides_apply() {
    let dir = TempDir::new().unwrap();
    let scenario = write_fixture(&dir);
    let out_dir = dir.path().join("logs");
    fs::create_dir(&out_dir).unwrap();
    let summary_path = dir.path().join("summary.json");
    run_ok(
        fleetbed()
            .args(["generate", "--scenario"])
            .arg(&scenario)
            .args(["--seed", "77", "--records", "100", "--out"])
            .arg(&out_dir)
            .arg("--summary-json")
            .arg(&summary_path),
    );

    // A directory output hosts the default `<stem>-<seed>.tsv` name.
    let log = out_dir.join("fixture-77.tsv");
    assert!(log.is_file(), "expected {}", log.display());
    let content = fs::read_to_string(&log).unwrap();
    assert_eq!(content.lines().count(), 100);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&summary_path).unwrap()).unwrap();
    assert_eq!(summary["seed"], 77);
    assert_eq!(summary["records"], 100);
}

#[test]
fn env_var_provides_the_default_output_directory() {
    let dir = TempDir::new().unwrap();
    let scenario = write_fixture(&dir);
    let out_dir = dir.path().join("env-logs");
    fs::create_dir(&out_dir).unwrap();
    run_ok(
        fleetbed()
            .env("FLEETBED_OUT_DIR", &out_dir)
            .args(["generate", "--scenario"])
            .arg(&scenario)
            .args(["--records", "40"]),
    );
    assert!(out_dir.join("fixture-9.tsv").is_file());
}

#[test]
fn analyze_rejects_a_corrupt_line_with_its_number() {
    let dir = TempDir::new().unwrap();
    let scenario = write_fixture(&dir);
    let log = dir.path().join("short.tsv");
    run_ok(
        fleetbed()
            .args(["generate", "--scenario"])
            .arg(&scenario)
            .args(["--records", "50", "--out"])
            .arg(&log),
    );
    let mut content = fs::read_to_string(&log).unwrap();
    content.push_str("not a record\n");
    fs::write(&log, content).unwrap();

    let output = fleetbed().args(["analyze", "--log"]).arg(&log).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains(":51:"), "stderr should name line 51: {stderr}");
}

#[test]
fn a_log_compared_with_itself_scores_unit_r_squared() {
    let dir = TempDir::new().unwrap();
    let scenario = write_fixture(&dir);
    let log = generate_fixture_log(&dir, &scenario);
    let report_path = dir.path().join("compare.json");
    run_ok(
        fleetbed()
            .args(["compare", "--baseline"])
            .arg(&log)
            .arg(&log)
            .arg("--report-json")
            .arg(&report_path),
    );

    let reports: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    let candidates = reports.as_array().unwrap();
    assert_eq!(candidates.len(), 1);
    let r_squared = candidates[0]["r_squared"].as_object().unwrap();
    for metric in ["gaussian", "rayleigh", "poi", "route", "position-heatmap"] {
        let value = r_squared[metric].as_f64().unwrap();
        assert!((value - 1.0).abs() < 1e-12, "{metric} R² = {value}");
    }
    // The short fixture walk never leaves one background-color region, so
    // the color frequency vector has zero variance and R² against it is
    // undefined; compare reports the category as skipped.
    assert_eq!(
        candidates[0]["skipped"].as_array().unwrap(),
        &[serde_json::Value::from("color")]
    );
}

#[test]
fn detect_saves_a_model_that_generate_replays() {
    let dir = TempDir::new().unwrap();
    let scenario = write_fixture(&dir);
    let log = generate_fixture_log(&dir, &scenario);
    let model_path = dir.path().join("model.json");
    let detect_report = dir.path().join("detect.json");
    run_ok(
        fleetbed()
            .args(["detect", "--log"])
            .arg(&log)
            .arg("--save-model")
            .arg(&model_path)
            .arg("--report-json")
            .arg(&detect_report),
    );

    let model: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&model_path).unwrap()).unwrap();
    let intervals = model["intervals"].as_object().unwrap();
    assert!(intervals.contains_key("gaussian"), "model: {model}");
    // The compromised generator has no normal records to train on, so the
    // detector abstains from that category rather than inventing bounds.
    assert!(!intervals.contains_key("rayleigh"), "model: {model}");

    let summary_path = dir.path().join("summary.json");
    run_ok(
        fleetbed()
            .args(["generate", "--scenario"])
            .arg(&scenario)
            .args(["--seed", "10", "--records", "300", "--out"])
            .arg(dir.path().join("replay.tsv"))
            .arg("--detect-model")
            .arg(&model_path)
            .arg("--summary-json")
            .arg(&summary_path),
    );
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&summary_path).unwrap()).unwrap();
    assert!(summary["flagged"].is_u64(), "summary: {summary}");
}

#[test]
fn gap_reports_the_requested_category() {
    let dir = TempDir::new().unwrap();
    let report_path = dir.path().join("gap.json");
    run_ok(
        fleetbed()
            .args([
                "gap",
                "--category",
                "poi",
                "--sets",
                "1",
                "--records",
                "600",
                "--seed",
                "3",
                "--report-json",
            ])
            .arg(&report_path),
    );
    let reports: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    let entries = reports.as_array().unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0]["category"], "poi");
    assert!(entries[0]["recall_gap_points"].is_number());
}
