use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(format!("{name}.toml"))
}

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_normality-lab")).args(args).output().expect("binary runs")
}

fn check(name: &str, extra: &[&str]) -> (i32, Value) {
    let path = fixture(name);
    let mut args = vec!["check", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = lab(&args);
    let json = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)));
    (out.status.code().unwrap(), json)
}

#[test]
fn identity_passes_every_check() {
    let (code, report) = check("identity", &["--seed", "42", "--samples", "20"]);
    assert_eq!(code, 0);
    assert_eq!(report["schema"], 1);
    let ids: Vec<&str> = report["checks"].as_array().unwrap().iter().map(|c| c["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["metric", "transport", "cross", "normality", "gauge"]);
    assert_eq!(report["system"]["gauge"], "random");
    for c in report["checks"].as_array().unwrap() {
        assert_eq!(c["summary"]["pass"], true, "{}", c["id"]);
        let row = &c["rows"][0];
        for key in ["check", "equation", "point", "x", "fiber", "residual", "tolerance", "verdict"] {
            assert!(!row[key].is_null(), "row lacks {key}");
        }
    }
}

#[test]
fn mutation_fails_and_is_named() {
    let (code, report) = check("mutated", &["--checks", "cross", "--samples", "10"]);
    assert_eq!(code, 1);
    let failing = &report["checks"][0]["summary"]["failing_equations"];
    assert!(failing.as_array().unwrap().iter().any(|e| e == "cross-beta"), "{failing}");
}

#[test]
fn connection_free_mode_is_recorded() {
    let (code, report) = check("extended", &["--checks", "metric,cross", "--samples", "5", "--connection-free"]);
    assert_eq!(code, 0);
    assert_eq!(report["system"]["mode"], "connection-free");
    assert_eq!(report["config"]["connection_free"], true);
}

#[test]
fn shift_runs_from_the_surface_section() {
    let (code, report) = check("circle", &["--checks", "shift"]);
    assert_eq!(code, 0);
    let rows = report["checks"][0]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 32 * 11);
    let (code, report) = check("identity", &["--checks", "shift"]);
    assert_eq!(code, 1);
    assert_eq!(report["checks"][0]["error"]["kind"], "validation");
}

#[test]
fn csv_output_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.csv");
    let path = fixture("cubic");
    let o = lab(&["check", path.to_str().unwrap(), "--checks", "metric", "--samples", "3", "--format", "csv", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("check,equation,point"));
    assert_eq!(lines.len(), 1 + 3 * 2);
}

#[test]
fn bad_inputs_exit_with_an_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[system]\nn = 2\n[legendre]\nL1 = \"v1 +\"\nL2 = \"v2\"\n").unwrap();
    let o = lab(&["check", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["error"]["kind"], "syntax");
    assert!(doc["error"]["message"].as_str().unwrap().contains("bad.toml:4:"), "{doc}");

    let path = fixture("identity");
    let o = lab(&["check", path.to_str().unwrap(), "--fiber-box=-1,1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = lab(&["check", path.to_str().unwrap(), "--checks", "metric,bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seeds_change_points_but_not_structure() {
    let (_, a) = check("cubic", &["--checks", "metric", "--samples", "4", "--seed", "1"]);
    let (_, b) = check("cubic", &["--checks", "metric", "--samples", "4", "--seed", "2"]);
    assert_ne!(a["checks"][0]["rows"][0]["x"], b["checks"][0]["rows"][0]["x"]);
    assert_eq!(a["checks"][0]["summary"]["rows"], b["checks"][0]["summary"]["rows"]);
}
