use soliton_core::report::Report;
use std::process::Command;

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_soliton")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn verify_nil_passes() {
    let (code, out, _) = run(&["verify", "nil"]);
    assert_eq!(code, 0);
    let r = Report::from_json(&out).unwrap();
    assert!(r.pass && r.grid == vec![9, 9, 9]);
    assert!(r.metrics["residual"]["max"].as_f64().unwrap() < 1e-5);
    assert!(!r.provenance.paper_anchor.is_empty());
}

#[test]
fn verify_sl2_is_an_expected_failure() {
    let (code, out, _) = run(&["verify", "sl2", "--grid", "5,5,5"]);
    assert_eq!(code, 0);
    let r = Report::from_json(&out).unwrap();
    assert_eq!(r.metrics["outcome"], "no flow found");
}

#[test]
fn wp_check_power_law() {
    let (code, out, _) = run(&["wp", "check", "--lambda", "t^(1/sqrt(2))", "--A", "0", "--KN", "0"]);
    assert_eq!(code, 0);
    let r = Report::from_json(&out).unwrap();
    assert!(r.metrics["third_order_max"].as_f64().unwrap() < 1e-9);
    let (code, _, _) = run(&["wp", "check", "--lambda", "t^2", "--A", "0", "--KN", "0"]);
    assert_eq!(code, 1);
}

#[test]
fn wp_integrate_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let (code, _, _) = run(&[
        "wp",
        "integrate",
        "--lambda",
        "t^(-1/sqrt(2))",
        "--A",
        "0",
        "--KN",
        "0",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let mut rd = csv::Reader::from_path(&csv).unwrap();
    assert_eq!(rd.headers().unwrap().iter().next(), Some("t"));
    assert_eq!(rd.records().count(), 1001);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["verify", "nope"]).0, 2);
    assert_eq!(run(&["verify", "nil", "--grid", "2,2,2"]).0, 2);
    assert_eq!(run(&["verify", "nil", "--tol", "-1"]).0, 2);
    assert_eq!(run(&["ansatz", "/nonexistent/data.json"]).0, 2);
    assert_eq!(run(&["wp", "check", "--lambda", "t^(", "--A", "0", "--KN", "0"]).0, 2);
    // λ′ vanishes at the start, so f is undetermined.
    assert_eq!(run(&["wp", "integrate", "--ics", "1,0,0", "--A", "0", "--KN", "0"]).0, 3);
}

#[test]
fn ansatz_file_and_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("h3.json");
    let doc = soliton_core::ansatz::example("h3").unwrap();
    std::fs::write(&input, serde_json::to_string(&doc).unwrap()).unwrap();
    let out = dir.path().join("report.json");
    let (code, stdout, _) =
        run(&["ansatz", input.to_str().unwrap(), "--grid", "5,5,5", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let from_file = Report::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(from_file, Report::from_json(&stdout).unwrap());
    assert_eq!(from_file.command, "ansatz");
    std::fs::write(&input, "{\"name\": 3}").unwrap();
    assert_eq!(run(&["ansatz", input.to_str().unwrap()]).0, 2);
}

#[test]
fn fit_and_catalog() {
    let (code, out, _) = run(&["fit", "sol"]);
    assert_eq!(code, 0);
    let r = Report::from_json(&out).unwrap();
    assert!((r.metrics["fit"]["a"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    let (code, out, _) = run(&["fit", "sl2"]);
    assert_eq!(code, 0);
    assert_eq!(Report::from_json(&out).unwrap().metrics["evidence_not_proof"], true);
    let (code, out, _) = run(&["catalog", "list"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 11);
    let (code, out, _) = run(&["catalog", "list", "--json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 11);
    let (code, out, _) = run(&["catalog", "show", "nil"]);
    assert_eq!(code, 0);
    assert!(out.contains("y1*y2"));
}

#[test]
fn reruns_are_identical() {
    let a = run(&["verify", "sol", "--grid", "4,4,4", "--seed", "11"]).1;
    let b = run(&["verify", "sol", "--grid", "4,4,4", "--seed", "11"]).1;
    assert_eq!(a, b);
}

#[test]
fn minimal_standard_datum() {
    let (code, out, _) = run(&["minimal", "nil", "--grid", "5,5,5"]);
    assert_eq!(code, 0);
    let r = Report::from_json(&out).unwrap();
    assert!(r.metrics["minimal"]["isometry_witness"].as_f64().unwrap() < 1e-8);
}
