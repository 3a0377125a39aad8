//! Black-box checks of the command-line interface.

use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_gridshed");
const CASE6_PATH: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/case6.case");

fn run(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(BIN).args(args).output().expect("binary launches");
    (
        out.status.success(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn parse_reports_case_dimensions() {
    let (ok, stdout, _) = run(&["parse", "--case", CASE6_PATH]);
    assert!(ok);
    assert!(stdout.contains("buses"), "got: {stdout}");
}

#[test]
fn pf_writes_state_csv() {
    let tmp = std::env::temp_dir().join(format!("gridshed-cli-pf-{}.csv", std::process::id()));
    let (ok, _, _) = run(&[
        "pf",
        "--case",
        CASE6_PATH,
        "--out",
        tmp.to_str().unwrap(),
    ]);
    assert!(ok);
    let csv = std::fs::read_to_string(&tmp).unwrap();
    assert!(csv.starts_with("bus,v_mag"));
    // bus block (header + 6 buses) then branch block (header + 7 branches)
    assert_eq!(csv.lines().count(), 15);
    assert!(csv.contains("branch,from,to"));
    let _ = std::fs::remove_file(&tmp);
}

#[test]
fn ols_prints_shedding_summary() {
    let (ok, stdout, _) = run(&["ols", "--case", CASE6_PATH, "--contingency", "7"]);
    assert!(ok);
    assert!(stdout.to_lowercase().contains("optimal"), "got: {stdout}");
}

#[test]
fn missing_case_file_fails_with_message() {
    let (ok, _, stderr) = run(&["parse", "--case", "/nonexistent/grid.case"]);
    assert!(!ok);
    assert!(!stderr.is_empty());
}

#[test]
fn islanding_contingency_is_rejected() {
    // branches 2 and 3 disconnect buses 2 and 3 from the rest of case6
    let (ok, _, stderr) = run(&["pf", "--case", CASE6_PATH, "--contingency", "2,3"]);
    assert!(!ok);
    assert!(stderr.to_lowercase().contains("island"), "got: {stderr}");
}

#[test]
fn unknown_subcommand_is_an_error() {
    let (ok, _, _) = run(&["frobnicate"]);
    assert!(!ok);
}
