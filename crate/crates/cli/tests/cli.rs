use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use contractcheck_core::fixtures;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_contractcheck"))
}

fn write_fixture(dir: &Path, name: &str) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, fixtures::by_name(name).unwrap()).unwrap();
    path
}

fn analyze(args: &[&str], path: &Path) -> Output {
    bin().arg("analyze").arg(path).args(args).output().unwrap()
}

#[test]
fn inconsistent_contract_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = analyze(&["--analysis", "I"], &write_fixture(dir.path(), "bakery"));
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Block11"), "{text}");
}

#[test]
fn clean_contract_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let out = analyze(&[], &write_fixture(dir.path(), "bakery_repaired"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unreadable_and_invalid_inputs_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(analyze(&[], &dir.path().join("missing.json")).status.code(), Some(1));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(analyze(&[], &bad).status.code(), Some(1));
    let ok = write_fixture(dir.path(), "bakery");
    assert_eq!(analyze(&["--analysis", "III"], &ok).status.code(), Some(1));
    assert_eq!(analyze(&["--timeout", "0"], &ok).status.code(), Some(1));
}

#[test]
fn missing_solver_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = analyze(&["--solver", "/nonexistent/z3"], &write_fixture(dir.path(), "bakery"));
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn json_output_parses_and_mermaid_renders() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_fixture(dir.path(), "bakery");
    let json = analyze(&["--format", "json"], &path);
    let report = contractcheck_core::report::from_json(std::str::from_utf8(&json.stdout).unwrap()).unwrap();
    assert_eq!(report.contract, "bakery");
    let mermaid = analyze(&["--format", "mermaid", "--analysis", "II"], &path);
    let text = String::from_utf8(mermaid.stdout).unwrap();
    assert!(text.starts_with("sequenceDiagram"));
    assert_eq!(text.matches("->>").count(), 2);
}

#[test]
fn out_directory_receives_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_fixture(dir.path(), "bakery");
    let out_dir = dir.path().join("out");
    let out = analyze(&["--out", out_dir.to_str().unwrap()], &path);
    assert_eq!(out.status.code(), Some(2));
    for name in ["report.json", "report.txt", "execution.mmd"] {
        assert!(out_dir.join(name).is_file(), "{name}");
    }
    let witnesses = std::fs::read_dir(&out_dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("flag-"))
        .count();
    assert_eq!(witnesses, 1, "only the limitation flag carries a witness");
    let on_disk = std::fs::read_to_string(out_dir.join("report.json")).unwrap();
    let stdout = analyze(&["--format", "json"], &path).stdout;
    assert_eq!(on_disk.as_bytes(), stdout.as_slice());
}

#[test]
fn timings_are_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_fixture(dir.path(), "bakery_repaired");
    let plain: serde_json::Value =
        serde_json::from_slice(&analyze(&["--format", "json", "--analysis", "II"], &path).stdout).unwrap();
    assert!(plain["analyses"][0]["solve_ms"].is_null());
    let timed: serde_json::Value =
        serde_json::from_slice(&analyze(&["--format", "json", "--analysis", "II", "--timings"], &path).stdout).unwrap();
    assert!(timed["analyses"][0]["solve_ms"].is_u64());
}
