use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seasonal-dispatch")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verbs_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("case");
    let out = run(&["synth", "-o", s(&case), "--days", "4", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cfg = case.join("case.toml");
    assert!(cfg.is_file());

    let full = dir.path().join("full.csv");
    let out = run(&["full-horizon", "-c", s(&cfg), "-t", s(&full)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(full.is_file());

    let lp = dir.path().join("lp");
    let fixed = dir.path().join("fixed.csv");
    let out = run(&["rolling", "-c", s(&cfg), "-m", "fixed-level", "--horizon", "2", "-t", s(&fixed), "--dump-lp", s(&lp)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_dir(&lp).unwrap().count(), 4);

    let rep = dir.path().join("report");
    let out = run(&["report", "-t", s(&full), "-t", s(&fixed), "--infeasible", "hybrid:1", "-o", s(&rep)]);
    assert_eq!(out.status.code(), Some(0));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("fixed-level") && table.contains("Infeas."));
    assert!(rep.join("sh_state.svg").is_file());

    // An undersized heat pump cannot serve the heat demand.
    let out = run(&["full-horizon", "-c", s(&cfg), "--set", "heat_pump.p_heat_max=0.01"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    // Input errors.
    let out = run(&["rolling", "-c", s(&cfg), "-m", "hybrid", "--horizon", "2"]);
    assert_eq!(out.status.code(), Some(3));
    let out = run(&["full-horizon", "-c", s(&dir.path().join("missing.toml"))]);
    assert_eq!(out.status.code(), Some(3));
    let out = run(&["full-horizon", "-c", s(&cfg), "--set", "transport_fee=-1"]);
    assert_eq!(out.status.code(), Some(3));
    let out = run(&["derive-targets", "-t", s(&full), "-o", s(&dir.path().join("t.csv"))]);
    assert_eq!(out.status.code(), Some(3), "a 4-day trace is not a year");

    let out = run(&["min-horizon", "-c", s(&cfg), "--max-days", "2", "--to", "1", "--levels", s(&full)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("day,min_days"));
}
