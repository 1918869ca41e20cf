use std::fs;
use std::path::Path;
use std::process::Command;

use rtsc_core::pipeline::{read_cct_report, read_run_report};

fn rtsc(args: &[&str], out: &Path) -> String {
    let res = Command::new(env!("CARGO_BIN_EXE_rtsc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn rtsc");
    assert!(res.status.success(), "{args:?}: {}", String::from_utf8_lossy(&res.stderr));
    String::from_utf8(res.stdout).unwrap()
}

#[test]
fn smib_build_then_dispatch() {
    let tmp = tempfile::tempdir().unwrap();
    let db = tmp.path().join("db");
    let run = tmp.path().join("run");
    let msg = rtsc(&["offline-build", "--case", "smib"], &db);
    assert!(msg.contains("0 failed"), "{msg}");
    for f in ["manifest.json", "case.txt", "scenarios.txt", "base_dispatch.json", "records.json"] {
        assert!(db.join(f).is_file(), "{f}");
    }
    rtsc(&["online-dispatch", "--case", "smib", "--db", db.to_str().unwrap()], &run);
    let report = read_run_report(&run).unwrap();
    assert_eq!(report.tds_calls, 0);
    // the single machine is pinned at 80 MW
    assert!((report.dispatch.p_g_mw[0] - 80.0).abs() < 1e-3);
}

#[test]
fn smib_cct_and_simulation_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    rtsc(&["cct", "--case", "smib", "--bracket", "0.1", "0.4"], tmp.path());
    let cct = read_cct_report(tmp.path()).unwrap();
    assert!((cct.cct - 0.2366).abs() < 0.005, "{}", cct.cct);
    assert!(cct.margins.windows(2).all(|w| w[0].0 <= w[1].0));

    let sim = tmp.path().join("sim");
    let msg = rtsc(&["simulate", "--case", "smib", "--t-clear", "0.3"], &sim);
    assert!(msg.starts_with("Unstable"), "{msg}");
    let rows = fs::read_to_string(sim.join("trajectory.dat")).unwrap();
    assert!(rows.lines().count() > 100);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(sim.join("simulation.json")).unwrap()).unwrap();
    assert!(summary["margin"]["eta"].as_f64().unwrap() < 0.0);
}

#[test]
fn repeated_reduction_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    rtsc(&["reduce-scenarios", "--case", "smib", "--seed", "9"], &a);
    rtsc(&["reduce-scenarios", "--case", "smib", "--seed", "9"], &b);
    for f in ["sampled.txt", "reduced.txt", "sampled.dat"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn bad_arguments_fail_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let res = Command::new(env!("CARGO_BIN_EXE_rtsc"))
        .args(["simulate", "--case", "smib", "--contingency", "4", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("no such contingency"));
    let res = Command::new(env!("CARGO_BIN_EXE_rtsc"))
        .args(["offline-build", "--case", "/nonexistent/case.txt"])
        .output()
        .unwrap();
    assert!(!res.status.success());
}
