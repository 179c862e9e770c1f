use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn sweep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sweep")).args(args).env_remove("SWEEP_THREADS").output().unwrap()
}

fn run(args: &[&str]) -> Output {
    let out = sweep(args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: PathBuf) -> String {
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn validate_exit_codes() {
    let out = run(&["validate", s(&scenario("delayed_feedback.toml")), "--samples", "100"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("no violation found on 100 samples"));

    let out = sweep(&["validate", s(&fixture("increasing_delay.toml"))]);
    assert_eq!(code(&out), 3);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l.contains("H4") && l.contains("FAIL")), "{text}");

    let out = sweep(&["validate", s(&fixture("missing_geometry.toml"))]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line") && err.contains("column") && err.contains("geometry"), "{err}");

    let out = sweep(&["validate", s(&fixture("unknown_key.toml"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    assert_eq!(code(&sweep(&["validate", "/nonexistent/scenario.toml"])), 5);
    assert_eq!(code(&sweep(&["simulate", s(&scenario("resting.toml")), "--bogus"])), 2);
}

#[test]
fn resting_scenario_gives_constant_csv() {
    let dir = tempfile::tempdir().unwrap();
    run(&["simulate", s(&scenario("resting.toml")), "--out", s(dir.path())]);
    let csv = read(dir.path().join("trajectory.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,x_1,x_2,u_1,dist_to_C,active_constraints");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 65);
    for r in rows {
        let cells: Vec<&str> = r.split(',').collect();
        assert_eq!(cells[1], "2.9999999999999999e-1");
        assert_eq!(cells[2], "-4.0000000000000002e-1");
        assert_eq!(cells[5], "");
    }
}

#[test]
fn moving_interval_matches_golden_csv() {
    let dir = tempfile::tempdir().unwrap();
    run(&["simulate", s(&scenario("moving_interval.toml")), "--level", "6", "--out", s(dir.path())]);
    let csv = read(dir.path().join("trajectory.csv"));
    // x(t) = max(0.5, t), resting on the lower face once t >= 0.5
    let mut golden = String::from("t,x_1,u_1,dist_to_C,active_constraints\n");
    for i in 0..=64 {
        let t = i as f64 / 64.0;
        let active = if t >= 0.5 { "0" } else { "" };
        golden.push_str(&format!("{t:.16e},{:.16e},{:.16e},{:.16e},{active}\n", t.max(0.5), 0.0, 0.0));
    }
    assert_eq!(csv, golden);
    let report: Value = serde_json::from_str(&read(dir.path().join("report.json"))).unwrap();
    assert_eq!(report["bounds_applicable"], Value::Bool(true));
    assert!(report["max_node_norm"].as_f64().unwrap() <= report["m_bound"].as_f64().unwrap());
    assert!(report["max_state_norm"].as_f64().unwrap() <= report["l_bound"].as_f64().unwrap());
}

#[test]
fn numbers_carry_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    run(&["simulate", s(&scenario("shrinking_box.toml")), "--level", "5", "--out", s(dir.path())]);
    let csv = read(dir.path().join("trajectory.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,x_1,x_2,u_1,u_2,dist_to_C,active_constraints");
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 7);
        for c in &cells[..6] {
            let (mantissa, exp) = c.split_once('e').unwrap();
            let digits = mantissa.trim_start_matches('-');
            assert_eq!(digits.len(), 18, "{c}");
            assert_eq!(digits.as_bytes()[1], b'.');
            exp.parse::<i32>().unwrap();
        }
        assert!(cells[6].split(';').filter(|x| !x.is_empty()).all(|j| j.parse::<usize>().unwrap() < 4));
    }
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    std::fs::write(&file, "x").unwrap();
    let out = sweep(&["simulate", s(&scenario("resting.toml")), "--out", s(&file)]);
    assert_eq!(code(&out), 5);
}

#[test]
fn identical_invocations_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        run(&["optimize", s(&scenario("steering.toml")), "--seed", "5", "--starts", "3", "--out", s(dir.path())]);
        run(&["simulate", s(&scenario("forced_triangle.toml")), "--level", "7", "--out", s(dir.path())]);
    }
    for f in ["optimize.json", "optimize.csv", "trajectory.csv", "report.json"] {
        assert_eq!(read(a.path().join(f)), read(b.path().join(f)), "{f}");
    }
}

#[test]
fn steering_local_beats_grid_oracle() {
    let dir = tempfile::tempdir().unwrap();
    run(&["optimize", s(&scenario("steering.toml")), "--oracle-grid", "5", "--out", s(dir.path())]);
    let json: Value = serde_json::from_str(&read(dir.path().join("optimize.json"))).unwrap();
    let local = json["J_local"].as_f64().unwrap();
    let oracle = json["J_oracle"].as_f64().unwrap();
    assert!(local <= oracle + 1e-3, "{local} vs {oracle}");
    assert_eq!(json["local"]["feasible"], Value::Bool(true));
    assert_eq!(json["oracle"]["trace"]["evaluations"].as_u64(), Some(625));
    let csv = read(dir.path().join("optimize.csv"));
    assert_eq!(csv.lines().next().unwrap(), "t,x_1,u_1,xbar_1,ubar_1,oracle_x_1,oracle_u_1");
}

#[test]
fn oracle_guard_refuses_large_levels() {
    let dir = tempfile::tempdir().unwrap();
    let out = sweep(&[
        "optimize",
        s(&scenario("steering.toml")),
        "--level",
        "20",
        "--oracle-grid",
        "5",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds the limit"));
}

#[test]
fn singleton_controls_reproduce_the_nominal_control() {
    let dir = tempfile::tempdir().unwrap();
    run(&["optimize", s(&scenario("delayed_feedback.toml")), "--level", "3", "--starts", "2", "--out", s(dir.path())]);
    let json: Value = serde_json::from_str(&read(dir.path().join("optimize.json"))).unwrap();
    let controls = json["local"]["controls"].as_array().unwrap();
    assert_eq!(controls.len(), 8);
    assert!(controls.iter().all(|u| u[0].as_f64() == Some(0.0)));
    let csv = read(dir.path().join("optimize.csv"));
    for line in csv.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[2], cells[4]);
    }
}

#[test]
fn refine_writes_table_even_without_convergence() {
    let dir = tempfile::tempdir().unwrap();
    run(&["refine", s(&scenario("delayed_feedback.toml")), "--out", s(dir.path())]);
    let csv = read(dir.path().join("refine.csv"));
    assert_eq!(csv.lines().next().unwrap(), "k,sup_distance");

    let dir = tempfile::tempdir().unwrap();
    let out = sweep(&[
        "refine",
        s(&scenario("delayed_feedback.toml")),
        "--tol",
        "1e-12",
        "--kmax",
        "128",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 4);
    let csv = read(dir.path().join("refine.csv"));
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("16,"));
}

#[test]
fn feasible_table_schema() {
    let dir = tempfile::tempdir().unwrap();
    run(&["feasible", s(&scenario("shrinking_box.toml")), "--levels", "2..4", "--out", s(dir.path())]);
    let csv = read(dir.path().join("feasible.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "level,h,u_l2,x_w12,r_l2,sup_error,lipschitz");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("2,"));
    assert_eq!(code(&sweep(&["feasible", s(&scenario("shrinking_box.toml")), "--levels", "4..2"])), 2);
}

#[test]
fn thread_cap_is_honoured_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    let ok = Command::new(env!("CARGO_BIN_EXE_sweep"))
        .args(["feasible", s(&scenario("shrinking_box.toml")), "--levels", "2..3", "--out", s(dir.path())])
        .env("SWEEP_THREADS", "2")
        .output()
        .unwrap();
    assert!(ok.status.success());
    let bad = Command::new(env!("CARGO_BIN_EXE_sweep"))
        .args(["validate", s(&scenario("resting.toml"))])
        .env("SWEEP_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
