use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bicombing_lab::cli::{run_with_threads, EXIT_OK, EXIT_USAGE, EXIT_VIOLATIONS};
use serde_json::Value;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bicombing-lab"))
        .args(args)
        .env_remove("BICOMBING_LAB_THREADS")
        .output()
        .expect("binary runs")
}

fn json_file(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn clean_run_exits_zero_and_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let out = lab(&["axioms", "--samples", "100", "--report", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    assert!(out.stdout.is_empty());
    let v = json_file(&report);
    assert_eq!(v["command"], "axioms");
    assert_eq!(v["violations"].as_array().unwrap().len(), 0);
    assert_eq!(v["manifest"]["subcommand"], "axioms");
}

#[test]
fn violations_exit_two() {
    let out = lab(&["--space", "l2-plane", "axioms", "--samples", "200", "--tol", "1e-300"]);
    assert_eq!(out.status.code(), Some(EXIT_VIOLATIONS));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!v["violations"].as_array().unwrap().is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("violation:"));
}

#[test]
fn bad_input_exits_sixty_four() {
    for args in [
        vec!["--space", "bogus", "axioms"],
        vec!["--space", "ex63", "axis", "--start", "0.3,0.2,0.45"],
        vec!["axioms", "--tol", "0"],
        vec!["tightspan", "--matrix", "/definitely/not/here"],
        vec!["no-such-command"],
    ] {
        let out = lab(&args);
        assert_eq!(out.status.code(), Some(EXIT_USAGE), "{args:?}");
    }
}

#[test]
fn tightspan_of_the_l1_square() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "sq.txt", "# l1 unit square\n0 1 2 1\n1 0 1 2\n2 1 0 1\n1 2 1 0\n");
    let out = lab(&["tightspan", "--matrix", &m]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["summary"]["width"].as_f64(), Some(1.0));
    assert_eq!(v["summary"]["delta"].as_f64(), Some(1.0));
}

#[test]
fn malformed_matrix_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "bad.txt", "0 1 2 1\n1 0 x 2\n");
    let out = lab(&["tightspan", "--matrix", &m]);
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2, column 5"));

    let m = write(dir.path(), "short.txt", "0 1 2\n");
    let out = lab(&["tightspan", "--matrix", &m]);
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1, column 1"));
}

#[test]
fn strip_and_torus_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let strip = dir.path().join("ball.csv");
    let out = lab(&["--space", "ex22", "strip", "--csv", strip.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    assert!(fs::read_to_string(&strip).unwrap().lines().count() > 2);

    let torus = dir.path().join("torus.csv");
    let out = lab(&["--space", "ex63", "torus", "--k", "1,2", "--csv", torus.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let text = fs::read_to_string(&torus).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("i,k,lhs,rhs_bound"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let argv = ["bicombing-lab", "--space", "ex63", "--seed", "7", "barycenter", "--backend", "tree", "--n", "4", "--trials", "30"];
    let one = run_with_threads(argv, 1).unwrap();
    let four = run_with_threads(argv, 4).unwrap();
    assert_eq!(one, four);
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.json");
    let mut runs = Vec::new();
    for _ in 0..2 {
        let out = lab(&["--space", "ex22", "--seed", "3", "axioms", "--samples", "150", "--report", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(EXIT_OK));
        runs.push(fs::read(&path).unwrap());
    }
    assert!(runs[0] == runs[1]);
}
