use std::path::PathBuf;
use std::process::{Command, Output};

use num_rational::BigRational;
use num_traits::{One, Zero};

use recbound::certify::parse_certificate;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(format!("{name}.json"))
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recbound"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn scratch_file(name: &str, contents: &str) -> String {
    let path = std::env::temp_dir().join(format!("recbound-cli-{}-{name}", std::process::id()));
    std::fs::write(&path, contents).unwrap();
    path.display().to_string()
}

#[test]
fn analyze_prints_growth_base() {
    let out = run(&["analyze", &fixture("smallmis")]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("c = 3.000000"), "{}", stdout(&out));
}

#[test]
fn analyze_machine_output_round_trips() {
    let out = run(&["analyze", &fixture("binomial"), "--out", "machine"]);
    assert_eq!(code(&out), 0);
    let parsed = recbound::io::parse_machine_report(&stdout(&out)).unwrap();
    assert!((parsed.c - 4.0).abs() < 1e-6);
}

#[test]
fn infeasible_exits_two() {
    let out = run(&["analyze", &fixture("infeasible")]);
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("infeasib"));
    assert_eq!(code(&run(&["certify", &fixture("infeasible")])), 2);
    assert_eq!(code(&run(&["walk", &fixture("infeasible"), "--n", "3"])), 2);
}

#[test]
fn input_errors_exit_four() {
    assert_eq!(code(&run(&["analyze", "/nonexistent/spec.json"])), 4);
    let broken = scratch_file("broken.json", "{ \"name\": \"x\", ");
    assert_eq!(code(&run(&["analyze", &broken])), 4);
    let zero = scratch_file(
        "zero.json",
        r#"{"name": "z", "dimension": 1, "target": [1], "terms": {"A": [[0]]}}"#,
    );
    assert_eq!(code(&run(&["analyze", &zero])), 4);
    assert_eq!(code(&run(&["analyze", &fixture("fib"), "--bogus"])), 4);
    assert_eq!(code(&run(&["frobnicate"])), 4);
    let neg = scratch_file(
        "neg.json",
        r#"{"name": "n", "dimension": 2, "target": [1, 1], "terms": {"A": [[2, -1], [1, 0]]}}"#,
    );
    assert_eq!(code(&run(&["verify", &neg, "--n", "3"])), 4);
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["certify", "--help"])), 0);
}

#[test]
fn certify_fibonacci_bounds_golden_ratio() {
    let out = run(&["certify", &fixture("fib"), "--bits", "64", "--slack", "1e-9"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cert = parse_certificate(&stdout(&out)).unwrap();
    let c = &cert.bound.c;
    // c >= phi iff c^2 - c - 1 >= 0 for positive c.
    assert!(c > &BigRational::zero());
    assert!(c * c - c - BigRational::one() >= BigRational::zero());
}

#[test]
fn low_candidate_exits_three() {
    let out = run(&["certify", &fixture("fib"), "--c", "21/13", "--w", "1"]);
    assert_eq!(code(&out), 3);
    let out = run(&["certify", &fixture("fib"), "--c", "13/8", "--w", "1"]);
    assert_eq!(code(&out), 0);
    let out = run(&["certify", &fixture("binomial"), "--c", "4", "--w", "1/2"]);
    assert_eq!(code(&out), 4);
}

#[test]
fn verify_and_walk_succeed() {
    let out = run(&["verify", &fixture("binomial"), "--n", "12"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("n,"));
    let out = run(&["walk", &fixture("binomial"), "--n", "5", "--trials", "2000"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("estimate = "));
}

#[test]
fn oversized_table_exits_five() {
    let out = run(&["verify", &fixture("binomial"), "--n", "200000"]);
    assert_eq!(code(&out), 5);
}
