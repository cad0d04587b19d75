use std::path::PathBuf;

use hierface::cli::{main_with_args, EXIT_ERROR, EXIT_EXISTS, EXIT_NOT_EXISTS};

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/data").join(name).to_str().unwrap().to_string()
}

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["hierface"];
    argv.extend_from_slice(args);
    main_with_args(argv)
}

#[test]
fn check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = out.to_str().unwrap();
    let m = data("two_by_two.json");
    assert_eq!(run(&["check", "--model", &m, "--data", &data("two_by_two.csv"), "--out", o]), EXIT_NOT_EXISTS);
    let full = dir.path().join("full.csv");
    std::fs::write(&full, "x,y,count\n0,0,1\n0,1,1\n1,0,1\n1,1,1\n").unwrap();
    let code = run(&["check", "--model", &m, "--data", full.to_str().unwrap(), "--out", o]);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(code, EXIT_EXISTS, "{report}");
    assert_eq!(report["mle_exists"], true);
}

#[test]
fn errors_exit_with_one() {
    assert_eq!(run(&["check", "--model", "/nonexistent.json", "--data", "/nonexistent.csv"]), EXIT_ERROR);
    assert_eq!(run(&["check", "--no-such-flag"]), EXIT_ERROR);
    assert_eq!(run(&["frobnicate"]), EXIT_ERROR);
    let m = data("two_by_two.json");
    let d = data("two_by_two.csv");
    assert_eq!(run(&["fit", "--model", &m, "--data", &d, "--mle", "--emle"]), EXIT_ERROR);
}

#[test]
fn large_grid_needs_the_implicit_flag() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("one.csv");
    let header: Vec<String> = (1..=50).map(|i| i.to_string()).collect();
    std::fs::write(&csv, format!("{}\n{}\n", header.join(","), vec!["0"; 50].join(","))).unwrap();
    let out = dir.path().join("r.json");
    let args = ["check", "--model", &data("grid5x10.json"), "--data", csv.to_str().unwrap(), "--out", out.to_str().unwrap()];
    assert_eq!(run(&args), EXIT_ERROR);
    let mut with = args.to_vec();
    with.push("--implicit");
    assert_eq!(run(&with), EXIT_NOT_EXISTS);
}

#[test]
fn model_command_describes_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    assert_eq!(run(&["model", "--model", &data("grid4x4.json"), "--out", out.to_str().unwrap()]), 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v.is_object());
}
