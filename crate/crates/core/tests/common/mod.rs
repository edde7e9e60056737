//! CLI golden cases shared by the golden and acceptance targets.

use std::path::PathBuf;

/// (golden file stem, argv after the program name). `{data}` expands to
/// the test data directory.
pub const GOLDEN_CASES: &[(&str, &[&str])] = &[
    (
        "design_two_sample",
        &["design", "--family", "two-sample-z", "--sides", "one", "--effect", "point:0.21", "--n", "280", "--alpha", "0.05"],
    ),
    (
        "design_solve_n",
        &["design", "--family", "two-sample-z", "--sides", "one", "--effect", "point:0.21", "--target-r-pre", "16", "--prior-odds", "1:10"],
    ),
    (
        "design_solve_alpha",
        &["design", "--power", "0.5", "--prior-odds", "1:100000", "--target-odds", "10"],
    ),
    ("evidence_p", &["evidence", "--p", "0.05"]),
    (
        "evidence_priors",
        &["evidence", "--family", "z-mean", "--sides", "one", "--z", "2.06", "--prior", "uniform:0:2.95", "--prior", "eb-all", "--prior", "eb-noninc", "--prior-odds", "1:4"],
    ),
    (
        "evidence_grid_file",
        &["evidence", "--sides", "one", "--z", "2.5", "--prior", "grid:@{data}/grid_prior.csv"],
    ),
    (
        "evidence_variance_json",
        &["--format", "json", "evidence", "--family", "normal-variance", "--x", "1.96", "--prior", "point:4"],
    ),
    (
        "verify_mc",
        &["verify", "--sides", "one", "--prior", "uniform:0:2.95", "--mc", "--runs", "20000", "--seed", "7"],
    ),
    (
        "verify_curve_csv",
        &["--format", "csv", "verify", "--family", "normal-variance", "--prior", "point:4", "--grid", "5"],
    ),
    ("stopping_null", &["stopping", "--seed", "1", "--runs", "20000"]),
    ("stopping_four_looks", &["stopping", "--four-looks", "--runs", "20000", "--seed", "3"]),
    (
        "stopping_json",
        &["--format", "json", "stopping", "--start-p", "0.08", "--runs", "5000", "--retain", "3"],
    ),
    ("reanalyze_csv", &["--format", "csv", "reanalyze", "--input", "{data}/studies.csv"]),
    ("reanalyze_text", &["reanalyze", "--input", "{data}/studies.csv"]),
    ("reanalyze_curve", &["--format", "csv", "reanalyze", "--curve", "--p-lo", "0.001", "--points", "5"]),
];

pub fn tests_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests")
}

pub fn golden_path(name: &str) -> PathBuf {
    tests_dir().join("golden").join(format!("{name}.out"))
}

/// Runs the CLI in-process; returns (exit code, stdout, stderr).
pub fn run_cli(args: &[&str]) -> (i32, Vec<u8>, String) {
    let data = tests_dir().join("data");
    let data = data.to_str().expect("utf-8 test path");
    let mut argv = vec!["rejodds".to_string()];
    argv.extend(args.iter().map(|a| a.replace("{data}", data)));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = rejodds::cli::run(argv, &mut std::io::empty(), &mut out, &mut err);
    (code, out, String::from_utf8_lossy(&err).into_owned())
}
