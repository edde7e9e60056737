mod common;

use common::{golden_path, run_cli, GOLDEN_CASES};

#[test]
fn outputs_match_goldens() {
    for (name, args) in GOLDEN_CASES {
        let (code, out, err) = run_cli(args);
        assert_eq!(code, 0, "{name}: {err}");
        let want = std::fs::read_to_string(golden_path(name)).expect("golden file");
        assert_eq!(String::from_utf8(out).unwrap(), want, "{name}");
    }
}

#[test]
fn seeded_runs_repeat() {
    let args = ["stopping", "--runs", "12000", "--seed", "5", "--batches", "3"];
    assert_eq!(run_cli(&args).1, run_cli(&args).1);
}

#[test]
fn bad_p_value_is_a_validation_error() {
    let (code, out, err) = run_cli(&["evidence", "--p", "1.5"]);
    assert_eq!(code, 1);
    assert!(out.is_empty());
    assert!(!err.is_empty());
}

#[test]
fn infeasible_target_is_a_computation_error() {
    // r_pre can never exceed 1/alpha = 20
    let (code, _, err) = run_cli(&["design", "--effect", "point:0.5", "--target-r-pre", "25"]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn malformed_csv_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "study_id,p_value\na,0.01\nb,zero\n").unwrap();
    let (code, _, err) = run_cli(&["reanalyze", "--input", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "[evidence]\np = 0.05\n").unwrap();
    let (code, out, err) = run_cli(&["--config", path.to_str().unwrap(), "evidence"]);
    assert_eq!(code, 0, "{err}");
    assert!(String::from_utf8(out).unwrap().starts_with("bf_bound=2.456"));
}

#[test]
fn json_output_parses() {
    for (name, args) in GOLDEN_CASES.iter().filter(|(_, a)| a.contains(&"json")) {
        let (_, out, _) = run_cli(args);
        serde_json::from_slice::<serde_json::Value>(&out).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
