use std::path::Path;
use std::process::{Command, Output};

fn cpperturb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpperturb"))
        .args(args)
        .env("RAYON_NUM_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn run_to(dir: &Path, name: &str, extra: &[&str]) -> (Output, String) {
    let out = dir.join(name);
    let out_str = out.to_str().unwrap().to_string();
    let mut args = vec!["--out", out_str.as_str()];
    args.extend_from_slice(extra);
    let res = cpperturb(&args);
    let csv = std::fs::read_to_string(&out).unwrap_or_default();
    (res, csv)
}

#[test]
fn samerange_rows_all_pass() {
    let dir = tempfile::tempdir().unwrap();
    let (res, csv) = run_to(
        dir.path(),
        "sr.csv",
        &["--suite", "samerange", "--n", "3", "--delta", "1e-4", "--trials", "100"],
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "trial,seed,level_delta,delta_measured,distance_lower,distance_upper,paper_bound,pass"
    );
    assert_eq!(lines.len(), 101);
    assert!(lines[1..].iter().all(|l| l.ends_with(",true")));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sr.csv.json")).unwrap())
            .unwrap();
    assert_eq!(summary["all_passed"], true);
    assert_eq!(summary["row_count"], 100);
}

#[test]
fn output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--suite", "cutdown", "--trials", "3", "--seed", "17", "--delta", "1e-2,1e-6"];
    let (a, first) = run_to(dir.path(), "a.csv", &args);
    let (b, second) = run_to(dir.path(), "b.csv", &args);
    assert!(a.status.success() && b.status.success());
    assert!(!first.is_empty());
    assert_eq!(first, second);
}

#[test]
fn seeds_change_the_trials() {
    let base = ["--suite", "samerange", "--trials", "2", "--delta", "1e-2"];
    let a = cpperturb(&[&base[..], &["--seed", "1"]].concat());
    let b = cpperturb(&[&base[..], &["--seed", "2"]].concat());
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn empty_delta_list_runs_no_trials() {
    let res = cpperturb(&["--suite", "crux", "--delta", ""]);
    assert!(res.status.success());
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1, "header only: {stdout}");
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let res = cpperturb(&["--suite", "bogus"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("bogus"));
}

#[test]
fn malformed_delta_is_a_usage_error() {
    let res = cpperturb(&["--suite", "samerange", "--delta", "1e-2,abc"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("abc"));
}

#[test]
fn negative_delta_is_a_usage_error() {
    let res = cpperturb(&["--suite", "samerange", "--delta", "-1e-3"]);
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn failed_hypothesis_is_reported_per_trial() {
    let res = cpperturb(&["--suite", "samerange", "--delta", "2", "--trials", "1"]);
    assert_eq!(res.status.code(), Some(1));
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.lines().nth(1).unwrap().ends_with(",false"));
    assert!(String::from_utf8_lossy(&res.stderr).contains("out of range"));
}

#[test]
fn small_counterexample_dimension_is_rejected() {
    let res = cpperturb(&["--suite", "counterexample", "--n", "4", "--trials", "1"]);
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn map_file_is_measured() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    let t = cpperturb::cpmap::MatLinMap::transpose_map(2);
    cpperturb::io::write_map(&path, &t).unwrap();
    let res = cpperturb(&["--map", path.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let v: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(v["is_cp"], false);
    assert!((v["cb_norm"]["upper"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert!((v["norm"]["lower"].as_f64().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn malformed_map_file_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"n": 1, "k": 1, "choi": [["x", 0]]}"#).unwrap();
    let res = cpperturb(&["--map", path.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("choi[0][0]"));
}
