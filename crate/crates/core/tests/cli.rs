use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn fraclab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fraclab")).args(args).arg("--out").arg(out).output().unwrap()
}

fn last_line(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).lines().last().unwrap_or_default().to_string()
}

#[test]
fn trivial_scenario_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario("constant.json");
    for cmd in ["eval", "solve", "slide", "density", "verify"] {
        let o = fraclab(&[cmd, "--scenario", path.to_str().unwrap(), "--threads", "1"], dir.path());
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&o.stdout));
        assert!(last_line(&o).starts_with(&format!("STATUS OK command={cmd}")), "{}", last_line(&o));
    }
    let csv = std::fs::read_to_string(dir.path().join("eval.csv")).unwrap();
    assert!(csv.starts_with("index,x0,value"));
    for line in csv.lines().skip(1) {
        let v: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(v.abs() < 1e-10);
    }
}

#[test]
fn premise_failure_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario("bump_premise.json");
    let o = fraclab(&["verify", "--scenario", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(last_line(&o).contains("premise_fail=1"), "{}", last_line(&o));
}

#[test]
fn malformed_scenario_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        "{\n  \"name\": \"bad\",\n  \"params\": {\"n\": 1, \"s\": 0.5},\n  \"domain\": {\"kind\": \"nowhere\"}\n}\n",
    )
    .unwrap();
    let o = fraclab(&["solve", "--scenario", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4"), "{err}");
    assert!(last_line(&o).starts_with("STATUS ERROR"));
}

#[test]
fn failed_solve_leaves_no_solution() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("constant.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["domain"] = serde_json::json!({"kind": "rectangle", "lo": [0.01], "hi": [0.02]});
    let path = dir.path().join("empty.json");
    std::fs::write(&path, v.to_string()).unwrap();
    let out = dir.path().join("out");
    let o = fraclab(&["solve", "--scenario", path.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.join("solution.csv").exists());
    let log: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("solver_log.json")).unwrap()).unwrap();
    assert_eq!(log["status"], "FAIL");
    // no stray temporary files
    let names: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 1, "{names:?}");
}

#[test]
fn tol_scale_reaches_checks() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario("cosine_eval.json");
    // a tiny tolerance makes the oracle comparison fail
    let o = fraclab(&["eval", "--scenario", path.to_str().unwrap(), "--tol-scale", "1e-9"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stdout));
    let o = fraclab(&["eval", "--scenario", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0));
}
