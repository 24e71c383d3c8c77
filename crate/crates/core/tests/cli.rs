use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use fracdisp::estimates::{admissible_alpha_large, admissible_tree, AdmissiblePoint};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fracdisp"));
    c.env_remove("FRACDISP_THREADS");
    c
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let status = bin().arg(cmd).arg("--config").arg(config).arg("--out").arg(out).args(extra).output().unwrap();
    status.status.code().unwrap()
}

fn manifest(out: &Path) -> Value {
    serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap()
}

fn schema_errors(m: &Value) -> Vec<String> {
    let schema: Value = serde_json::from_str(include_str!("../schema/manifest.schema.json")).unwrap();
    let v = jsonschema::validator_for(&schema).unwrap();
    v.iter_errors(m).map(|e| e.to_string()).collect()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn alpha_large_region_matches_predicate_exhaustively() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "r.json",
        r#"{"region": {"kind": "alpha_large", "n": 3, "alpha": 1.5, "sigma": 0.75}, "inv_p_points": 201, "inv_q_points": 201}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run("regions", &cfg, &out, &[]), 0);
    let m = manifest(&out);
    assert!(schema_errors(&m).is_empty(), "{:?}", schema_errors(&m));
    let (header, rows) = read_csv(&out.join("region.csv"));
    assert_eq!(header, ["inv_p [1]", "inv_q [1]", "aux [1]", "member [-]"]);
    assert_eq!(rows.len(), 201 * 201);
    let mut members = Vec::new();
    for row in &rows {
        let (p, q): (f64, f64) = (row[0].parse().unwrap(), row[1].parse().unwrap());
        let m = row[3] == "1";
        assert_eq!(m, admissible_alpha_large(3, 1.5, AdmissiblePoint::new(p, q, 0.75)), "({p}, {q})");
        if m {
            members.push((p, q));
        }
    }
    // The binding edge is 1.5/p + 3/q = 9/8 (the other constraint,
    // 1/p + 3/q >= 3/4, is slack): it meets 1/p = 0 at 1/q = 3/8 and
    // 1/p = 1/2 at 1/q = 1/8. Members hug it from above.
    let lowest_q_at_half = members.iter().filter(|m| m.0 == 0.5).map(|m| m.1).fold(1.0, f64::min);
    assert!((lowest_q_at_half - 0.125).abs() < 1e-12);
    let first_p = |row: f64| members.iter().filter(|m| (m.1 - row).abs() < 1e-9).map(|m| m.0).fold(1.0, f64::min);
    assert!((first_p(0.375) - 0.0025).abs() < 1e-12);
    assert!((first_p(0.3725) - 0.005).abs() < 1e-12);
    assert!(members.iter().all(|&(p, q)| p > 0.0 && q < 0.5));
}

#[test]
fn tree_region_is_the_half_open_square() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "t.json", r#"{"region": {"kind": "tree"}, "inv_p_points": 101, "inv_q_points": 101}"#);
    let out = dir.path().join("out");
    assert_eq!(run("regions", &cfg, &out, &[]), 0);
    let (_, rows) = read_csv(&out.join("region.csv"));
    let mut count = 0;
    for row in &rows {
        let (p, q): (f64, f64) = (row[0].parse().unwrap(), row[1].parse().unwrap());
        let expected = q < 0.5 || p == 0.0;
        assert_eq!(row[3] == "1", expected, "({p}, {q})");
        assert_eq!(expected, admissible_tree(AdmissiblePoint::new(p, q, 0.0)));
        count += expected as usize;
    }
    assert_eq!(count, 101 * 100 + 1);
}

#[test]
fn config_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cases = [
        ("regions", r#"{"region": {"kind": "tree"}, "inv_p_points": 0, "inv_q_points": 0}"#),
        ("regions", r#"{"region": {"kind": "tree", "shape": "round"}, "inv_p_points": 5, "inv_q_points": 5}"#),
        ("hn-kernel", r#"{"n": 3, "alpha": 1.5, "sigma": 0.75, "t": [], "r": [1]}"#),
        ("hn-kernel", r#"{"n": 3, "alpha": 1.5, "sigma": 0.75, "t": [1], "r": [1], "colour": "red"}"#),
        ("hn-kernel", r#"{"n": 3, "alpha": 1.0, "sigma": 0.75, "t": [1], "r": [1]}"#),
        ("tree-verify", r#"{"q": 1, "alpha": 1.5, "t": [10, 20, 40, 80]}"#),
        (
            "nls-run",
            r#"{"q": 2, "r_max": 20, "alpha": 0.5, "eta": 3, "coupling": 1, "gauge_invariant": true, "dt": 0.01, "T": 1, "initial": {"kind": "gaussian"}}"#,
        ),
        ("phase-report", "not json"),
    ];
    for (i, (cmd, body)) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("c{i}.json"), body);
        assert_eq!(run(cmd, &cfg, &out, &[]), 3, "{cmd}: {body}");
    }
    assert!(!out.join("manifest.json").exists());
    assert_eq!(run("regions", &dir.path().join("missing.json"), &out, &[]), 3);
    let ok = write_config(dir.path(), "ok.json", r#"{"region": {"kind": "tree"}, "inv_p_points": 3, "inv_q_points": 3}"#);
    assert_eq!(run("regions", &ok, &out, &["--tol", "1e-3"]), 3);
    assert_eq!(run("regions", &ok, &out, &["--threads", "0"]), 3);
    assert_eq!(bin().arg("regions").output().unwrap().status.code(), Some(3));
}

#[test]
fn reruns_reproduce_the_determinism_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "p.json",
        r#"{"n": 3, "alphas": [0.5, 1.5], "r_ratios": {"min": 0.01, "max": 10, "points": 9, "log": true},
            "tree": {"q": [2], "alphas": [1.5], "t": 5, "r": [0, 1, 4]}}"#,
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run("phase-report", &cfg, &a, &[]), 0);
    assert_eq!(run("phase-report", &cfg, &b, &["--threads", "1"]), 0);
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(ma["determinism_hash"], mb["determinism_hash"]);
    assert_eq!(ma["payloads"], mb["payloads"]);
    assert!(schema_errors(&ma).is_empty());
    for entry in fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        assert!(!name.ends_with(".tmp"), "{name}");
    }
    let (header, rows) = read_csv(&a.join("hn_phase.csv"));
    assert_eq!(header[0], "alpha [1]");
    assert_eq!(rows.len(), 18);
    assert_eq!(read_csv(&a.join("tree_phase.csv")).1.len(), 3);
}

#[test]
fn kernel_table_columns_and_tolerance_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "k.json", r#"{"n": 3, "alpha": 1.5, "sigma": 0.75, "t": [1], "r": [0.5, 1.0]}"#);
    let out = dir.path().join("out");
    let status =
        bin().args(["hn-kernel", "--config"]).arg(&cfg).arg("--out").arg(&out).args(["--tol", "1e-7"]).env("FRACDISP_THREADS", "1").output().unwrap();
    assert_eq!(status.status.code(), Some(0));
    let m = manifest(&out);
    assert_eq!(m["config"]["tol"], 1e-7);
    assert!(schema_errors(&m).is_empty());
    let (header, rows) = read_csv(&out.join("kernel.csv"));
    let names: Vec<_> = header.iter().map(|h| h.split(' ').next().unwrap()).collect();
    assert_eq!(names, ["t", "r", "re", "im", "abs", "regime", "bound", "ratio", "err"]);
    assert!(header.iter().all(|h| h.ends_with(']')));
    assert_eq!(rows.len(), 2);
    for row in &rows {
        let ratio: f64 = row[7].parse().unwrap();
        assert!(ratio.is_finite() && ratio > 0.0);
    }
}

#[test]
fn failing_checks_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // Over this window the tree kernel has not reached its asymptotic slope.
    let cfg = write_config(dir.path(), "t.json", r#"{"q": 2, "alpha": 0.5, "t": [10, 20, 50, 100]}"#);
    let out = dir.path().join("out");
    assert_eq!(run("tree-verify", &cfg, &out, &[]), 2);
    let m = manifest(&out);
    assert!(schema_errors(&m).is_empty());
    let statuses: Vec<_> = m["checks"].as_array().unwrap().iter().map(|c| c["status"].as_str().unwrap().to_string()).collect();
    assert_eq!(statuses[0], "PASS");
    assert!(statuses.iter().any(|s| s == "FAIL"));
    let (header, rows) = read_csv(&out.join("norms.csv"));
    assert_eq!(header, ["t [time]", "norm_q [1]", "q [1]"]);
    assert_eq!(rows.len(), 12);
}

#[test]
fn non_gauge_runs_flag_mass_drift() {
    let dir = tempfile::tempdir().unwrap();
    let body = |gauge: bool| {
        format!(
            r#"{{"q": 2, "r_max": 30, "alpha": 2, "eta": 3, "coupling": 1, "gauge_invariant": {gauge},
                "dt": 0.01, "T": 1, "sample_every": 10, "initial": {{"kind": "exponential", "amplitude": 1, "decay": 0.5}}}}"#
        )
    };
    for gauge in [true, false] {
        let cfg = write_config(dir.path(), "n.json", &body(gauge));
        let out = dir.path().join(format!("out{gauge}"));
        assert_eq!(run("nls-run", &cfg, &out, &[]), 0);
        let m = manifest(&out);
        assert!(schema_errors(&m).is_empty());
        assert_eq!(m["checks"][0]["status"], if gauge { "PASS" } else { "FLAGGED" });
        assert_eq!(read_csv(&out.join("mass.csv")).1.len(), 11);
        assert_eq!(read_csv(&out.join("final_state.csv")).1.len(), 31);
    }
}

#[test]
fn schema_rejects_malformed_manifests() {
    let bad = serde_json::json!({
        "command": "regions", "toolkit_version": "0.1.0", "config": {},
        "checks": [{"name": "x", "status": "MAYBE", "detail": ""}],
        "payloads": [], "wall_clock_seconds": 0.1, "determinism_hash": "00"
    });
    assert_eq!(schema_errors(&bad).len(), 2);
}
