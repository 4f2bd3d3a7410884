use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn bfvkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bfvkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn check<'a>(summary: &'a Value, id: &str) -> &'a Value {
    summary["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["check"] == id)
        .unwrap_or_else(|| panic!("no check {id}"))
}

fn write_model(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("m.model");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn so3_master_equation_passes_exactly() {
    let m = fixture("so3.model");
    let out = bfvkit(&["verify", "bfv", "--model", m.to_str().unwrap(), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let s = json(&out);
    assert_eq!(s["status"], "pass");
    assert_eq!(check(&s, "master-equation")["max_residual"], "0");
    assert_eq!(check(&s, "nilpotent")["status"], "pass");
    assert!(s["model_sha256"].as_str().unwrap().len() == 64);
    assert!(s["conventions"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c.as_str().unwrap().starts_with("bfv:")));
    assert!(check(&s, "coisotropy")["runtime_ms"].is_null());
}

#[test]
fn formal_check_writes_traces() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture("gr-formal.model");
    let out = bfvkit(&[
        "verify",
        "formal",
        "--model",
        m.to_str().unwrap(),
        "--check",
        "ideal-preservation",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("PASS formal/ideal-preservation"));
    assert!(!text.contains("nilpotency"));
    let traces: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("formal-traces.json")).unwrap()).unwrap();
    let first = &traces[0];
    assert_eq!(first["id"], "ideal-preservation");
    let steps = first["cases"][0]["steps"].as_array().unwrap();
    assert!(!steps.is_empty());
    assert!(steps
        .iter()
        .all(|s| s["rule"].is_string() && s["before"].is_string() && s["after"].is_string()));
    assert!(dir.path().join("summary.json").exists());
    assert!(dir.path().join("transcript.txt").exists());
}

#[test]
fn toy_witness_is_reported() {
    let m = fixture("nonconstant-f.model");
    let out = bfvkit(&[
        "verify",
        "toy",
        "--model",
        m.to_str().unwrap(),
        "--check",
        "alt2-witness",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let s = json(&out);
    let c = check(&s, "alt2-witness");
    assert_eq!(c["max_residual"], "p1");
    assert!(c["notes"][0].as_str().unwrap().contains("a = p1"));
    assert_eq!(s["checks"].as_array().unwrap().len(), 1);
}

#[test]
fn failures_come_first_and_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_model(
        dir.path(),
        r#"
[algebra]
rounds = 10

[[algebra.generator]]
name = "x"
degree = 0

[[algebra.generator]]
name = "c"
degree = 1

[[algebra.generator]]
name = "e"
degree = 2

[[algebra.derivation]]
name = "bad"
degree = 1
images = { x = "c", c = "x*e", e = "0" }
"#,
    );
    let out = bfvkit(&["verify", "algebra", "--model", m.to_str().unwrap(), "--json"]);
    assert_eq!(out.status.code(), Some(1));
    let s = json(&out);
    assert_eq!(s["status"], "fail");
    assert_eq!(s["checks"][0]["check"], "derivation-bad");
    assert_eq!(s["checks"][0]["status"], "fail");
    assert_eq!(s["checks"][1]["status"], "pass");
    assert_eq!((s["passed"].as_u64(), s["failed"].as_u64()), (Some(1), Some(1)));
}

#[test]
fn relations_are_applied_before_the_nilpotency_test() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_model(
        dir.path(),
        r#"
[algebra]
rounds = 1
relations = ["c2*c3 = 0"]
generator = [
    { name = "x", degree = 0 },
    { name = "c1", degree = 1 },
    { name = "c2", degree = 1 },
    { name = "c3", degree = 1 },
]

[[algebra.derivation]]
name = "extended"
degree = 1
images = { x = "c1", c1 = "-c2*c3", c2 = "-c3*c1", c3 = "-c1*c2" }
"#,
    );
    let out = bfvkit(&[
        "verify",
        "algebra",
        "--model",
        m.to_str().unwrap(),
        "--json",
        "--check",
        "derivation-extended",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn empty_check_list_gives_an_empty_summary() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_model(dir.path(), "[formal]\nchecks = []\n");
    let out = bfvkit(&["verify", "formal", "--model", m.to_str().unwrap(), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let s = json(&out);
    assert_eq!(s["checks"].as_array().unwrap().len(), 0);
    assert_eq!(s["status"], "pass");
}

#[test]
fn reruns_are_byte_identical() {
    let m = fixture("lattice-default.model");
    let args = [
        "lattice",
        "curvature",
        "--model",
        m.to_str().unwrap(),
        "--json",
        "--n",
        "8,16,32",
    ];
    let a = bfvkit(&args);
    let b = bfvkit(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    for d in [&d1, &d2] {
        let m = fixture("nonconstant-f.model");
        let out = bfvkit(&[
            "report",
            "--model",
            m.to_str().unwrap(),
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("summary.json")).unwrap();
    assert_eq!(read(&d1), read(&d2));
}

#[test]
fn convergence_tables_are_written_as_csv() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture("lattice-default.model");
    let out = bfvkit(&[
        "lattice",
        "curvature",
        "--model",
        m.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("curvature.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("check,N,defect_norm,est_order"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[0][0], "curvature-conformal");
    assert_eq!(rows[0][1], "8");
    assert_eq!(rows[0][3], "");
    let p: f64 = rows[2][3].parse().unwrap();
    assert!((1.7..=2.3).contains(&p));
}

#[test]
fn timing_is_opt_in() {
    let m = fixture("abelian.model");
    let out = bfvkit(&["verify", "bfv", "--model", m.to_str().unwrap(), "--json", "--timing"]);
    let s = json(&out);
    assert!(check(&s, "master-equation")["runtime_ms"].is_number());
}

#[test]
fn lattice_overrides_are_validated() {
    let m = fixture("lattice-default.model");
    let m = m.to_str().unwrap();
    for args in [
        vec!["lattice", "anchor", "--model", m, "--n", "8,16"],
        vec!["lattice", "q0defect", "--model", m, "--k", "1"],
        vec!["lattice", "brackets", "--model", m, "--fd-step", "0"],
        vec!["lattice", "anchor", "--model", m, "--check", "no-such-check"],
    ] {
        let out = bfvkit(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
    }
}

#[test]
fn two_odd_parameters_skip_the_cubic_ghost_orders() {
    let m = fixture("lattice-default.model");
    let out = bfvkit(&[
        "lattice",
        "q0defect",
        "--model",
        m.to_str().unwrap(),
        "--k",
        "2",
        "--json",
        "--check",
        "q0sq-xin",
        "--check",
        "q0sq-h",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let s = json(&out);
    let xin = check(&s, "q0sq-xin");
    assert_eq!(xin["status"], "pass");
    assert!(xin["est_order"].is_null());
    assert!(check(&s, "q0sq-h")["est_order"].is_number());
}

#[test]
fn schema_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_model(dir.path(), "[lattice]\nd = 2\nsizes = [8]\n");
    let out = bfvkit(&["lattice", "anchor", "--model", m.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sizes"));

    let out = bfvkit(&["verify", "bfv", "--model", "/nonexistent/x.model"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/x.model"));

    let m = write_model(dir.path(), "[formal]\n");
    let out = bfvkit(&["verify", "bfv", "--model", m.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn constraints_that_are_not_first_class_fail() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_model(dir.path(), "[constraints]\nn = 2\nh = [\"p1\", \"x1*p2\"]\n");
    let out = bfvkit(&["verify", "bfv", "--model", m.to_str().unwrap(), "--json"]);
    assert_eq!(out.status.code(), Some(1));
    let s = json(&out);
    assert_eq!(check(&s, "first-class")["status"], "fail");
    assert_eq!(check(&s, "master-equation")["status"], "fail");
}
