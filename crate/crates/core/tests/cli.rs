use std::path::Path;
use std::process::{Command, Output};

fn lamina(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lamina"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const TINY: &str = r#"{"name": "tiny", "domain": {"grid": {"nx": 3, "ny": 3, "h": 0.25}, "mask": "rect", "metric": "euclidean"},
 "boundary": {"kind": "expr", "expr": "x"}, "checks": ["solver", "calibration", "mincut_energy"]}"#;

#[test]
fn solve_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "tiny.json", TINY);
    let out = lamina(dir.path(), &["solve", "--config", "tiny.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["u.csv", "x.csv", "report.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let u = std::fs::read_to_string(dir.path().join("u.csv")).unwrap();
    assert_eq!(u.lines().count(), 17);
}

#[test]
fn out_dir_prefixes_relative_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "tiny.json", TINY);
    let out = lamina(dir.path(), &["--out-dir", "res", "solve", "--config", "tiny.json"]);
    assert!(out.status.success());
    assert!(dir.path().join("res/u.csv").exists());
}

#[test]
fn oracle_agrees_with_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "tiny.json", TINY);
    let value = |exhaustive: bool| {
        let mut args = vec!["oracle", "--config", "tiny.json", "--threshold", "0.3", "--out", "cut.json"];
        if exhaustive {
            args.push("--exhaustive");
        }
        assert!(lamina(dir.path(), &args).status.success());
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("cut.json")).unwrap()).unwrap();
        v["value"].as_f64().unwrap()
    };
    let (a, b) = (value(false), value(true));
    assert!((a - b).abs() < 1e-12);
    assert!((a - 0.75).abs() < 1e-12);
}

#[test]
fn verify_pass_fail_and_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "tiny.json", TINY);
    let out = lamina(dir.path(), &["verify", "tiny.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(dir.path().join("out/tiny/report.json").exists());

    write(
        dir.path(),
        "fail.json",
        &TINY.replace("\"tiny\"", "\"fail\"").replace(
            "\"checks\"",
            "\"expected\": [{\"name\": \"energy\", \"value\": 5.0, \"tolerance\": 0.1, \"provenance\": \"trivial\"}], \"checks\"",
        ),
    );
    let out = lamina(dir.path(), &["verify", "tiny.json", "fail.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL fail"));

    write(dir.path(), "bad.json", &TINY.replace("\"nx\": 3", "\"nx\": \"a\""));
    let out = lamina(dir.path(), &["verify", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("invalid configuration at /domain/grid/nx"), "{err}");
}

#[test]
fn malformed_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "trunc.json", "{\"name\": ");
    assert_eq!(lamina(dir.path(), &["solve", "--config", "trunc.json"]).status.code(), Some(2));
    assert_eq!(lamina(dir.path(), &["solve", "--config", "missing.json"]).status.code(), Some(2));
    write(dir.path(), "neg.json", &TINY.replace("\"h\": 0.25", "\"h\": -1"));
    let out = lamina(dir.path(), &["solve", "--config", "neg.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/domain/grid/h"));
    write(dir.path(), "u.csv", "i,j,value\n0,0,1\n");
    let out = lamina(dir.path(), &["plot", "--artifact", "u.csv", "--kind", "pie"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn extract_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "tiny.json", &TINY.replace("\"nx\": 3, \"ny\": 3", "\"nx\": 16, \"ny\": 16"));
    assert!(lamina(dir.path(), &["solve", "--config", "tiny.json"]).status.success());
    let out = lamina(dir.path(), &["extract", "--config", "tiny.json", "--u", "u.csv", "--levels", "8"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = lamina(dir.path(), &["plot", "--artifact", "leaves.json", "--kind", "leaves"]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("leaves.csv")).unwrap();
    assert!(csv.starts_with("leaf_id,x,y\n"));
    assert!(csv.lines().count() > 8);
}
