use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use lamina_ffi::*;

const PROBLEM: &str = r#"{"domain": {"grid": {"nx": 6, "ny": 6, "h": 0.25}, "mask": "rect", "metric": "euclidean"},
 "boundary": {"kind": "expr", "expr": "y"}}"#;

fn problem(json: &str) -> Result<*mut LaminaProblem, (LaminaStatus, String)> {
    let json = CString::new(json).unwrap();
    let mut p = ptr::null_mut();
    let status = unsafe { lamina_problem_from_json(json.as_ptr(), ptr::null(), &mut p) };
    if status == LaminaStatus::Ok {
        Ok(p)
    } else {
        assert!(p.is_null());
        Err((status, last_error()))
    }
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(lamina_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn solve_matches_mincut() {
    let p = problem(PROBLEM).unwrap();
    unsafe {
        let (mut nx, mut ny, mut h) = (0, 0, 0.0);
        assert_eq!(lamina_problem_grid(p, &mut nx, &mut ny, &mut h), LaminaStatus::Ok);
        assert_eq!((nx, ny, h), (6, 6, 0.25));
        let mut cut = 0.0;
        assert_eq!(lamina_mincut_energy(p, 64, &mut cut), LaminaStatus::Ok);
        let mut level = 0.0;
        assert_eq!(lamina_mincut(p, 0.5, &mut level), LaminaStatus::Ok);
        assert!((level - 1.5).abs() < 1e-12, "{level}");

        let mut s = ptr::null_mut();
        assert_eq!(lamina_solve(p, 0, &mut s), LaminaStatus::Ok);
        let (mut e, mut gap, mut conv) = (0.0, 0.0, false);
        assert_eq!(lamina_solution_summary(s, &mut e, &mut gap, &mut conv), LaminaStatus::Ok);
        assert!(conv);
        assert!((e - cut).abs() <= 0.01 * cut, "{e} vs {cut}");

        let mut len = 0;
        assert_eq!(lamina_solution_values(s, ptr::null_mut(), &mut len), LaminaStatus::Ok);
        assert_eq!(len, 49);
        let mut small = vec![0.0; 10];
        let mut cap = small.len();
        assert_eq!(lamina_solution_values(s, small.as_mut_ptr(), &mut cap), LaminaStatus::InvalidArgument);
        let mut u = vec![0.0; len];
        assert_eq!(lamina_solution_values(s, u.as_mut_ptr(), &mut len), LaminaStatus::Ok);
        assert!((u[6 * 7 + 3] - 1.5).abs() < 1e-9, "top boundary {}", u[6 * 7 + 3]);
        lamina_solution_free(s);
        lamina_problem_free(p);
    }
}

#[test]
fn errors_are_classified() {
    let (s, msg) = problem("{\"domain\": ").unwrap_err();
    assert_eq!(s, LaminaStatus::Config);
    assert!(!msg.is_empty());
    let (s, msg) = problem(&PROBLEM.replace("\"h\": 0.25", "\"h\": 0")).unwrap_err();
    assert_eq!(s, LaminaStatus::Config);
    assert!(msg.contains("/domain/grid/h"), "{msg}");
    let (s, _) = problem(&PROBLEM.replace("\"expr\": \"y\"", "\"expr\": \"y +\"")).unwrap_err();
    assert_eq!(s, LaminaStatus::Config);

    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(lamina_problem_from_json(ptr::null(), ptr::null(), &mut p), LaminaStatus::NullPointer);
        let bad = [0xffu8, 0];
        assert_eq!(
            lamina_problem_from_json(bad.as_ptr().cast(), ptr::null(), &mut p),
            LaminaStatus::InvalidUtf8
        );
        let missing = CString::new("/nonexistent/problem.json").unwrap();
        assert_eq!(lamina_problem_load(missing.as_ptr(), &mut p), LaminaStatus::Io);
        let mut v = 0.0;
        assert_eq!(lamina_mincut(ptr::null(), 0.5, &mut v), LaminaStatus::NullPointer);
        lamina_problem_free(ptr::null_mut());
        lamina_solution_free(ptr::null_mut());
    }
}

#[test]
fn verify_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/constant.json")).unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut passed = false;
    assert_eq!(unsafe { lamina_verify(path.as_ptr(), out.as_ptr(), &mut passed) }, LaminaStatus::Ok);
    assert!(passed);
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(lamina_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_header() {
    let lib = target_dir().join("liblamina_ffi.a");
    if !lib.exists() {
        panic!("static library missing at {}", lib.display());
    }
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let out = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stdout));
    assert!(String::from_utf8_lossy(&run.stdout).contains("energy"));
}
