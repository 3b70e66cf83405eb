//! C ABI over the lamina library.
//!
//! Every function returns a [`LaminaStatus`]; on failure the message is
//! available from [`lamina_last_error`] on the same thread. Handles are
//! opaque and released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use lamina::io::mincut::{mincut_oracle, per_threshold_sum};
use lamina::scenario::{run_scenario, ProblemConfig, RunOptions};
use lamina::solver::{energy, solve, DirichletProblem, SolveReport, SolverOptions};
use lamina::LaminaError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaminaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Io = 4,
    Domain = 5,
    InvalidArgument = 6,
    Computation = 7,
    Panic = 8,
}

/// A Dirichlet problem: domain, boundary data and solver options.
pub struct LaminaProblem {
    config: ProblemConfig,
    problem: DirichletProblem,
}

/// A solved problem.
pub struct LaminaSolution {
    u: Vec<f64>,
    energy: f64,
    report: SolveReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(LaminaStatus, String);

impl From<LaminaError> for Failure {
    fn from(e: LaminaError) -> Self {
        use LaminaError as E;
        let status = match &e {
            E::ConfigInvalid { .. } | E::Json(_) | E::Expression(_) | E::Csv { .. } => LaminaStatus::Config,
            E::Io { .. } => LaminaStatus::Io,
            E::NonpositiveSpacing(_)
            | E::EmptyMask
            | E::DisconnectedMask { .. }
            | E::NonpositiveConformalFactor { .. }
            | E::InconsistentMetric(_) => LaminaStatus::Domain,
            E::ShapeMismatch { .. }
            | E::InvalidBoundaryData(_)
            | E::InvalidOptions(_)
            | E::ThresholdOutOfRange { .. } => LaminaStatus::InvalidArgument,
            _ => LaminaStatus::Computation,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LaminaStatus {
    let (status, msg) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => return LaminaStatus::Ok,
        Ok(Err(Failure(s, m))) => (s, m),
        Err(p) => {
            let m = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (LaminaStatus::Panic, format!("panic: {m}"))
        }
    };
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
    status
}

fn null(what: &str) -> Failure {
    Failure(LaminaStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `s` is null or a NUL-terminated string.
unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| Failure(LaminaStatus::InvalidUtf8, format!("{what}: {e}")))
}

/// # Safety
/// `s` is null or a NUL-terminated string.
unsafe fn opt_path(s: *const c_char, what: &str) -> Result<Option<PathBuf>, Failure> {
    if s.is_null() {
        Ok(None)
    } else {
        text(s, what).map(|t| Some(PathBuf::from(t)))
    }
}

fn build(config: ProblemConfig, base: Option<&Path>) -> Result<LaminaProblem, Failure> {
    let dom = Arc::new(config.build_domain(base)?);
    let problem = config.build_problem(dom, base)?;
    Ok(LaminaProblem { config, problem })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lamina_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty when none failed.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lamina_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a problem from JSON text. Relative paths inside it resolve
/// against `base_dir`, which may be null.
///
/// # Safety
/// `json` and non-null `base_dir` are NUL-terminated strings; `out` is a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lamina_problem_from_json(
    json: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut LaminaProblem,
) -> LaminaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = ProblemConfig::parse(text(json, "json")?)?;
        let base = opt_path(base_dir, "base_dir")?;
        *out = Box::into_raw(Box::new(build(config, base.as_deref())?));
        Ok(())
    })
}

/// Loads a problem from a JSON file.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lamina_problem_load(path: *const c_char, out: *mut *mut LaminaProblem) -> LaminaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = Path::new(text(path, "path")?);
        let config = ProblemConfig::load(path)?;
        *out = Box::into_raw(Box::new(build(config, path.parent())?));
        Ok(())
    })
}

/// # Safety
/// `p` is null or a handle from `lamina_problem_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lamina_problem_free(p: *mut LaminaProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Grid shape: `nx` by `ny` cells of side `h`, `(nx + 1) (ny + 1)` nodes
/// numbered row by row from the bottom left.
///
/// # Safety
/// `p` is a live handle; the out pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn lamina_problem_grid(
    p: *const LaminaProblem,
    nx: *mut usize,
    ny: *mut usize,
    h: *mut f64,
) -> LaminaStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        if nx.is_null() || ny.is_null() || h.is_null() {
            return Err(null("output"));
        }
        let dom = &p.problem.domain;
        (*nx, *ny, *h) = (dom.nx, dom.ny, dom.h);
        Ok(())
    })
}

/// Exact minimum cut value of the superlevel problem at threshold `y`.
///
/// # Safety
/// `p` is a live handle; `value` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lamina_mincut(p: *const LaminaProblem, y: f64, value: *mut f64) -> LaminaStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        let value = value.as_mut().ok_or_else(|| null("value"))?;
        *value = mincut_oracle(&p.problem, y)?.value();
        Ok(())
    })
}

/// Integral of the minimum cut value over all thresholds, an exact
/// reference for the solver energy.
///
/// # Safety
/// `p` is a live handle; `value` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lamina_mincut_energy(p: *const LaminaProblem, max_levels: usize, value: *mut f64) -> LaminaStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        let value = value.as_mut().ok_or_else(|| null("value"))?;
        *value = per_threshold_sum(&p.problem, max_levels.max(1))?;
        Ok(())
    })
}

/// Solves the problem. `max_iter` of zero keeps the configured limit.
///
/// # Safety
/// `p` is a live handle; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lamina_solve(
    p: *const LaminaProblem,
    max_iter: usize,
    out: *mut *mut LaminaSolution,
) -> LaminaStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut opts: SolverOptions = p.config.solver.clone();
        if max_iter > 0 {
            opts.max_iter = max_iter;
        }
        let sol = solve(&p.problem, &opts)?;
        let e = energy(&sol.u, &p.problem)?;
        *out = Box::into_raw(Box::new(LaminaSolution {
            u: sol.u.values,
            energy: e,
            report: sol.report,
        }));
        Ok(())
    })
}

/// # Safety
/// `s` is null or a handle from [`lamina_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lamina_solution_free(s: *mut LaminaSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Copies the nodal solution into `buf`, which must hold at least the
/// node count written to `len` on return.
///
/// # Safety
/// `s` is a live handle; `buf` is null or holds `*len` doubles; `len` is valid.
#[no_mangle]
pub unsafe extern "C" fn lamina_solution_values(s: *const LaminaSolution, buf: *mut f64, len: *mut usize) -> LaminaStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("solution"))?;
        let len = len.as_mut().ok_or_else(|| null("len"))?;
        let cap = std::mem::replace(len, s.u.len());
        if buf.is_null() {
            return Ok(());
        }
        if cap < s.u.len() {
            return Err(Failure(
                LaminaStatus::InvalidArgument,
                format!("buffer holds {cap} values, {} needed", s.u.len()),
            ));
        }
        std::ptr::copy_nonoverlapping(s.u.as_ptr(), buf, s.u.len());
        Ok(())
    })
}

/// Weighted total variation plus boundary misfit of the solution, with the
/// final duality gap and whether the solver converged.
///
/// # Safety
/// `s` is a live handle; the out pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn lamina_solution_summary(
    s: *const LaminaSolution,
    energy: *mut f64,
    gap: *mut f64,
    converged: *mut bool,
) -> LaminaStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("solution"))?;
        if energy.is_null() || gap.is_null() || converged.is_null() {
            return Err(null("output"));
        }
        (*energy, *gap, *converged) = (s.energy, s.report.final_gap, s.report.converged);
        Ok(())
    })
}

/// Runs a scenario file and its checks, writing artifacts under `out_dir`
/// (null for `out/<name>`).
///
/// # Safety
/// `path` and non-null `out_dir` are NUL-terminated strings; `passed` is valid.
#[no_mangle]
pub unsafe extern "C" fn lamina_verify(path: *const c_char, out_dir: *const c_char, passed: *mut bool) -> LaminaStatus {
    guard(|| {
        let passed = passed.as_mut().ok_or_else(|| null("passed"))?;
        let opts = RunOptions {
            out_dir: opt_path(out_dir, "out_dir")?,
            seed: None,
        };
        *passed = run_scenario(Path::new(text(path, "path")?), &opts)?.passed;
        Ok(())
    })
}
