//! C ABI over `lvn_darboux`.
//!
//! Objects are opaque handles created by `lvn_*_new`/`lvn_scenario_*` and
//! released with the matching `*_free`. Every fallible call returns an
//! [`LvnStatus`]; the message of the most recent failure on the calling
//! thread is available from [`lvn_last_error`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use lvn_darboux::error::Error;
use lvn_darboux::evolution::EvolutionContext;
use lvn_darboux::scenario::{self, Format, Mode, RunOptions, ScenarioSpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LvnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Validation = 3,
    Numerical = 4,
    Io = 5,
    Parse = 6,
    UnknownScenario = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LvnMode {
    Evolve = 0,
    Verify = 1,
    Subsystem = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LvnFormat {
    Csv = 0,
    Json = 1,
}

/// Opaque scenario handle.
pub struct LvnScenario {
    spec: ScenarioSpec,
}

/// Opaque handle to a prepared closed-form solution.
pub struct LvnSolution {
    ctx: EvolutionContext,
    dim: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(err: &Error) -> LvnStatus {
    match err {
        Error::DimensionMismatch(_) | Error::InvalidArgument(_) | Error::Unsupported(_) => {
            LvnStatus::InvalidArgument
        }
        Error::Validation(_) | Error::ScenarioInvalid(_) | Error::NotHermitian { .. } => {
            LvnStatus::Validation
        }
        Error::Parse(_) => LvnStatus::Parse,
        Error::UnknownScenario(_) => LvnStatus::UnknownScenario,
        Error::Io(_) | Error::Csv(_) => LvnStatus::Io,
        _ => LvnStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (LvnStatus, String)>) -> LvnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            LvnStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LvnStatus::Panic
        }
    }
}

fn lift<T>(r: lvn_darboux::error::Result<T>) -> Result<T, (LvnStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (LvnStatus, String) {
    (LvnStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (LvnStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        (
            LvnStatus::InvalidArgument,
            format!("{what} is not valid UTF-8"),
        )
    })
}

unsafe fn emit<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lvn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn lvn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Looks up a builtin scenario (`ex51` ... `ex56`).
#[no_mangle]
pub unsafe extern "C" fn lvn_scenario_builtin(
    name: *const c_char,
    out: *mut *mut LvnScenario,
) -> LvnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = lift(scenario::builtin(read_str(name, "name")?))?;
        emit(out, LvnScenario { spec });
        Ok(())
    })
}

/// Reads and validates a scenario file.
#[no_mangle]
pub unsafe extern "C" fn lvn_scenario_load(
    path: *const c_char,
    out: *mut *mut LvnScenario,
) -> LvnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = lift(scenario::load_scenario(read_str(path, "path")?))?;
        emit(out, LvnScenario { spec });
        Ok(())
    })
}

/// Parses and validates a scenario from JSON text.
#[no_mangle]
pub unsafe extern "C" fn lvn_scenario_from_json(
    json: *const c_char,
    out: *mut *mut LvnScenario,
) -> LvnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = lift(ScenarioSpec::from_json(read_str(json, "json")?))?;
        lift(spec.validate())?;
        emit(out, LvnScenario { spec });
        Ok(())
    })
}

/// Matrix dimension of the scenario.
#[no_mangle]
pub unsafe extern "C" fn lvn_scenario_dim(
    scenario: *const LvnScenario,
    out_dim: *mut usize,
) -> LvnStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        if out_dim.is_null() {
            return Err(null("out_dim"));
        }
        *out_dim = s.spec.h.nrows();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn lvn_scenario_free(scenario: *mut LvnScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Prepares the closed-form solution of a scenario.
#[no_mangle]
pub unsafe extern "C" fn lvn_solution_new(
    scenario: *const LvnScenario,
    out: *mut *mut LvnSolution,
) -> LvnStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let ctx = lift(s.spec.context())?;
        emit(
            out,
            LvnSolution {
                ctx,
                dim: s.spec.h.nrows(),
            },
        );
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn lvn_solution_free(solution: *mut LvnSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

#[no_mangle]
pub unsafe extern "C" fn lvn_solution_dim(
    solution: *const LvnSolution,
    out_dim: *mut usize,
) -> LvnStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if out_dim.is_null() {
            return Err(null("out_dim"));
        }
        *out_dim = s.dim;
        Ok(())
    })
}

/// Writes the solution at `t` into `out` as row-major interleaved
/// `(re, im)` pairs. `out_len` counts doubles and must be at least `2 n^2`.
#[no_mangle]
pub unsafe extern "C" fn lvn_solution_evaluate(
    solution: *const LvnSolution,
    t: f64,
    out: *mut f64,
    out_len: usize,
) -> LvnStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let need = 2 * s.dim * s.dim;
        if out_len < need {
            return Err((
                LvnStatus::BufferTooSmall,
                format!("need {need} doubles, got {out_len}"),
            ));
        }
        let m = lift(s.ctx.evaluate(t))?;
        let buf = std::slice::from_raw_parts_mut(out, need);
        for i in 0..s.dim {
            for j in 0..s.dim {
                let z = m[(i, j)];
                buf[2 * (i * s.dim + j)] = z.re;
                buf[2 * (i * s.dim + j) + 1] = z.im;
            }
        }
        Ok(())
    })
}

/// `F(t)` of the first transformation; may be `inf` where only its logarithm is finite.
#[no_mangle]
pub unsafe extern "C" fn lvn_solution_f(
    solution: *const LvnSolution,
    t: f64,
    out: *mut f64,
) -> LvnStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lift(s.ctx.f_a(t))?.re;
        Ok(())
    })
}

/// `ln F(t)`, finite wherever `F` is.
#[no_mangle]
pub unsafe extern "C" fn lvn_solution_ln_f(
    solution: *const LvnSolution,
    t: f64,
    out: *mut f64,
) -> LvnStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lift(s.ctx.ln_f_a(t))?;
        Ok(())
    })
}

/// Runs a scenario on its grid and writes the output atomically to `path`.
/// `out_passed` (optional) receives 0 when verify mode found a tolerance
/// failure and 1 otherwise.
#[no_mangle]
pub unsafe extern "C" fn lvn_run_to_file(
    scenario: *const LvnScenario,
    mode: LvnMode,
    format: LvnFormat,
    path: *const c_char,
    out_passed: *mut c_int,
) -> LvnStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        let path = read_str(path, "path")?;
        let mode = match mode {
            LvnMode::Evolve => Mode::Evolve,
            LvnMode::Verify => Mode::Verify,
            LvnMode::Subsystem => Mode::Subsystem,
        };
        let format = match format {
            LvnFormat::Csv => Format::Csv,
            LvnFormat::Json => Format::Json,
        };
        let output = lift(scenario::run(&s.spec, mode, &RunOptions::default()))?;
        let bytes = lift(scenario::render(&output, format))?;
        lift(scenario::write_atomic(path, &bytes))?;
        if !out_passed.is_null() {
            *out_passed = c_int::from(output.passed());
        }
        Ok(())
    })
}
