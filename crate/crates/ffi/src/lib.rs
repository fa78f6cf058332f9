//! C ABI over the core solver: opaque field handles, integer status codes,
//! and a thread-local last-error message.  The matching declarations live
//! in include/chess.h.
//!
//! Conventions: every function returns a `ChessStatus`; out-parameters are
//! written only on `CHESS_OK`; handles returned through out-parameters are
//! owned by the caller and released with `chess_field_free`.  All functions
//! are panic-safe (panics surface as `CHESS_STATUS_INTERNAL`).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use chess_core::error::Error;
use chess_core::grid::{Field, TorusGrid};
use chess_core::io::{read_field, write_field};
use chess_core::operator::{apply_op, cone_margin};
use chess_core::solver::{continuity_solve, SolveConfig};
use chess_core::{mms, props};

/// Opaque scalar field handle.
pub struct ChessField(Field);

/// Status codes; 0 is success.  Mirrors the core error taxonomy.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChessStatus {
    Ok = 0,
    Parameter = 1,
    Validation = 2,
    ConeViolation = 3,
    Compatibility = 4,
    Positivity = 5,
    StepFailure = 6,
    NonConvergence = 7,
    ContinuationFailure = 8,
    LinearSolve = 9,
    Io = 10,
    Json = 11,
    NullPointer = 12,
    InvalidUtf8 = 13,
    Internal = 14,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap());
}

fn status_of(err: &Error) -> ChessStatus {
    match err {
        Error::Parameter(_) => ChessStatus::Parameter,
        Error::Validation(_) => ChessStatus::Validation,
        Error::ConeViolation { .. } => ChessStatus::ConeViolation,
        Error::Compatibility(_) => ChessStatus::Compatibility,
        Error::Positivity { .. } => ChessStatus::Positivity,
        Error::StepFailure { .. } => ChessStatus::StepFailure,
        Error::NonConvergence { .. } => ChessStatus::NonConvergence,
        Error::ContinuationFailure { .. } => ChessStatus::ContinuationFailure,
        Error::LinearSolve { .. } => ChessStatus::LinearSolve,
        Error::Io(_) => ChessStatus::Io,
        Error::Json(_) => ChessStatus::Json,
    }
}

fn fail(err: Error) -> ChessStatus {
    set_error(&err.to_string());
    status_of(&err)
}

/// Run `body` behind a panic guard, translating panics to `Internal`.
fn guarded(body: impl FnOnce() -> ChessStatus) -> ChessStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(s) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&msg);
            ChessStatus::Internal
        }
    }
}

unsafe fn path_arg<'a>(ptr: *const c_char) -> Result<&'a Path, ChessStatus> {
    if ptr.is_null() {
        set_error("null path");
        return Err(ChessStatus::NullPointer);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(ChessStatus::InvalidUtf8)
        }
    }
}

/// Message for the most recent failure on this thread; valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn chess_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Allocate an all-zero field on an n-dimensional complex torus sampled at
/// `size` points per real axis.
#[no_mangle]
pub extern "C" fn chess_field_create(
    n: usize,
    size: usize,
    out: *mut *mut ChessField,
) -> ChessStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null out pointer");
            return ChessStatus::NullPointer;
        }
        match TorusGrid::new(n, size) {
            Ok(grid) => {
                let handle = Box::new(ChessField(Field::zeros(grid)));
                unsafe { *out = Box::into_raw(handle) };
                ChessStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Release a field handle.  Null is ignored.
#[no_mangle]
pub extern "C" fn chess_field_free(field: *mut ChessField) {
    if !field.is_null() {
        drop(unsafe { Box::from_raw(field) });
    }
}

/// Dimensions and sample count of a field.
#[no_mangle]
pub extern "C" fn chess_field_dims(
    field: *const ChessField,
    n: *mut usize,
    size: *mut usize,
    len: *mut usize,
) -> ChessStatus {
    guarded(|| {
        if field.is_null() || n.is_null() || size.is_null() || len.is_null() {
            set_error("null pointer");
            return ChessStatus::NullPointer;
        }
        let f = unsafe { &(*field).0 };
        unsafe {
            *n = f.grid.n;
            *size = f.grid.size;
            *len = f.data.len();
        }
        ChessStatus::Ok
    })
}

/// Mutable view of the row-major samples; length is the `len` reported by
/// `chess_field_dims`.  The pointer is valid until the handle is freed.
#[no_mangle]
pub extern "C" fn chess_field_data(field: *mut ChessField) -> *mut f64 {
    if field.is_null() {
        return std::ptr::null_mut();
    }
    unsafe { (*field).0.data.as_mut_ptr() }
}

/// Read a field from its JSON sidecar (payload path is derived).
#[no_mangle]
pub extern "C" fn chess_field_read(
    path: *const c_char,
    out: *mut *mut ChessField,
) -> ChessStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null out pointer");
            return ChessStatus::NullPointer;
        }
        let p = match unsafe { path_arg(path) } {
            Ok(p) => p,
            Err(s) => return s,
        };
        match read_field(p) {
            Ok(f) => {
                unsafe { *out = Box::into_raw(Box::new(ChessField(f))) };
                ChessStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Write a field (JSON sidecar plus binary payload).
#[no_mangle]
pub extern "C" fn chess_field_write(
    field: *const ChessField,
    path: *const c_char,
) -> ChessStatus {
    guarded(|| {
        if field.is_null() {
            set_error("null field");
            return ChessStatus::NullPointer;
        }
        let p = match unsafe { path_arg(path) } {
            Ok(p) => p,
            Err(s) => return s,
        };
        match write_field(unsafe { &(*field).0 }, p) {
            Ok(()) => ChessStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Manufactured solution pair: potential, forward image, and cone margin.
#[no_mangle]
pub extern "C" fn chess_mms_generate(
    n: usize,
    size: usize,
    k: usize,
    amp: f64,
    seed: u64,
    phi_out: *mut *mut ChessField,
    rhs_out: *mut *mut ChessField,
    margin_out: *mut f64,
) -> ChessStatus {
    guarded(|| {
        if phi_out.is_null() || rhs_out.is_null() || margin_out.is_null() {
            set_error("null out pointer");
            return ChessStatus::NullPointer;
        }
        let grid = match TorusGrid::new(n, size) {
            Ok(g) => g,
            Err(e) => return fail(e),
        };
        match mms::generate(grid, k, amp, seed) {
            Ok((phi, f, margin)) => {
                unsafe {
                    *phi_out = Box::into_raw(Box::new(ChessField(phi)));
                    *rhs_out = Box::into_raw(Box::new(ChessField(f)));
                    *margin_out = margin;
                }
                ChessStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Pointwise S_k(I + Hessian(phi)).
#[no_mangle]
pub extern "C" fn chess_apply_op(
    field: *const ChessField,
    k: usize,
    out: *mut *mut ChessField,
) -> ChessStatus {
    guarded(|| {
        if field.is_null() || out.is_null() {
            set_error("null pointer");
            return ChessStatus::NullPointer;
        }
        let f = unsafe { &(*field).0 };
        let result = apply_op(f, k);
        unsafe { *out = Box::into_raw(Box::new(ChessField(result))) };
        ChessStatus::Ok
    })
}

/// Minimum over grid points of min_{j<=k} S_j(I + Hessian(phi)).
#[no_mangle]
pub extern "C" fn chess_cone_margin(
    field: *const ChessField,
    k: usize,
    out: *mut f64,
) -> ChessStatus {
    guarded(|| {
        if field.is_null() || out.is_null() {
            set_error("null pointer");
            return ChessStatus::NullPointer;
        }
        let f = unsafe { &(*field).0 };
        unsafe { *out = cone_margin(f, k) };
        ChessStatus::Ok
    })
}

/// Continuity-method solve of S_k(I + Hessian(phi)) = rhs.  Pass tol <= 0
/// or max_newton == 0 for the defaults.  On success writes the mean-zero
/// solution and its final sup log-residual.
#[no_mangle]
pub extern "C" fn chess_solve(
    rhs: *const ChessField,
    k: usize,
    tol: f64,
    max_newton: usize,
    seed: u64,
    out: *mut *mut ChessField,
    residual_out: *mut f64,
) -> ChessStatus {
    guarded(|| {
        if rhs.is_null() || out.is_null() || residual_out.is_null() {
            set_error("null pointer");
            return ChessStatus::NullPointer;
        }
        let f = unsafe { &(*rhs).0 };
        let mut cfg = SolveConfig::default();
        if tol > 0.0 {
            cfg.newton_tol = tol;
        }
        if max_newton > 0 {
            cfg.max_newton = max_newton;
        }
        cfg.seed = seed;
        match continuity_solve(f, k, &cfg) {
            Ok((phi, trace)) => {
                let res = trace.records.last().map(|r| r.residual_sup).unwrap_or(0.0);
                unsafe {
                    *out = Box::into_raw(Box::new(ChessField(phi)));
                    *residual_out = res;
                }
                ChessStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Run the randomized inequality suites; returns Ok when every suite
/// passes, Validation otherwise.  `worst_out` receives the most negative
/// relative slack seen (0 when no samples were drawn).
#[no_mangle]
pub extern "C" fn chess_run_props(
    n: usize,
    k: usize,
    samples: usize,
    seed: u64,
    worst_out: *mut f64,
) -> ChessStatus {
    guarded(|| {
        if worst_out.is_null() {
            set_error("null out pointer");
            return ChessStatus::NullPointer;
        }
        match props::run_suites(n, k, samples, seed) {
            Ok(report) => {
                let worst = report
                    .values()
                    .filter_map(|s| s.worst_slack)
                    .fold(0.0_f64, f64::min);
                unsafe { *worst_out = worst };
                if report.values().all(|s| s.pass) {
                    ChessStatus::Ok
                } else {
                    set_error("at least one property suite failed");
                    ChessStatus::Validation
                }
            }
            Err(e) => fail(e),
        }
    })
}
