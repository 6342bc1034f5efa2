//! C ABI over the `plse` estimation library.
//!
//! All objects are opaque heap handles created by a `plse_*_new`-style call
//! and released by the matching `plse_*_free`. Every function returns a
//! [`PlseStatus`]; on failure a message is available from
//! [`plse_last_error_message`] on the calling thread. Matrices are passed in
//! column-major order.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::{DMatrix, DVector};
use plse::prox::sorted_prox;
use plse::{fit_lca, FitResult, PenaltyConfig, PenaltySpec, PlseError, Problem, SolverConfig};

/// Status codes returned by every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlseStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Json = 4,
    Singular = 5,
    Divergence = 6,
    Panic = 7,
}

/// Design matrix and response.
pub struct PlseProblem {
    inner: Problem,
}

/// Penalty resolved for a fixed problem size.
pub struct PlsePenalty {
    inner: PenaltySpec,
}

/// Result of a fit.
pub struct PlseFit {
    inner: FitResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(PlseStatus, String);

impl From<PlseError> for Failure {
    fn from(e: PlseError) -> Self {
        let code = match e {
            PlseError::DimensionMismatch { .. } => PlseStatus::DimensionMismatch,
            PlseError::Parse(_) => PlseStatus::Json,
            PlseError::Singular(_) => PlseStatus::Singular,
            PlseError::Divergence { .. } => PlseStatus::Divergence,
            _ => PlseStatus::InvalidArgument,
        };
        Failure(code, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(PlseStatus::NullPointer, format!("null pointer: {what}"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PlseStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PlseStatus::Ok,
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            PlseStatus::Panic
        }
    }
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn text<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|e| Failure(PlseStatus::InvalidArgument, format!("{what}: {e}")))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message describing the last failure on this thread, or NULL if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn plse_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a problem from an `n × p` column-major matrix `x` and a response of
/// length `n`. Columns must satisfy `‖X_j‖² = n`.
///
/// # Safety
/// `x` must point to `n * p` doubles, `y` to `n` doubles, `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plse_problem_new(
    x: *const f64,
    n: usize,
    p: usize,
    y: *const f64,
    out: *mut *mut PlseProblem,
) -> PlseStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n
            .checked_mul(p)
            .ok_or_else(|| Failure(PlseStatus::InvalidArgument, "n * p overflows".into()))?;
        let xs = slice(x, len, "x")?;
        let ys = slice(y, n, "y")?;
        let inner = Problem::new(DMatrix::from_column_slice(n, p, xs), DVector::from_column_slice(ys))?;
        store(out, PlseProblem { inner });
        Ok(())
    })
}

/// # Safety
/// `problem` must be NULL or a handle from [`plse_problem_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn plse_problem_free(problem: *mut PlseProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Parses a penalty JSON document and resolves its levels for size `(n, p)`.
///
/// # Safety
/// `json` must be a NUL-terminated string, `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plse_penalty_from_json(
    json: *const c_char,
    n: usize,
    p: usize,
    out: *mut *mut PlsePenalty,
) -> PlseStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = PenaltyConfig::from_json(text(json, "json")?)?.resolve(n, p)?;
        store(out, PlsePenalty { inner });
        Ok(())
    })
}

/// # Safety
/// `penalty` must be NULL or a handle from [`plse_penalty_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn plse_penalty_free(penalty: *mut PlsePenalty) {
    if !penalty.is_null() {
        drop(Box::from_raw(penalty));
    }
}

/// Fits the penalized estimator. `solver_json` may be NULL for defaults.
/// A fit that hits its iteration limit still succeeds; query
/// [`plse_fit_converged`].
///
/// # Safety
/// Handles must be live, `solver_json` NULL or NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plse_fit(
    problem: *const PlseProblem,
    penalty: *const PlsePenalty,
    solver_json: *const c_char,
    out: *mut *mut PlseFit,
) -> PlseStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let pb = handle(problem, "problem")?;
        let pen = handle(penalty, "penalty")?;
        let config = if solver_json.is_null() {
            SolverConfig::default()
        } else {
            SolverConfig::from_json(text(solver_json, "solver_json")?)?
        };
        let inner = fit_lca(&pb.inner, &pen.inner, &config, None)?;
        store(out, PlseFit { inner });
        Ok(())
    })
}

/// # Safety
/// `fit` must be NULL or a handle from [`plse_fit`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn plse_fit_free(fit: *mut PlseFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Writes the number of coefficients to `out`.
///
/// # Safety
/// `fit` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plse_fit_len(fit: *const PlseFit, out: *mut usize) -> PlseStatus {
    guard(|| {
        let f = handle(fit, "fit")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = f.inner.beta_hat.len();
        Ok(())
    })
}

/// Copies the coefficient vector into `out`, which must hold exactly `len` doubles.
///
/// # Safety
/// `fit` must be live and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn plse_fit_beta(fit: *const PlseFit, out: *mut f64, len: usize) -> PlseStatus {
    guard(|| {
        let f = handle(fit, "fit")?;
        let b = &f.inner.beta_hat;
        if len != b.len() {
            return Err(PlseError::DimensionMismatch {
                what: "output buffer",
                expected: b.len(),
                got: len,
            }
            .into());
        }
        if len > 0 {
            if out.is_null() {
                return Err(null("out"));
            }
            std::slice::from_raw_parts_mut(out, len).copy_from_slice(b);
        }
        Ok(())
    })
}

/// Writes the sup-norm of the stationarity residual to `out`.
///
/// # Safety
/// `fit` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plse_fit_kkt_inf(fit: *const PlseFit, out: *mut f64) -> PlseStatus {
    guard(|| {
        let f = handle(fit, "fit")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = f.inner.kkt_residual_inf;
        Ok(())
    })
}

/// Writes whether the solver met its tolerances to `out`.
///
/// # Safety
/// `fit` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plse_fit_converged(fit: *const PlseFit, out: *mut bool) -> PlseStatus {
    guard(|| {
        let f = handle(fit, "fit")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = f.inner.converged;
        Ok(())
    })
}

/// Serializes the fit to JSON. Release the string with [`plse_string_free`].
///
/// # Safety
/// `fit` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plse_fit_to_json(fit: *const PlseFit, out: *mut *mut c_char) -> PlseStatus {
    guard(|| {
        let f = handle(fit, "fit")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = serde_json::to_string(&f.inner).map_err(|e| Failure(PlseStatus::Json, e.to_string()))?;
        *out = CString::new(s)
            .map_err(|e| Failure(PlseStatus::Json, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn plse_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Proximal map of `step · ρ#` convexified by `kappa`. Pass NaN for `kappa`
/// to use the family's own concavity bound. `x` and `out` hold `len` doubles
/// and may alias.
///
/// # Safety
/// `penalty` must be live; `x` readable and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn plse_sorted_prox(
    penalty: *const PlsePenalty,
    x: *const f64,
    len: usize,
    step: f64,
    kappa: f64,
    out: *mut f64,
) -> PlseStatus {
    guard(|| {
        let pen = handle(penalty, "penalty")?;
        let input = slice(x, len, "x")?.to_vec();
        let kappa = if kappa.is_nan() {
            pen.inner.family().kappa_bar()
        } else {
            kappa
        };
        let b = sorted_prox(&input, &pen.inner, step, kappa)?;
        if len > 0 {
            if out.is_null() {
                return Err(null("out"));
            }
            std::slice::from_raw_parts_mut(out, len).copy_from_slice(&b);
        }
        Ok(())
    })
}
