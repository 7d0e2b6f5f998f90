//! C interface to `dulackit`.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free`. Every fallible call returns a [`DulacStatus`]; after a
//! non-`OK` status, [`dulac_last_error`] describes the failure on the
//! calling thread. Strings returned through out-pointers are released with
//! [`dulac_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dulackit::cli::{self, CliError, ProblemSpec};
use dulackit::expansion::coefficients;
use dulackit::loud::{self, LoudParams};
use dulackit::scalar::Rational;

/// Status codes. The first five match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DulacStatus {
    Ok = 0,
    VerifyFailed = 1,
    HypothesisFailed = 2,
    ParseError = 3,
    Refused = 4,
    NullPointer = 5,
    InvalidArgument = 6,
    BufferTooSmall = 7,
    ComputationFailed = 8,
    Panic = 9,
}

/// A parsed problem spec.
pub struct DulacSpec {
    inner: ProblemSpec,
}

/// Coefficients `c_0..c_ell` of one expansion.
pub struct DulacExpansion {
    values: Vec<f64>,
    text: Vec<CString>,
    exact: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: DulacStatus, msg: impl Into<String>) -> DulacStatus {
    set_error(msg);
    status
}

fn from_cli(e: CliError) -> DulacStatus {
    let status = match e.exit_code() {
        cli::EXIT_HYPOTHESIS => DulacStatus::HypothesisFailed,
        cli::EXIT_PARSE => DulacStatus::ParseError,
        cli::EXIT_REFUSED => DulacStatus::Refused,
        _ => DulacStatus::ComputationFailed,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> DulacStatus) -> DulacStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(DulacStatus::Panic, msg)
        }
    }
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> DulacStatus {
    match CString::new(s) {
        Ok(c) => {
            *out = c.into_raw();
            DulacStatus::Ok
        }
        Err(_) => fail(DulacStatus::ComputationFailed, "string contains a NUL byte"),
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dulac_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failure on this thread, or NULL. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn dulac_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` is NULL or was returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dulac_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a JSON problem spec.
///
/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dulac_spec_from_json(json: *const c_char, out: *mut *mut DulacSpec) -> DulacStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(DulacStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        let Ok(text) = CStr::from_ptr(json).to_str() else {
            return fail(DulacStatus::ParseError, "spec is not valid UTF-8");
        };
        match ProblemSpec::from_json(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(DulacSpec { inner }));
                DulacStatus::Ok
            }
            Err(e) => from_cli(e),
        }
    })
}

/// # Safety
/// `spec` is NULL or a live handle from [`dulac_spec_from_json`].
#[no_mangle]
pub unsafe extern "C" fn dulac_spec_free(spec: *mut DulacSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

unsafe fn json_command(
    spec: *const DulacSpec,
    out_json: *mut *mut c_char,
    cmd: impl FnOnce(&ProblemSpec) -> Result<(serde_json::Value, bool), CliError>,
    fail_status: DulacStatus,
) -> DulacStatus {
    guard(|| {
        if spec.is_null() || out_json.is_null() {
            return fail(DulacStatus::NullPointer, "null argument");
        }
        *out_json = ptr::null_mut();
        match cmd(&(*spec).inner) {
            Ok((v, pass)) => {
                let s = write_string(out_json, pretty(&v));
                if s != DulacStatus::Ok {
                    return s;
                }
                if pass {
                    DulacStatus::Ok
                } else {
                    fail(fail_status, "verdict failed; see the report")
                }
            }
            Err(e) => from_cli(e),
        }
    })
}

/// Hypothesis report on both sides of `eps = 0`. The JSON is written even
/// when a hypothesis fails, in which case the status is `HYPOTHESIS_FAILED`.
///
/// # Safety
/// `spec` is a live handle; `out_json` is writable.
#[no_mangle]
pub unsafe extern "C" fn dulac_check(spec: *const DulacSpec, out_json: *mut *mut c_char) -> DulacStatus {
    json_command(spec, out_json, cli::cmd_check, DulacStatus::HypothesisFailed)
}

/// Flatness verification report. `VERIFY_FAILED` when a verdict fails.
///
/// # Safety
/// `spec` is a live handle; `out_json` is writable.
#[no_mangle]
pub unsafe extern "C" fn dulac_verify(spec: *const DulacSpec, out_json: *mut *mut c_char) -> DulacStatus {
    json_command(spec, out_json, |s| cli::cmd_verify(s).map(|(v, r)| (v, r.verdict)), DulacStatus::VerifyFailed)
}

/// Loud family report. `VERIFY_FAILED` when a verdict fails.
///
/// # Safety
/// `spec` is a live handle; `out_json` is writable.
#[no_mangle]
pub unsafe extern "C" fn dulac_loud(spec: *const DulacSpec, out_json: *mut *mut c_char) -> DulacStatus {
    json_command(
        spec,
        out_json,
        |s| {
            cli::cmd_loud(s).map(|(v, _)| {
                let pass = v["pass"].as_bool().unwrap_or(false);
                (v, pass)
            })
        },
        DulacStatus::VerifyFailed,
    )
}

/// Expansion of the `index`-th `(eps, lambda)` pair of an orbit or
/// dulac_map spec, eps-major, up to order `ell`. `REFUSED` when the
/// hypotheses fail on that side.
///
/// # Safety
/// `spec` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dulac_expand(
    spec: *const DulacSpec,
    index: usize,
    ell: usize,
    out: *mut *mut DulacExpansion,
) -> DulacStatus {
    guard(|| {
        if spec.is_null() || out.is_null() {
            return fail(DulacStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        let p = &(*spec).inner;
        let list = match p.unfoldings() {
            Ok(l) => l,
            Err(e) => return from_cli(e),
        };
        let Some(us) = list.get(index) else {
            return fail(DulacStatus::InvalidArgument, format!("index {index} out of range ({} pairs)", list.len()));
        };
        if let Err(e) = cli::require_hypotheses(&us.family, &us.eps_exact()) {
            return from_cli(e);
        }
        let exact = us.branch.is_exact();
        let res = if exact {
            coefficients::<Rational>(us, ell).map(|r| (serde_json::to_value(&r), r.to_f64().coeffs))
        } else {
            coefficients::<f64>(us, ell).map(|r| (serde_json::to_value(&r), r.coeffs))
        };
        match res {
            Ok((json, values)) => {
                let json = json.expect("serializable");
                let text = json["coeffs"]
                    .as_array()
                    .expect("coefficient array")
                    .iter()
                    .map(|c| CString::new(c.as_str().unwrap_or_default()).expect("no NUL"))
                    .collect();
                *out = Box::into_raw(Box::new(DulacExpansion { values, text, exact }));
                DulacStatus::Ok
            }
            Err(e) => from_cli(e.into()),
        }
    })
}

/// Number of coefficients, `ell + 1`; 0 for NULL.
///
/// # Safety
/// `h` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dulac_expansion_len(h: *const DulacExpansion) -> usize {
    h.as_ref().map_or(0, |h| h.values.len())
}

/// 1 when the coefficients were computed in exact arithmetic.
///
/// # Safety
/// `h` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dulac_expansion_is_exact(h: *const DulacExpansion) -> i32 {
    h.as_ref().map_or(0, |h| h.exact as i32)
}

/// Copies the coefficients as doubles into `out[0..cap]`.
///
/// # Safety
/// `h` is a live handle; `out` has room for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn dulac_expansion_coeffs(h: *const DulacExpansion, out: *mut f64, cap: usize) -> DulacStatus {
    guard(|| {
        let Some(h) = h.as_ref() else {
            return fail(DulacStatus::NullPointer, "null handle");
        };
        if out.is_null() {
            return fail(DulacStatus::NullPointer, "null buffer");
        }
        if cap < h.values.len() {
            return fail(DulacStatus::BufferTooSmall, format!("need {} doubles", h.values.len()));
        }
        ptr::copy_nonoverlapping(h.values.as_ptr(), out, h.values.len());
        DulacStatus::Ok
    })
}

/// Coefficient `j` as text, e.g. `"-3/4"`; owned by the handle.
/// NULL when `j` is out of range.
///
/// # Safety
/// `h` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dulac_expansion_coeff_text(h: *const DulacExpansion, j: usize) -> *const c_char {
    h.as_ref().and_then(|h| h.text.get(j)).map_or(ptr::null(), |c| c.as_ptr())
}

/// # Safety
/// `h` is NULL or a live handle from [`dulac_expand`].
#[no_mangle]
pub unsafe extern "C" fn dulac_expansion_free(h: *mut DulacExpansion) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Gamma function in double precision.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dulac_gamma(x: f64, out: *mut f64) -> DulacStatus {
    guard(|| {
        if out.is_null() {
            return fail(DulacStatus::NullPointer, "null output");
        }
        match loud::gamma(x) {
            Ok(v) => {
                *out = v;
                DulacStatus::Ok
            }
            Err(e) => fail(DulacStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// First period coefficient of the Loud family at `(D, F)`.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dulac_loud_c1_hat(d: f64, f: f64, out: *mut f64) -> DulacStatus {
    guard(|| {
        if out.is_null() {
            return fail(DulacStatus::NullPointer, "null output");
        }
        match LoudParams::new(d, f).and_then(|p| loud::c1_hat(&p)) {
            Ok(v) => {
                *out = v;
                DulacStatus::Ok
            }
            Err(e) => fail(DulacStatus::InvalidArgument, e.to_string()),
        }
    })
}
