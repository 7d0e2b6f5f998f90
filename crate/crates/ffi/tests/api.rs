use std::ffi::{CStr, CString};
use std::ptr;

use dulackit_ffi::*;

const EQUI1: &str = r#"{"mu": 1, "terms": [{"x": 2, "eps": 0, "c": 1}, {"x": 1, "eps": 1, "c": -1}]}"#;
const COUNTEREXAMPLE: &str = r#"{"mu": 2, "terms": [
    {"x": 3, "eps": 0, "c": 1}, {"x": 2, "eps": 1, "c": -2},
    {"x": 1, "eps": 2, "c": 1}, {"x": 1, "eps": 4, "c": 1}]}"#;

fn spec(json: &str) -> *mut DulacSpec {
    let c = CString::new(json).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { dulac_spec_from_json(c.as_ptr(), &mut out) }, DulacStatus::Ok);
    out
}

fn last_error() -> String {
    let p = dulac_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { dulac_string_free(p) };
    s
}

#[test]
fn euler_expansion_is_exact() {
    let s = spec(&format!(r#"{{"family": {EQUI1}, "U": [0, -1]}}"#));
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { dulac_expand(s, 0, 8, &mut h) }, DulacStatus::Ok);
    assert_eq!(unsafe { dulac_expansion_len(h) }, 9);
    let mut c = vec![0.0; 9];
    assert_eq!(unsafe { dulac_expansion_coeffs(h, c.as_mut_ptr(), c.len()) }, DulacStatus::Ok);
    let mut f = 1.0;
    for (j, cj) in c.iter().enumerate().skip(1) {
        if j > 1 {
            f *= (j - 1) as f64;
        }
        assert_eq!(*cj, -f);
    }
    let t = unsafe { CStr::from_ptr(dulac_expansion_coeff_text(h, 8)) };
    assert_eq!(t.to_str().unwrap(), "-5040");
    unsafe {
        dulac_expansion_free(h);
        dulac_spec_free(s);
    }
}

#[test]
fn index_selects_eps_lambda_pair() {
    let s = spec(&format!(r#"{{"family": {EQUI1}, "U": [1], "eps_grid": [0, "1/4"], "lambdas": [1, 2]}}"#));
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { dulac_expand(s, 4, 1, &mut h) }, DulacStatus::InvalidArgument);
    assert!(last_error().contains("out of range"));
    // eps = 0, lambda = 2: c0 = U(0) / lambda
    assert_eq!(unsafe { dulac_expand(s, 1, 1, &mut h) }, DulacStatus::Ok);
    let t = unsafe { CStr::from_ptr(dulac_expansion_coeff_text(h, 0)) };
    assert_eq!(t.to_str().unwrap(), "1/2");
    unsafe {
        dulac_expansion_free(h);
        dulac_spec_free(s);
    }
}

#[test]
fn counterexample_check_and_refusal() {
    let s = spec(&format!(r#"{{"family": {COUNTEREXAMPLE}, "U": [1], "eps": "1/100"}}"#));
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { dulac_check(s, &mut json) }, DulacStatus::HypothesisFailed);
    let v: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
    assert_eq!(v["plus"]["newton"]["h2"]["kind"], "fail");
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { dulac_expand(s, 0, 2, &mut h) }, DulacStatus::Refused);
    assert!(h.is_null());
    unsafe { dulac_spec_free(s) };
}

#[test]
fn verify_reports_pass() {
    let s = spec(&format!(
        r#"{{"family": {EQUI1}, "U": [0, -1], "ell": 2, "k": 1, "s_grid": {{"min": 1e-3, "max": 1e-1, "n": 11}}}}"#
    ));
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { dulac_verify(s, &mut json) }, DulacStatus::Ok);
    let v: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
    assert_eq!(v["pass"], true);
    unsafe { dulac_spec_free(s) };
}

#[test]
fn parse_errors_and_nulls() {
    let bad = CString::new("{\"family\": 3}").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { dulac_spec_from_json(bad.as_ptr(), &mut out) }, DulacStatus::ParseError);
    assert!(out.is_null());
    assert!(last_error().contains("invalid spec"));
    assert_eq!(unsafe { dulac_spec_from_json(ptr::null(), &mut out) }, DulacStatus::NullPointer);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { dulac_check(ptr::null(), &mut json) }, DulacStatus::NullPointer);
    assert_eq!(unsafe { dulac_expansion_len(ptr::null()) }, 0);
    assert!(unsafe { dulac_expansion_coeff_text(ptr::null(), 0) }.is_null());
    unsafe {
        dulac_spec_free(ptr::null_mut());
        dulac_expansion_free(ptr::null_mut());
        dulac_string_free(ptr::null_mut());
    }
}

#[test]
fn error_clears_on_success() {
    let mut g = 0.0;
    assert_eq!(unsafe { dulac_gamma(0.0, &mut g) }, DulacStatus::InvalidArgument);
    assert!(last_error().contains("pole"));
    assert_eq!(unsafe { dulac_gamma(0.5, &mut g) }, DulacStatus::Ok);
    assert!((g - std::f64::consts::PI.sqrt()).abs() < 1e-14);
    assert!(dulac_last_error().is_null());
}

#[test]
fn loud_c1_hat_near_limit() {
    let mut c = 0.0;
    for d in [-0.9, -0.75, -0.25, -0.1] {
        assert_eq!(unsafe { dulac_loud_c1_hat(d, 0.9999, &mut c) }, DulacStatus::Ok);
        let lim = 2.0 * (2.0 * d + 1.0) / (d + 1.0f64).powf(1.5);
        assert!((c - lim).abs() < 1e-2, "d = {d}");
    }
    assert_eq!(unsafe { dulac_loud_c1_hat(-1.5, 1.0, &mut c) }, DulacStatus::InvalidArgument);
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(dulac_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
