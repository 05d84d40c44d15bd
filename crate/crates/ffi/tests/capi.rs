//! Exercises the C ABI from Rust: handle lifecycle, status codes, string
//! ownership, and the JSON/CSV payloads.

use projconv_ffi::*;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

fn take_string(ptr: *mut c_char) -> String {
    assert!(!ptr.is_null());
    let text = unsafe { CStr::from_ptr(ptr) }.to_str().unwrap().to_string();
    unsafe { projconv_string_free(ptr) };
    text
}

fn last_error() -> String {
    let ptr = projconv_last_error();
    if ptr.is_null() {
        return String::new();
    }
    take_string(ptr)
}

fn parse(json: &str) -> *mut ProjconvSystem {
    let c = CString::new(json).unwrap();
    let mut handle: *mut ProjconvSystem = ptr::null_mut();
    let status = unsafe { projconv_system_parse(c.as_ptr(), &mut handle) };
    assert!(matches!(status, ProjconvStatus::Ok), "{}", last_error());
    assert!(!handle.is_null());
    handle
}

const DIVERGING: &str = r#"{"matrices": [[[0, 1], [2, 0]]], "vector": [1, 1]}"#;
const CONVERGING: &str = r#"{"matrices": [[[1, 1], [0, 1]], [[1, 0], [1, 1]]], "vector": [1, 1]}"#;

#[test]
fn parse_decide_free_roundtrip() {
    let handle = parse(DIVERGING);
    assert_eq!(unsafe { projconv_system_alphabet_len(handle) }, 1);
    let mut out: *mut c_char = ptr::null_mut();
    let status = unsafe { projconv_decide(handle, &mut out) };
    assert!(matches!(status, ProjconvStatus::Ok));
    let text = take_string(out);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["converges_all"], false);
    unsafe { projconv_system_free(handle) };
}

#[test]
fn parse_error_reports_path() {
    let c = CString::new(r#"{"matrices": [[[1, "1/0"], [0, 1]]], "vector": [1, 1]}"#).unwrap();
    let mut handle: *mut ProjconvSystem = ptr::null_mut();
    let status = unsafe { projconv_system_parse(c.as_ptr(), &mut handle) };
    assert!(matches!(status, ProjconvStatus::ParseError));
    assert!(handle.is_null());
    assert!(last_error().contains("$.matrices[0][0][1]"));
}

#[test]
fn null_arguments_are_rejected() {
    let mut handle: *mut ProjconvSystem = ptr::null_mut();
    let status = unsafe { projconv_system_parse(ptr::null(), &mut handle) };
    assert!(matches!(status, ProjconvStatus::InvalidArgument));
    unsafe { projconv_system_free(ptr::null_mut()) };
    unsafe { projconv_string_free(ptr::null_mut()) };
}

#[test]
fn simulate_csv_contract() {
    let handle = parse(CONVERGING);
    let omega = CString::new("01").unwrap();
    let mut out: *mut c_char = ptr::null_mut();
    let status = unsafe { projconv_simulate_csv(handle, omega.as_ptr(), 2, true, &mut out) };
    assert!(matches!(status, ProjconvStatus::Ok));
    let text = take_string(out);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("n,symbol,ratio_num"));
    assert_eq!(
        lines.next().unwrap(),
        "1,0,1,2,0.5,0/1,1/1,1/1,1/1,,,,0,1,plus"
    );
    unsafe { projconv_system_free(handle) };
}

#[test]
fn simulate_excluded_status() {
    let handle = parse(r#"{"matrices": [[[1, 0], [0, 0]]], "vector": [0, 5]}"#);
    let omega = CString::new("cycle:0").unwrap();
    let mut out: *mut c_char = ptr::null_mut();
    let status = unsafe { projconv_simulate_csv(handle, omega.as_ptr(), 5, true, &mut out) };
    assert!(matches!(status, ProjconvStatus::Excluded));
    let text = take_string(out);
    assert!(text.lines().last().unwrap().ends_with(",excluded"));
    unsafe { projconv_system_free(handle) };
}

#[test]
fn forge_certificate_json() {
    let handle = parse(DIVERGING);
    let delta = CString::new("1/1000").unwrap();
    let mut out: *mut c_char = ptr::null_mut();
    let status = unsafe { projconv_forge(handle, 200, delta.as_ptr(), &mut out) };
    assert!(matches!(status, ProjconvStatus::Ok), "{}", last_error());
    let v: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
    assert_eq!(v["case"]["tag"], "const_antidiag");
    assert_eq!(v["separation"]["exact"], "1/6");
    unsafe { projconv_system_free(handle) };
}

#[test]
fn forge_not_applicable() {
    let handle = parse(CONVERGING);
    let delta = CString::new("0.001").unwrap();
    let mut out: *mut c_char = ptr::null_mut();
    let status = unsafe { projconv_forge(handle, 200, delta.as_ptr(), &mut out) };
    assert!(matches!(status, ProjconvStatus::NotApplicable));
    assert!(!last_error().is_empty());
    unsafe { projconv_system_free(handle) };
}

#[test]
fn verify_reports_clean_run() {
    let handle = parse(CONVERGING);
    let mut out: *mut c_char = ptr::null_mut();
    let status = unsafe { projconv_verify(handle, 6, 200_000, &mut out) };
    assert!(matches!(status, ProjconvStatus::Ok), "{}", last_error());
    let v: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
    assert_eq!(v["paths"], 64);
    assert_eq!(v["violations"].as_array().unwrap().len(), 0);
    unsafe { projconv_system_free(handle) };
}

#[test]
fn series_probe_on_forged_sequence() {
    let handle = parse(r#"{"matrices": [[[3, 0], [0, 1]], [[0, 1], [1, 1]]], "vector": [1, 1]}"#);
    let omega = CString::new("forge").unwrap();
    let mut out: *mut c_char = ptr::null_mut();
    let status = unsafe { projconv_series_probe(handle, omega.as_ptr(), 2000, &mut out) };
    assert!(matches!(status, ProjconvStatus::Ok), "{}", last_error());
    let v: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
    assert_eq!(v["overlap_count"], 0);
    assert!(v["interval_width_final"].as_f64().unwrap() > 0.0);
    unsafe { projconv_system_free(handle) };
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(projconv_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
