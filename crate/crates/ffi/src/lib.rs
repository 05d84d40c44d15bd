//! C ABI over the projconv core: opaque system handles, status codes
//! aligned with the command-line exit codes, and JSON/CSV string outputs.
//!
//! Ownership rules: every `char*` returned through an out-parameter is
//! allocated by this library and must be released with
//! [`projconv_string_free`]; handles are released with
//! [`projconv_system_free`]. All functions are panic-safe at the boundary.

use projconv::decider::decide;
use projconv::engine::{run, series_criterion_probe, EngineOptions, Mode, TraceStatus};
use projconv::forge::{self, ForgeConfig, ForgeError};
use projconv::harness::{exhaustive_check, HarnessError};
use projconv::io::{parse_system_json, write_trace_csv};
use projconv::omega::OmegaSpec;
use projconv::scalar::Scalar;
use projconv::MatrixSystem;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Status codes; nonzero values match the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum ProjconvStatus {
    Ok = 0,
    Error = 1,
    ParseError = 2,
    Excluded = 3,
    NotApplicable = 4,
    CertificationFailed = 5,
    InvalidArgument = 7,
}

/// Opaque handle to a parsed matrix system.
pub struct ProjconvSystem {
    inner: MatrixSystem,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(message).ok();
    });
}

fn clear_error() {
    LAST_ERROR.with(|slot| slot.borrow_mut().take());
}

fn out_string(out: *mut *mut c_char, text: String) -> ProjconvStatus {
    match CString::new(text) {
        Ok(s) => {
            unsafe { *out = s.into_raw() };
            ProjconvStatus::Ok
        }
        Err(_) => {
            set_error("output contained an interior NUL byte");
            ProjconvStatus::Error
        }
    }
}

fn guard<F: FnOnce() -> ProjconvStatus>(body: F) -> ProjconvStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            ProjconvStatus::Error
        }
    }
}

/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn projconv_system_parse(
    json: *const c_char,
    out: *mut *mut ProjconvSystem,
) -> ProjconvStatus {
    guard(|| {
        clear_error();
        if json.is_null() || out.is_null() {
            set_error("null argument");
            return ProjconvStatus::InvalidArgument;
        }
        let text = match unsafe { CStr::from_ptr(json) }.to_str() {
            Ok(t) => t,
            Err(_) => {
                set_error("input is not valid UTF-8");
                return ProjconvStatus::ParseError;
            }
        };
        match parse_system_json(text) {
            Ok(system) => {
                let handle = Box::new(ProjconvSystem { inner: system });
                unsafe { *out = Box::into_raw(handle) };
                ProjconvStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                ProjconvStatus::ParseError
            }
        }
    })
}

/// # Safety
/// `system` must be a pointer returned by `projconv_system_parse`, not yet
/// freed, or null.
#[no_mangle]
pub unsafe extern "C" fn projconv_system_free(system: *mut ProjconvSystem) {
    if !system.is_null() {
        drop(unsafe { Box::from_raw(system) });
    }
}

/// Number of matrices in the system's alphabet.
///
/// # Safety
/// `system` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn projconv_system_alphabet_len(system: *const ProjconvSystem) -> usize {
    if system.is_null() {
        return 0;
    }
    unsafe { &*system }.inner.alphabet_len()
}

/// Decides pointwise convergence for every admissible sequence; writes the
/// verdict as JSON.
///
/// # Safety
/// `system` must be a live handle and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn projconv_decide(
    system: *const ProjconvSystem,
    out_json: *mut *mut c_char,
) -> ProjconvStatus {
    guard(|| {
        clear_error();
        if system.is_null() || out_json.is_null() {
            set_error("null argument");
            return ProjconvStatus::InvalidArgument;
        }
        let verdict = decide(&unsafe { &*system }.inner);
        let text = serde_json::to_string_pretty(&verdict).expect("serializable verdict");
        out_string(out_json, text)
    })
}

/// Simulates one symbol sequence and writes the trace as CSV. `omega` uses
/// the same forms as the command line: digits, `cycle:<digits>`,
/// `random:<seed>`, or `forge`. Returns `Excluded` when the path was
/// annihilated (the partial trace is still written).
///
/// # Safety
/// `system` must be a live handle; `omega` a valid NUL-terminated string;
/// `out_csv` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn projconv_simulate_csv(
    system: *const ProjconvSystem,
    omega: *const c_char,
    steps: u64,
    exact: bool,
    out_csv: *mut *mut c_char,
) -> ProjconvStatus {
    guard(|| {
        clear_error();
        if system.is_null() || omega.is_null() || out_csv.is_null() {
            set_error("null argument");
            return ProjconvStatus::InvalidArgument;
        }
        if steps == 0 {
            set_error("steps must be at least 1");
            return ProjconvStatus::InvalidArgument;
        }
        let system = &unsafe { &*system }.inner;
        let omega_text = match unsafe { CStr::from_ptr(omega) }.to_str() {
            Ok(t) => t,
            Err(_) => {
                set_error("omega is not valid UTF-8");
                return ProjconvStatus::ParseError;
            }
        };
        let spec = match OmegaSpec::parse(omega_text) {
            Ok(s) => s,
            Err(e) => {
                set_error(e.to_string());
                return ProjconvStatus::ParseError;
            }
        };
        let mode = if exact { Mode::Exact } else { Mode::Float };
        let opts = EngineOptions::default();
        let steps = steps as usize;
        let trace = match &spec {
            OmegaSpec::Forge => {
                let verdict = decide(system);
                let case = match forge::dispatch(system, &verdict) {
                    Ok(c) => c,
                    Err(ForgeError::NotApplicable) => {
                        set_error("the system converges; nothing to forge");
                        return ProjconvStatus::NotApplicable;
                    }
                    Err(e) => {
                        set_error(e.to_string());
                        return ProjconvStatus::Error;
                    }
                };
                let generator = match forge::OmegaGenerator::new(system, case) {
                    Ok(g) => g,
                    Err(e) => {
                        set_error(e.to_string());
                        return ProjconvStatus::Error;
                    }
                };
                run(system, generator, steps, mode, &opts)
            }
            other => match other.source(system.alphabet_len()) {
                Ok(source) => run(system, source, steps, mode, &opts),
                Err(e) => {
                    set_error(e.to_string());
                    return ProjconvStatus::ParseError;
                }
            },
        };
        let trace = match trace {
            Ok(t) => t,
            Err(e) => {
                set_error(e.to_string());
                return ProjconvStatus::Error;
            }
        };
        let mut buf = Vec::new();
        if write_trace_csv(&mut buf, &trace).is_err() {
            set_error("formatting failure");
            return ProjconvStatus::Error;
        }
        let text = String::from_utf8(buf).expect("CSV is UTF-8");
        let excluded = matches!(trace.status(), TraceStatus::Excluded { .. });
        let status = out_string(out_csv, text);
        if status == ProjconvStatus::Ok && excluded {
            set_error("the vector was annihilated; the path is excluded");
            return ProjconvStatus::Excluded;
        }
        status
    })
}

/// Constructs and certifies a divergent sequence; writes the certificate as
/// JSON. `delta_min` is a positive rational such as `"1/1000"` or `"0.001"`.
///
/// # Safety
/// `system` must be a live handle; `delta_min` a valid NUL-terminated
/// string; `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn projconv_forge(
    system: *const ProjconvSystem,
    steps: u64,
    delta_min: *const c_char,
    out_json: *mut *mut c_char,
) -> ProjconvStatus {
    guard(|| {
        clear_error();
        if system.is_null() || delta_min.is_null() || out_json.is_null() {
            set_error("null argument");
            return ProjconvStatus::InvalidArgument;
        }
        let system = &unsafe { &*system }.inner;
        let delta_text = match unsafe { CStr::from_ptr(delta_min) }.to_str() {
            Ok(t) => t,
            Err(_) => {
                set_error("delta_min is not valid UTF-8");
                return ProjconvStatus::ParseError;
            }
        };
        let delta = match Scalar::parse(delta_text) {
            Ok(d) if d.is_positive() => d,
            _ => {
                set_error("delta_min must be a positive rational");
                return ProjconvStatus::InvalidArgument;
            }
        };
        let verdict = decide(system);
        let case = match forge::dispatch(system, &verdict) {
            Ok(c) => c,
            Err(ForgeError::NotApplicable) => {
                set_error("the system converges for every admissible sequence");
                return ProjconvStatus::NotApplicable;
            }
            Err(e) => {
                set_error(e.to_string());
                return ProjconvStatus::Error;
            }
        };
        let config = ForgeConfig {
            steps: steps as usize,
            delta_min: delta,
        };
        match forge::certify(system, case, &config) {
            Ok(cert) => {
                let text = serde_json::to_string_pretty(&cert).expect("serializable certificate");
                out_string(out_json, text)
            }
            Err(e @ ForgeError::CertificationFailed { .. }) => {
                set_error(e.to_string());
                ProjconvStatus::CertificationFailed
            }
            Err(e) => {
                set_error(e.to_string());
                ProjconvStatus::Error
            }
        }
    })
}

/// Exhaustively checks the exact identities over all symbol prefixes up to
/// `depth`; writes a JSON report. Returns `Error` when violations were
/// found (the report is still written) or the budget was exceeded.
///
/// # Safety
/// `system` must be a live handle and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn projconv_verify(
    system: *const ProjconvSystem,
    depth: u32,
    budget: u64,
    out_json: *mut *mut c_char,
) -> ProjconvStatus {
    guard(|| {
        clear_error();
        if system.is_null() || out_json.is_null() {
            set_error("null argument");
            return ProjconvStatus::InvalidArgument;
        }
        let system = &unsafe { &*system }.inner;
        match exhaustive_check(system, depth as usize, budget) {
            Ok(report) => {
                let violations: Vec<String> = report
                    .violations
                    .iter()
                    .map(|v| {
                        format!(
                            "family={} step={} omega={:?}: {}",
                            v.family, v.step, v.omega, v.detail
                        )
                    })
                    .collect();
                let json = serde_json::json!({
                    "depth": report.depth,
                    "paths": report.paths,
                    "steps_checked": report.steps_checked,
                    "excluded_prefixes": report.excluded_prefixes,
                    "violations": violations,
                });
                let clean = report.clean();
                let status = out_string(out_json, serde_json::to_string_pretty(&json).unwrap());
                if status == ProjconvStatus::Ok && !clean {
                    set_error("identity violations found");
                    return ProjconvStatus::Error;
                }
                status
            }
            Err(e @ HarnessError::BudgetExceeded { .. }) => {
                set_error(e.to_string());
                ProjconvStatus::InvalidArgument
            }
            Err(e) => {
                set_error(e.to_string());
                ProjconvStatus::Error
            }
        }
    })
}

/// Probes the three-series finiteness data over a forged or explicit
/// sequence; writes a JSON report.
///
/// # Safety
/// `system` must be a live handle; `omega` a valid NUL-terminated string;
/// `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn projconv_series_probe(
    system: *const ProjconvSystem,
    omega: *const c_char,
    steps: u64,
    out_json: *mut *mut c_char,
) -> ProjconvStatus {
    guard(|| {
        clear_error();
        if system.is_null() || omega.is_null() || out_json.is_null() {
            set_error("null argument");
            return ProjconvStatus::InvalidArgument;
        }
        let system = &unsafe { &*system }.inner;
        let omega_text = match unsafe { CStr::from_ptr(omega) }.to_str() {
            Ok(t) => t,
            Err(_) => {
                set_error("omega is not valid UTF-8");
                return ProjconvStatus::ParseError;
            }
        };
        let spec = match OmegaSpec::parse(omega_text) {
            Ok(s) => s,
            Err(e) => {
                set_error(e.to_string());
                return ProjconvStatus::ParseError;
            }
        };
        let opts = EngineOptions::default();
        let trace = match &spec {
            OmegaSpec::Forge => {
                let verdict = decide(system);
                let case = match forge::dispatch(system, &verdict) {
                    Ok(c) => c,
                    Err(ForgeError::NotApplicable) => {
                        set_error("the system converges; nothing to forge");
                        return ProjconvStatus::NotApplicable;
                    }
                    Err(e) => {
                        set_error(e.to_string());
                        return ProjconvStatus::Error;
                    }
                };
                forge::OmegaGenerator::new(system, case)
                    .map_err(|e| e.to_string())
                    .and_then(|generator| {
                        run(system, generator, steps as usize, Mode::Exact, &opts)
                            .map_err(|e| e.to_string())
                    })
            }
            other => other
                .source(system.alphabet_len())
                .map_err(|e| e.to_string())
                .and_then(|source| {
                    run(system, source, steps as usize, Mode::Exact, &opts)
                        .map_err(|e| e.to_string())
                }),
        };
        let trace = match trace {
            Ok(t) => t,
            Err(e) => {
                set_error(e);
                return ProjconvStatus::Error;
            }
        };
        match series_criterion_probe(&trace) {
            Ok(probe) => {
                let json = serde_json::json!({
                    "sum_lower": probe.sum_lower,
                    "sum_upper": probe.sum_upper,
                    "sum_lower_tail": probe.sum_lower_tail,
                    "sum_upper_tail": probe.sum_upper_tail,
                    "overlap_count": probe.overlap_count,
                    "lower_count": probe.lower_count,
                    "upper_count": probe.upper_count,
                    "interval_ratio": probe.interval_ratio.to_fraction_string(),
                    "interval_width_final": probe.interval_width_final,
                    "n1": probe.n1,
                    "steps": probe.steps,
                });
                out_string(out_json, serde_json::to_string_pretty(&json).unwrap())
            }
            Err(e) => {
                set_error(e.to_string());
                ProjconvStatus::NotApplicable
            }
        }
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `text` must be a pointer previously returned through an out-parameter of
/// this library, not yet freed, or null.
#[no_mangle]
pub unsafe extern "C" fn projconv_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(unsafe { CString::from_raw(text) });
    }
}

/// The most recent error message on this thread, or null. The returned
/// string must be released with `projconv_string_free`.
#[no_mangle]
pub extern "C" fn projconv_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| match slot.borrow().as_ref() {
        Some(s) => s.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn projconv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
