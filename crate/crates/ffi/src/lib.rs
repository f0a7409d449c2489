//! C ABI over `acc-core`.
//!
//! Scenarios and traces are opaque handles owned by the caller and released
//! with the matching `*_free` function. Every fallible call returns an
//! [`AccStatus`]; on failure [`acc_last_error_message`] describes the cause
//! for the calling thread. Strings returned through `char **` out-parameters
//! are heap allocated and must be released with [`acc_string_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use acc_core::analysis::{self, StabilityReport};
use acc_core::controller;
use acc_core::estimator::EstimatorGains;
use acc_core::matops::{self, EigenTriple};
use acc_core::scenario::{self, Scenario};
use acc_core::sim::{self, Trace};
use acc_core::Error;
use num_complex::Complex64;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    ConfigError = 4,
    InvalidGain = 5,
    InvalidSpectrum = 6,
    InvalidArgument = 7,
    NoUniqueSolution = 8,
    SingularEquilibrium = 9,
    OutOfRange = 10,
    NumericFailure = 11,
    AnalysisError = 12,
    IoError = 13,
    Panic = 14,
}

/// Opaque validated scenario.
pub struct AccScenario {
    inner: Scenario,
}

/// Opaque simulation result; remembers the scenario it came from.
pub struct AccTrace {
    trace: Trace,
    scenario: Scenario,
}

/// One follower's channels at one recorded instant.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AccSample {
    pub t: f64,
    pub lead_v: f64,
    pub lead_u: f64,
    pub lead_uj: f64,
    pub d: f64,
    pub v: f64,
    pub u: f64,
    pub d_tilde: f64,
    pub v1_tilde: f64,
    pub u1_tilde: f64,
    pub h: f64,
    pub h_hat: f64,
    pub epsilon: f64,
    pub v1_lyap: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

enum Fail {
    Core(Error),
    Null(&'static str),
    Utf8(&'static str),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn status_of(e: &Error) -> AccStatus {
    match e {
        Error::InvalidSpectrum(_) => AccStatus::InvalidSpectrum,
        Error::NoUniqueSolution(_) => AccStatus::NoUniqueSolution,
        Error::InvalidArgument(_) => AccStatus::InvalidArgument,
        Error::InvalidGain(_) => AccStatus::InvalidGain,
        Error::SingularEquilibrium => AccStatus::SingularEquilibrium,
        Error::OutOfRange { .. } => AccStatus::OutOfRange,
        Error::NumericFailure { .. } => AccStatus::NumericFailure,
        Error::Config(_) => AccStatus::ConfigError,
        Error::Parse { .. } => AccStatus::ParseError,
        Error::Analysis(_) => AccStatus::AnalysisError,
        Error::Io(_) => AccStatus::IoError,
    }
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AccStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(String::new());
            AccStatus::Ok
        }
        Ok(Err(Fail::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            AccStatus::NullPointer
        }
        Ok(Err(Fail::Utf8(what))) => {
            set_last_error(format!("{what} is not valid UTF-8"));
            AccStatus::InvalidUtf8
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {msg}"));
            AccStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Utf8(what))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn acc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses and validates scenario JSON.
#[no_mangle]
pub unsafe extern "C" fn acc_scenario_from_json(json: *const c_char, out: *mut *mut AccScenario) -> AccStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let s = scenario::parse_scenario(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(AccScenario { inner: s }));
        Ok(())
    })
}

/// Built-in scenario by name (`accel`, `decel`, `const-jerk`, `string-4`,
/// `ccc-2s`, `airsim-like`).
#[no_mangle]
pub unsafe extern "C" fn acc_scenario_from_preset(name: *const c_char, out: *mut *mut AccScenario) -> AccStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let s = scenario::preset(str_arg(name, "name")?)?;
        *out = Box::into_raw(Box::new(AccScenario { inner: s }));
        Ok(())
    })
}

/// Reads a scenario file.
#[no_mangle]
pub unsafe extern "C" fn acc_scenario_load(path: *const c_char, out: *mut *mut AccScenario) -> AccStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let s = scenario::load_scenario(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(AccScenario { inner: s }));
        Ok(())
    })
}

/// Overrides the step size; rejected (scenario unchanged) if invalid.
#[no_mangle]
pub unsafe extern "C" fn acc_scenario_set_dt(scenario: *mut AccScenario, dt: f64) -> AccStatus {
    guard(|| {
        let s = out_arg(scenario, "scenario")?;
        let mut sim = s.inner.sim.clone();
        sim.dt = dt;
        sim.validate()?;
        s.inner.sim = sim;
        Ok(())
    })
}

/// Overrides the horizon; rejected (scenario unchanged) if invalid or
/// beyond the lead profile.
#[no_mangle]
pub unsafe extern "C" fn acc_scenario_set_horizon(scenario: *mut AccScenario, horizon: f64) -> AccStatus {
    guard(|| {
        let s = out_arg(scenario, "scenario")?;
        let mut sim = s.inner.sim.clone();
        sim.horizon = horizon;
        sim.validate()?;
        if horizon > s.inner.lead.horizon() + 1e-9 {
            return Err(Error::Config(format!(
                "horizon {horizon} s exceeds lead profile horizon {} s",
                s.inner.lead.horizon()
            ))
            .into());
        }
        s.inner.sim = sim;
        Ok(())
    })
}

/// Serializes the scenario; free the string with [`acc_string_free`].
#[no_mangle]
pub unsafe extern "C" fn acc_scenario_to_json(scenario: *const AccScenario, out: *mut *mut c_char) -> AccStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        *out = into_c_string(ref_arg(scenario, "scenario")?.inner.to_json());
        Ok(())
    })
}

/// Number of feasibility warnings (non-fatal) for the scenario.
#[no_mangle]
pub unsafe extern "C" fn acc_scenario_warning_count(scenario: *const AccScenario, out: *mut usize) -> AccStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(scenario, "scenario")?.inner.warnings().len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn acc_scenario_free(scenario: *mut AccScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs the closed loop.
#[no_mangle]
pub unsafe extern "C" fn acc_scenario_run(scenario: *const AccScenario, out: *mut *mut AccTrace) -> AccStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let s = &ref_arg(scenario, "scenario")?.inner;
        let trace = sim::run_scenario(&s.sim, &s.lead, &s.gains, &s.controller)?;
        *out = Box::into_raw(Box::new(AccTrace { trace, scenario: s.clone() }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn acc_trace_len(trace: *const AccTrace, out: *mut usize) -> AccStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(trace, "trace")?.trace.records.len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn acc_trace_follower_count(trace: *const AccTrace, out: *mut usize) -> AccStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(trace, "trace")?.trace.follower_count();
        Ok(())
    })
}

/// Copies sample `index` of follower `follower` (0-based) into `out`.
#[no_mangle]
pub unsafe extern "C" fn acc_trace_sample(
    trace: *const AccTrace,
    index: usize,
    follower: usize,
    out: *mut AccSample,
) -> AccStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let t = &ref_arg(trace, "trace")?.trace;
        let r = t.records.get(index).ok_or_else(|| {
            Error::InvalidArgument(format!("sample index {index} out of range (len {})", t.records.len()))
        })?;
        let f = r.followers.get(follower).ok_or_else(|| {
            Error::InvalidArgument(format!("follower {follower} out of range (count {})", r.followers.len()))
        })?;
        *out = AccSample {
            t: r.t,
            lead_v: r.lead.v1,
            lead_u: r.lead.u1,
            lead_uj: r.lead.u_j,
            d: f.d,
            v: f.v,
            u: f.u,
            d_tilde: f.d_tilde,
            v1_tilde: f.v1_tilde,
            u1_tilde: f.u1_tilde,
            h: f.h,
            h_hat: f.h_hat,
            epsilon: f.epsilon,
            v1_lyap: f.v1_lyap,
        };
        Ok(())
    })
}

/// Writes the trace as CSV to `path`.
#[no_mangle]
pub unsafe extern "C" fn acc_trace_write_csv(trace: *const AccTrace, path: *const c_char) -> AccStatus {
    guard(|| {
        let t = &ref_arg(trace, "trace")?.trace;
        let file = std::fs::File::create(str_arg(path, "path")?).map_err(Error::from)?;
        let mut w = std::io::BufWriter::new(file);
        t.write_csv(&mut w)?;
        std::io::Write::flush(&mut w).map_err(Error::from)?;
        Ok(())
    })
}

/// Stability report as JSON; free the string with [`acc_string_free`].
#[no_mangle]
pub unsafe extern "C" fn acc_trace_report_json(trace: *const AccTrace, out: *mut *mut c_char) -> AccStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let AccTrace { trace, scenario: s } = ref_arg(trace, "trace")?;
        let report = StabilityReport::from_trace(trace, &s.gains, &s.controller, &s.report_context())?;
        let json = serde_json::to_string(&report).map_err(|e| Error::Io(e.to_string()))?;
        *out = into_c_string(json);
        Ok(())
    })
}

/// Runs every certificate check; `*passed` is true when all hold.
#[no_mangle]
pub unsafe extern "C" fn acc_trace_certify(trace: *const AccTrace, passed: *mut bool) -> AccStatus {
    guard(|| {
        let passed = out_arg(passed, "passed")?;
        let AccTrace { trace, scenario: s } = ref_arg(trace, "trace")?;
        let checks = analysis::certify(trace, &s.gains, &s.controller, &s.sim.lyapunov_q, &s.report_context())?;
        *passed = checks.iter().all(|c| c.passed);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn acc_trace_free(trace: *mut AccTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

#[no_mangle]
pub unsafe extern "C" fn acc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Gains whose error matrix has the eigenvalues `re[i] + j·im[i]`
/// (arrays of length 3). Writes `(g1, g2, g3)` to `gains_out[0..3]`.
#[no_mangle]
pub unsafe extern "C" fn acc_gains_from_eigenvalues(re: *const f64, im: *const f64, gains_out: *mut f64) -> AccStatus {
    guard(|| {
        if re.is_null() || im.is_null() || gains_out.is_null() {
            return Err(Fail::Null("re, im or gains_out"));
        }
        let re = std::slice::from_raw_parts(re, 3);
        let im = std::slice::from_raw_parts(im, 3);
        let roots = std::array::from_fn(|i| Complex64::new(re[i], im[i]));
        let (g1, g2, g3) = matops::gains_from_eigenvalues(&EigenTriple::new(roots))?;
        std::slice::from_raw_parts_mut(gains_out, 3).copy_from_slice(&[g1, g2, g3]);
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn acc_is_hurwitz(g1: f64, g2: f64, g3: f64) -> bool {
    matops::is_hurwitz(g1, g2, g3)
}

/// Smallest admissible `(E_v, E_u)` for jerk lower bound `u_min`.
#[no_mangle]
pub unsafe extern "C" fn acc_min_error_bounds(
    g1: f64,
    g2: f64,
    g3: f64,
    u_min: f64,
    e_v: *mut f64,
    e_u: *mut f64,
) -> AccStatus {
    guard(|| {
        let gains = EstimatorGains::new(g1, g2, g3)?;
        let (v, u) = controller::min_error_bounds(u_min, &gains);
        *out_arg(e_v, "e_v")? = v;
        *out_arg(e_u, "e_u")? = u;
        Ok(())
    })
}

/// Steady-state spacing surplus for error bound `e_v` and lead jerk `u_j`.
#[no_mangle]
pub extern "C" fn acc_equilibrium_headway(e_v: f64, g1: f64, u_j: f64, g3: f64) -> f64 {
    analysis::equilibrium_headway(e_v, g1, u_j, g3)
}
