use std::ffi::{CStr, CString};
use std::ptr;

use acc_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(acc_last_error_message()) }.to_string_lossy().into_owned()
}

fn preset(name: &str) -> *mut AccScenario {
    let name = CString::new(name).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { acc_scenario_from_preset(name.as_ptr(), &mut s) }, AccStatus::Ok);
    assert!(!s.is_null());
    s
}

#[test]
fn preset_run_and_sample() {
    unsafe {
        let s = preset("accel");
        assert_eq!(acc_scenario_set_horizon(s, 3.0), AccStatus::Ok);
        let mut trace = ptr::null_mut();
        assert_eq!(acc_scenario_run(s, &mut trace), AccStatus::Ok);
        let (mut len, mut n) = (0usize, 0usize);
        assert_eq!(acc_trace_len(trace, &mut len), AccStatus::Ok);
        assert_eq!(acc_trace_follower_count(trace, &mut n), AccStatus::Ok);
        assert_eq!((len, n), (3001, 1));

        let mut sample = AccSample::default();
        assert_eq!(acc_trace_sample(trace, len - 1, 0, &mut sample), AccStatus::Ok);
        assert!((sample.t - 3.0).abs() < 1e-12);
        assert_eq!(sample.lead_uj, 0.0);
        assert_eq!(acc_trace_sample(trace, len, 0, &mut sample), AccStatus::InvalidArgument);
        assert!(last_error().contains("out of range"));
        assert_eq!(acc_trace_sample(trace, 0, 1, &mut sample), AccStatus::InvalidArgument);

        let mut json = ptr::null_mut();
        assert_eq!(acc_trace_report_json(trace, &mut json), AccStatus::Ok);
        let report: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert!(report["min_h"].as_f64().unwrap() >= 0.0);
        acc_string_free(json);

        let mut passed = false;
        assert_eq!(acc_trace_certify(trace, &mut passed), AccStatus::Ok);
        assert!(passed);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("t.csv").to_str().unwrap()).unwrap();
        assert_eq!(acc_trace_write_csv(trace, path.as_ptr()), AccStatus::Ok);
        let csv = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert_eq!(csv.lines().count(), 3002);

        acc_trace_free(trace);
        acc_scenario_free(s);
    }
}

#[test]
fn json_round_trip_through_handles() {
    unsafe {
        let s = preset("ccc-2s");
        let mut json = ptr::null_mut();
        assert_eq!(acc_scenario_to_json(s, &mut json), AccStatus::Ok);
        let mut s2 = ptr::null_mut();
        assert_eq!(acc_scenario_from_json(json, &mut s2), AccStatus::Ok);
        let mut json2 = ptr::null_mut();
        assert_eq!(acc_scenario_to_json(s2, &mut json2), AccStatus::Ok);
        assert_eq!(CStr::from_ptr(json), CStr::from_ptr(json2));
        let mut warnings = 0;
        assert_eq!(acc_scenario_warning_count(s2, &mut warnings), AccStatus::Ok);
        assert_eq!(warnings, 1);
        acc_string_free(json);
        acc_string_free(json2);
        acc_scenario_free(s);
        acc_scenario_free(s2);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(acc_scenario_from_preset(ptr::null(), &mut s), AccStatus::NullPointer);
        assert!(s.is_null());
        let bad = CString::new("nope").unwrap();
        assert_eq!(acc_scenario_from_preset(bad.as_ptr(), &mut s), AccStatus::ConfigError);
        assert!(last_error().contains("unknown preset"));
        let junk = CString::new("{ not json").unwrap();
        assert_eq!(acc_scenario_from_json(junk.as_ptr(), &mut s), AccStatus::ParseError);
        let utf8 = [0xffu8, 0];
        assert_eq!(acc_scenario_from_json(utf8.as_ptr().cast(), &mut s), AccStatus::InvalidUtf8);
        let missing = CString::new("/nonexistent/acc.json").unwrap();
        assert_eq!(acc_scenario_load(missing.as_ptr(), &mut s), AccStatus::IoError);

        let s = preset("accel");
        assert_eq!(acc_scenario_set_dt(s, -1.0), AccStatus::ConfigError);
        assert_eq!(acc_scenario_set_horizon(s, 1e6), AccStatus::ConfigError);
        assert_eq!(acc_scenario_set_dt(s, 0.002), AccStatus::Ok);
        assert_eq!(last_error(), "");
        acc_scenario_free(s);
        acc_scenario_free(ptr::null_mut());
        acc_trace_free(ptr::null_mut());
        acc_string_free(ptr::null_mut());
    }
}

#[test]
fn math_helpers() {
    unsafe {
        let (re, im) = ([-2.0, -3.0, -4.0], [0.0; 3]);
        let mut g = [0.0; 3];
        assert_eq!(acc_gains_from_eigenvalues(re.as_ptr(), im.as_ptr(), g.as_mut_ptr()), AccStatus::Ok);
        assert_eq!(g, [-9.0, -26.0, -24.0]);
        let im_bad = [1.0, 0.0, 0.0];
        assert_eq!(acc_gains_from_eigenvalues(re.as_ptr(), im_bad.as_ptr(), g.as_mut_ptr()), AccStatus::InvalidSpectrum);
        assert!(acc_is_hurwitz(-9.0, -26.0, -24.0));
        assert!(!acc_is_hurwitz(1.0, -26.0, -24.0));
        let (mut ev, mut eu) = (0.0, 0.0);
        assert_eq!(acc_min_error_bounds(-9.0, -26.0, -24.0, -0.923, &mut ev, &mut eu), AccStatus::Ok);
        assert!((ev - 0.346).abs() < 1e-3 && (eu - 1.0).abs() < 1e-3);
        assert_eq!(acc_min_error_bounds(1.0, -26.0, -24.0, -0.923, &mut ev, &mut eu), AccStatus::InvalidGain);
        assert!((acc_equilibrium_headway(0.346, -9.0, 0.5, -24.0) - 0.059278).abs() < 1e-6);
    }
}
