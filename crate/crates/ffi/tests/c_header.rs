//! Compiles and runs a small C program against the generated header and
//! static library. Skipped when no C compiler is available.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "acc_ffi.h"

int main(void) {
    AccScenario *s = NULL;
    if (acc_scenario_from_preset("const-jerk", &s) != ACC_STATUS_OK) return 10;
    if (acc_scenario_set_horizon(s, 10.0) != ACC_STATUS_OK) return 11;
    AccTrace *t = NULL;
    if (acc_scenario_run(s, &t) != ACC_STATUS_OK) return 12;
    size_t n = 0;
    acc_trace_len(t, &n);
    AccSample x;
    if (acc_trace_sample(t, n - 1, 0, &x) != ACC_STATUS_OK) return 13;
    printf("%.6f %.6f\n", x.v1_tilde, x.h);
    if (acc_scenario_from_preset("nope", &s) != ACC_STATUS_CONFIG_ERROR) return 14;
    if (strlen(acc_last_error_message()) == 0) return 15;
    acc_trace_free(t);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok_and(|o| o.status.success())
}

#[test]
fn header_compiles_and_links() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(include.join("acc_ffi.h").exists(), "header not generated");
    let lib = target_dir().join("libacc_ffi.a");
    if !have_cc() || !lib.exists() {
        eprintln!("skipping C link check (cc or {} missing)", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = dir.path().join("main");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    let vals: Vec<f64> = text.split_whitespace().map(|v| v.parse().unwrap()).collect();
    assert!((vals[0] + 0.1875).abs() < 1e-3, "{text}");
    assert!((vals[1] - 0.059278).abs() < 1e-3, "{text}");
}
