use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use bfl_ffi::*;

const HELIX: &str = r#"
topology = "periodic"
length = 6.283185307179586
nodes = 32
initial = "helix:0.7853981633974483,2"
speed = "const:1"
method = "rotation"
dt = "fixed:0.001"
horizon = 0.1
stride = 50
probes = ["oracle", "bounds"]
oracle_tol = 1e-6
"#;

fn parse(text: &str) -> *mut BflExperiment {
    let text = CString::new(text).unwrap();
    let mut exp = ptr::null_mut();
    assert_eq!(unsafe { bfl_experiment_parse(text.as_ptr(), &mut exp) }, BflStatus::Ok);
    assert!(!exp.is_null());
    exp
}

fn last_error() -> String {
    let p = bfl_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(bfl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn run_in_memory_produces_a_report() {
    let exp = parse(HELIX);
    let mut code = -1;
    assert_eq!(unsafe { bfl_experiment_run(exp, ptr::null(), &mut code) }, BflStatus::Ok);
    assert_eq!(code, 0);
    let json = unsafe { CStr::from_ptr(bfl_experiment_report_json(exp)) }.to_str().unwrap();
    let report: serde_json::Value = serde_json::from_str(json).unwrap();
    assert_eq!(report["status"], "pass");
    assert!(report["summary"]["final_oracle_error"].as_f64().unwrap() <= 1e-6);
    unsafe { bfl_experiment_free(exp) };
}

#[test]
fn run_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let exp = parse(HELIX);
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { bfl_experiment_run(exp, out.as_ptr(), ptr::null_mut()) }, BflStatus::Ok);
    assert!(dir.path().join("run.csv").exists());
    assert!(dir.path().join("run.json").exists());
    unsafe { bfl_experiment_free(exp) };
}

#[test]
fn bad_config_sets_last_error() {
    let text = CString::new("topology = \"periodic\"\nbogus = 1\n").unwrap();
    let mut exp = ptr::null_mut();
    assert_eq!(unsafe { bfl_experiment_parse(text.as_ptr(), &mut exp) }, BflStatus::Config);
    assert!(exp.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { bfl_experiment_parse(ptr::null(), &mut exp) }, BflStatus::NullPointer);
    assert_eq!(unsafe { bfl_experiment_run(ptr::null_mut(), ptr::null(), ptr::null_mut()) }, BflStatus::NullPointer);
    unsafe { bfl_experiment_free(ptr::null_mut()) };
    unsafe { bfl_simulation_free(ptr::null_mut()) };
}

#[test]
fn simulation_steps_and_copies() {
    let exp = parse(HELIX);
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { bfl_simulation_new(exp, &mut sim) }, BflStatus::Ok);
    unsafe { bfl_experiment_free(exp) };
    let n = unsafe { bfl_simulation_node_count(sim) };
    assert_eq!(n, 32);
    assert_eq!(unsafe { bfl_simulation_advance(sim, 0.05) }, BflStatus::Ok);
    assert!((unsafe { bfl_simulation_time(sim) } - 0.05).abs() < 1e-12);

    let mut buf = vec![0.0; 3 * n];
    assert_eq!(unsafe { bfl_simulation_copy_tangent(sim, buf.as_mut_ptr(), buf.len()) }, BflStatus::Ok);
    for v in buf.chunks_exact(3) {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }
    assert_eq!(unsafe { bfl_simulation_copy_curve(sim, buf.as_mut_ptr(), buf.len()) }, BflStatus::Ok);
    assert_eq!(
        unsafe { bfl_simulation_copy_curve(sim, buf.as_mut_ptr(), buf.len() - 1) },
        BflStatus::InvalidArgument
    );

    let mut d = BflDiagnostics::default();
    assert_eq!(unsafe { bfl_simulation_diagnostics(sim, &mut d) }, BflStatus::Ok);
    assert!((d.t - 0.05).abs() < 1e-12);
    assert!(d.unit_drift < 1e-12);
    assert!(d.energy > 0.0);
    assert_eq!(unsafe { bfl_simulation_advance(sim, f64::NAN) }, BflStatus::InvalidArgument);
    unsafe { bfl_simulation_free(sim) };
}

#[test]
fn divergence_keeps_the_last_good_state() {
    let exp = parse(&HELIX.replace("\"rotation\"", "\"rk4\"").replace("fixed:0.001", "fixed:0.05"));
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { bfl_simulation_new(exp, &mut sim) }, BflStatus::Ok);
    assert_eq!(unsafe { bfl_simulation_advance(sim, 10.0) }, BflStatus::Divergence);
    let t = unsafe { bfl_simulation_time(sim) };
    assert!(t.is_finite() && t < 10.0);
    let mut buf = vec![0.0; 3 * 32];
    assert_eq!(unsafe { bfl_simulation_copy_tangent(sim, buf.as_mut_ptr(), buf.len()) }, BflStatus::Ok);
    assert!(buf.iter().all(|x| x.is_finite()));
    unsafe { bfl_simulation_free(sim) };
    unsafe { bfl_experiment_free(exp) };
}

#[test]
fn identities_pass() {
    let mut worst = f64::NAN;
    assert_eq!(unsafe { bfl_identities(5, 50, &mut worst) }, BflStatus::Ok);
    assert!(worst < 1e-11);
    assert_eq!(unsafe { bfl_identities(5, 0, ptr::null_mut()) }, BflStatus::InvalidArgument);
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/bfl.h")
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header()).unwrap();
    for sym in [
        "bfl_version",
        "bfl_last_error",
        "bfl_experiment_parse",
        "bfl_experiment_load",
        "bfl_experiment_run",
        "bfl_experiment_report_json",
        "bfl_experiment_free",
        "bfl_simulation_new",
        "bfl_simulation_advance",
        "bfl_simulation_time",
        "bfl_simulation_node_count",
        "bfl_simulation_copy_tangent",
        "bfl_simulation_copy_curve",
        "bfl_simulation_diagnostics",
        "bfl_simulation_free",
        "bfl_identities",
        "BFL_STATUS_DIVERGENCE",
        "typedef struct BflExperiment BflExperiment;",
    ] {
        assert!(text.contains(sym), "missing {sym}");
    }
}

// Compiles and runs a small C program against the static library when a C compiler is available.
#[test]
fn c_smoke_test() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler, skipping");
        return;
    }
    // target/<profile>/deps/api-xxxx -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libbfl_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built, skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <math.h>
#include "bfl.h"

int main(void) {
    const char *cfg =
        "topology = \"periodic\"\nlength = 6.283185307179586\nnodes = 16\n"
        "initial = \"great-circle:1\"\nspeed = \"const:1\"\nmethod = \"rotation\"\n"
        "dt = \"cfl:0.5\"\nhorizon = 0.1\n";
    BflExperiment *exp = NULL;
    if (bfl_experiment_parse(cfg, &exp) != BFL_STATUS_OK) { fprintf(stderr, "%s\n", bfl_last_error()); return 1; }
    BflSimulation *sim = NULL;
    if (bfl_simulation_new(exp, &sim) != BFL_STATUS_OK) return 2;
    if (bfl_simulation_advance(sim, 0.1) != BFL_STATUS_OK) return 3;
    BflDiagnostics d;
    if (bfl_simulation_diagnostics(sim, &d) != BFL_STATUS_OK) return 4;
    if (fabs(d.t - 0.1) > 1e-12 || d.unit_drift > 1e-12) return 5;
    int32_t code = -1;
    if (bfl_experiment_run(exp, NULL, &code) != BFL_STATUS_OK || code != 0) return 6;
    if (bfl_experiment_report_json(exp) == NULL) return 7;
    bfl_simulation_free(sim);
    bfl_experiment_free(exp);
    printf("ok %s\n", bfl_version());
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "smoke exited with {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
