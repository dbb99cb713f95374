//! C interface to `bfl-core`.
//!
//! Handles are opaque and owned by the caller once created; release them with
//! the matching `*_free`. Every fallible call returns a [`BflStatus`]; on
//! failure [`bfl_last_error`] holds a message for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use bfl_core::config::ExperimentConfig;
use bfl_core::dynamics::FlowState;
use bfl_core::experiment::{cmd_run, run_experiment};
use bfl_core::identities::run_identities;
use bfl_core::integrate::{evolve, IntegratorSpec};
use bfl_core::probe::{diagnostics, BoundContext};
use bfl_core::report::Status;
use bfl_core::speed::SpeedField;
use bfl_core::{BflError, VectorField};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BflStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Divergence = 4,
    Threshold = 5,
    Io = 6,
    Panic = 7,
}

/// Monitored quantities of the current simulation state.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BflDiagnostics {
    pub t: f64,
    pub unit_drift: f64,
    pub energy: f64,
    pub grad_norm: f64,
    pub rhs_norm: f64,
    pub rhs_dual_norm: f64,
    pub delta_norm: f64,
    pub grad_margin: f64,
    pub dual_margin: f64,
}

/// A parsed experiment configuration and its latest report.
pub struct BflExperiment {
    config: ExperimentConfig,
    report_json: Option<CString>,
}

/// A state that can be advanced step by step.
pub struct BflSimulation {
    speed: SpeedField,
    spec: IntegratorSpec,
    state: FlowState,
    ctx: BoundContext,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &BflError) -> BflStatus {
    match e {
        BflError::Config(_) => BflStatus::Config,
        BflError::Divergence { .. } | BflError::NonFinite { .. } => BflStatus::Divergence,
        BflError::Io(_) => BflStatus::Io,
        _ => BflStatus::InvalidArgument,
    }
}

fn fail(status: BflStatus, msg: impl Into<String>) -> BflStatus {
    set_last_error(msg);
    status
}

/// Runs `f`, turning errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<BflStatus, BflError>) -> BflStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err(e)) => fail(status_of(&e), e.to_string()),
        Err(_) => fail(BflStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, BflError> {
    if p.is_null() {
        return Err(BflError::Precondition("null string argument".into()));
    }
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| BflError::Precondition("string argument is not UTF-8".into()))
}

fn status_from_report(s: Status) -> BflStatus {
    match s {
        Status::Pass => BflStatus::Ok,
        Status::Divergence => BflStatus::Divergence,
        Status::ThresholdFailure => BflStatus::Threshold,
        Status::ConfigError => BflStatus::Config,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bfl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn bfl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses configuration text into a new experiment handle.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bfl_experiment_parse(text: *const c_char, out: *mut *mut BflExperiment) -> BflStatus {
    if text.is_null() || out.is_null() {
        return fail(BflStatus::NullPointer, "bfl_experiment_parse: null argument");
    }
    guard(|| {
        let config = ExperimentConfig::parse(unsafe { str_arg(text) }?)?;
        unsafe { *out = Box::into_raw(Box::new(BflExperiment { config, report_json: None })) };
        Ok(BflStatus::Ok)
    })
}

/// Loads a configuration file; relative `file:` paths resolve next to it.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bfl_experiment_load(path: *const c_char, out: *mut *mut BflExperiment) -> BflStatus {
    if path.is_null() || out.is_null() {
        return fail(BflStatus::NullPointer, "bfl_experiment_load: null argument");
    }
    guard(|| {
        let config = ExperimentConfig::load(Path::new(unsafe { str_arg(path) }?))?;
        unsafe { *out = Box::into_raw(Box::new(BflExperiment { config, report_json: None })) };
        Ok(BflStatus::Ok)
    })
}

/// Runs the experiment. With a non-NULL `out_dir` the CSV and JSON files are
/// written there. `exit_code`, if not NULL, receives the command-line exit status.
/// Divergence and threshold failures still produce a report.
///
/// # Safety
/// `exp` must come from `bfl_experiment_parse`/`bfl_experiment_load`; `out_dir`
/// must be NULL or a NUL-terminated string; `exit_code` NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn bfl_experiment_run(
    exp: *mut BflExperiment,
    out_dir: *const c_char,
    exit_code: *mut i32,
) -> BflStatus {
    let Some(exp) = (unsafe { exp.as_mut() }) else {
        return fail(BflStatus::NullPointer, "bfl_experiment_run: null handle");
    };
    guard(|| {
        let report = if out_dir.is_null() {
            run_experiment(&exp.config)?.0
        } else {
            cmd_run(&exp.config, Some(Path::new(unsafe { str_arg(out_dir) }?)))?
        };
        if !exit_code.is_null() {
            unsafe { *exit_code = report.exit_code };
        }
        exp.report_json = Some(CString::new(report.to_json()).expect("JSON has no NUL bytes"));
        let status = status_from_report(report.status);
        if status != BflStatus::Ok {
            set_last_error(report.error.clone().or_else(|| report.notes.first().cloned()).unwrap_or_default());
        }
        Ok(status)
    })
}

/// JSON report of the last run, or NULL. Owned by the handle; valid until the next run or free.
///
/// # Safety
/// `exp` must be NULL or a live experiment handle.
#[no_mangle]
pub unsafe extern "C" fn bfl_experiment_report_json(exp: *const BflExperiment) -> *const c_char {
    unsafe { exp.as_ref() }
        .and_then(|e| e.report_json.as_ref())
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// # Safety
/// `exp` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bfl_experiment_free(exp: *mut BflExperiment) {
    if !exp.is_null() {
        drop(unsafe { Box::from_raw(exp) });
    }
}

/// Creates a simulation at the experiment's initial state.
///
/// # Safety
/// `exp` must be a live experiment handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bfl_simulation_new(exp: *const BflExperiment, out: *mut *mut BflSimulation) -> BflStatus {
    let (Some(exp), false) = (unsafe { exp.as_ref() }, out.is_null()) else {
        return fail(BflStatus::NullPointer, "bfl_simulation_new: null argument");
    };
    guard(|| {
        let cfg = &exp.config;
        let speed = cfg.speed_field()?;
        let base = cfg.integrator()?;
        let spec = IntegratorSpec::new(base.method, base.policy, usize::MAX)?;
        let state = cfg.initial_state()?;
        let ctx = BoundContext::from_initial(&state, speed.bounds());
        unsafe { *out = Box::into_raw(Box::new(BflSimulation { speed, spec, state, ctx })) };
        Ok(BflStatus::Ok)
    })
}

/// Advances to time `t`. On divergence the simulation keeps the last finite state.
///
/// # Safety
/// `sim` must be a live simulation handle.
#[no_mangle]
pub unsafe extern "C" fn bfl_simulation_advance(sim: *mut BflSimulation, t: f64) -> BflStatus {
    let Some(sim) = (unsafe { sim.as_mut() }) else {
        return fail(BflStatus::NullPointer, "bfl_simulation_advance: null handle");
    };
    if !t.is_finite() {
        return fail(BflStatus::InvalidArgument, format!("target time {t} is not finite"));
    }
    if t == sim.state.t() {
        return BflStatus::Ok;
    }
    guard(|| {
        let ev = evolve(sim.state.clone(), t, &sim.spec, &sim.speed);
        sim.state = ev.last;
        match ev.error {
            Some(e) => Err(e),
            None => Ok(BflStatus::Ok),
        }
    })
}

/// Current time, or NaN for a NULL handle.
///
/// # Safety
/// `sim` must be NULL or a live simulation handle.
#[no_mangle]
pub unsafe extern "C" fn bfl_simulation_time(sim: *const BflSimulation) -> f64 {
    unsafe { sim.as_ref() }.map_or(f64::NAN, |s| s.state.t())
}

/// Number of lattice nodes, or 0 for a NULL handle.
///
/// # Safety
/// `sim` must be NULL or a live simulation handle.
#[no_mangle]
pub unsafe extern "C" fn bfl_simulation_node_count(sim: *const BflSimulation) -> usize {
    unsafe { sim.as_ref() }.map_or(0, |s| s.state.grid().len())
}

fn copy_xyz(field: &VectorField, buf: *mut f64, len: usize) -> BflStatus {
    let need = 3 * field.len();
    if buf.is_null() {
        return fail(BflStatus::NullPointer, "null output buffer");
    }
    if len < need {
        return fail(BflStatus::InvalidArgument, format!("buffer holds {len} doubles, {need} needed"));
    }
    let out = unsafe { std::slice::from_raw_parts_mut(buf, need) };
    for (chunk, v) in out.chunks_exact_mut(3).zip(field.values()) {
        chunk.copy_from_slice(v.as_slice());
    }
    BflStatus::Ok
}

/// Copies the tangent field as `x0 y0 z0 x1 ...` into `buf`; `len` counts doubles and must be at least `3 * nodes`.
///
/// # Safety
/// `sim` must be a live simulation handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bfl_simulation_copy_tangent(sim: *const BflSimulation, buf: *mut f64, len: usize) -> BflStatus {
    match unsafe { sim.as_ref() } {
        Some(s) => copy_xyz(&s.state.tangent_field(), buf, len),
        None => fail(BflStatus::NullPointer, "bfl_simulation_copy_tangent: null handle"),
    }
}

/// Copies the curve points, laid out as in [`bfl_simulation_copy_tangent`].
///
/// # Safety
/// `sim` must be a live simulation handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bfl_simulation_copy_curve(sim: *const BflSimulation, buf: *mut f64, len: usize) -> BflStatus {
    match unsafe { sim.as_ref() } {
        Some(s) => copy_xyz(&s.state.curve_field(), buf, len),
        None => fail(BflStatus::NullPointer, "bfl_simulation_copy_curve: null handle"),
    }
}

/// # Safety
/// `sim` must be a live simulation handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bfl_simulation_diagnostics(sim: *const BflSimulation, out: *mut BflDiagnostics) -> BflStatus {
    let (Some(sim), false) = (unsafe { sim.as_ref() }, out.is_null()) else {
        return fail(BflStatus::NullPointer, "bfl_simulation_diagnostics: null argument");
    };
    guard(|| {
        let r = diagnostics(&sim.state, &sim.speed, &sim.ctx)?;
        unsafe {
            *out = BflDiagnostics {
                t: r.t,
                unit_drift: r.unit_drift,
                energy: r.energy,
                grad_norm: r.grad_norm,
                rhs_norm: r.rhs_norm,
                rhs_dual_norm: r.rhs_dual_norm,
                delta_norm: r.delta_norm,
                grad_margin: r.grad_margin,
                dual_margin: r.dual_margin,
            }
        };
        Ok(BflStatus::Ok)
    })
}

/// # Safety
/// `sim` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bfl_simulation_free(sim: *mut BflSimulation) {
    if !sim.is_null() {
        drop(unsafe { Box::from_raw(sim) });
    }
}

/// Runs the randomized identity suite. `worst`, if not NULL, receives the
/// largest residual over all identities. Returns `BFL_STATUS_THRESHOLD` if any fails.
///
/// # Safety
/// `worst` must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn bfl_identities(seed: u64, trials: usize, worst: *mut f64) -> BflStatus {
    if trials == 0 {
        return fail(BflStatus::InvalidArgument, "trials must be positive");
    }
    guard(|| {
        let report = run_identities(seed, trials)?;
        if !worst.is_null() {
            unsafe { *worst = report.results.iter().map(|r| r.worst).fold(0.0, f64::max) };
        }
        if report.all_pass() {
            Ok(BflStatus::Ok)
        } else {
            let names: Vec<&str> = report.results.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
            Ok(fail(BflStatus::Threshold, format!("identities failed: {}", names.join(", "))))
        }
    })
}
