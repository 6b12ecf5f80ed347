//! C ABI over the cascade simulator: opaque scenario handles, status
//! codes, and JSON-string results. The generated header lives at
//! `include/cascade.h` (regenerated by the build script).
//!
//! Conventions:
//! - every function returns a [`CascadeStatus`]; outputs come back
//!   through out-pointers;
//! - strings returned through out-pointers are NUL-terminated, owned by
//!   the caller, and must be released with `cascade_string_free`;
//! - scenario handles must be released with `cascade_scenario_free`;
//! - `cascade_last_error` describes the most recent failure on the
//!   calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use cascade::runner::{run_experiment, sweep_points};
use cascade::scenario::{load_scenario, parse_scenario, Model, Scenario};
use cascade::stability::{backward_induction, classify_two_station_with_epsilon, SimBudget};
use cascade::Error;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let cstring = CString::new(message.replace('\0', " "))
        .unwrap_or_else(|_| CString::new("invalid error message").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CascadeStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The scenario failed to parse or validate.
    InvalidScenario = 3,
    /// Simulation or analysis failed.
    RunFailed = 4,
    /// Filesystem error while writing artifacts.
    IoFailed = 5,
    /// The stability verdict landed in the boundary band.
    Boundary = 6,
}

/// Opaque handle over a validated scenario.
pub struct CascadeScenario {
    inner: Scenario,
}

fn status_of(err: &Error) -> CascadeStatus {
    match err {
        Error::ScenarioParse(_)
        | Error::ScenarioValidation(_)
        | Error::Config(_)
        | Error::Distribution { .. } => CascadeStatus::InvalidScenario,
        Error::Io(_) => CascadeStatus::IoFailed,
        _ => CascadeStatus::RunFailed,
    }
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, CascadeStatus> {
    if ptr.is_null() {
        set_last_error("NULL string argument".into());
        return Err(CascadeStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error("string argument is not valid UTF-8".into());
        CascadeStatus::InvalidUtf8
    })
}

fn return_string(out: *mut *mut c_char, text: String) -> CascadeStatus {
    let cstring = match CString::new(text) {
        Ok(s) => s,
        Err(_) => {
            set_last_error("result contained a NUL byte".into());
            return CascadeStatus::RunFailed;
        }
    };
    unsafe { *out = cstring.into_raw() };
    CascadeStatus::Ok
}

fn load_into(out: *mut *mut CascadeScenario, loaded: cascade::Result<Scenario>) -> CascadeStatus {
    match loaded {
        Ok(inner) => {
            let handle = Box::new(CascadeScenario { inner });
            unsafe { *out = Box::into_raw(handle) };
            CascadeStatus::Ok
        }
        Err(err) => {
            set_last_error(err.to_string());
            status_of(&err)
        }
    }
}

/// Parses a scenario from TOML text.
///
/// # Safety
/// `toml_text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cascade_scenario_parse(
    toml_text: *const c_char,
    out: *mut *mut CascadeScenario,
) -> CascadeStatus {
    if out.is_null() {
        set_last_error("NULL out pointer".into());
        return CascadeStatus::NullPointer;
    }
    let text = match cstr_arg(toml_text) {
        Ok(t) => t,
        Err(status) => return status,
    };
    load_into(out, parse_scenario(text, "scenario"))
}

/// Loads a scenario file from `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cascade_scenario_load(
    path: *const c_char,
    out: *mut *mut CascadeScenario,
) -> CascadeStatus {
    if out.is_null() {
        set_last_error("NULL out pointer".into());
        return CascadeStatus::NullPointer;
    }
    let path = match cstr_arg(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    load_into(out, load_scenario(Path::new(path)))
}

/// Releases a scenario handle. NULL is a no-op.
///
/// # Safety
/// `handle` must come from a `cascade_scenario_*` constructor and must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cascade_scenario_free(handle: *mut CascadeScenario) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Seed override, applied in place of the file's seed.
///
/// # Safety
/// `handle` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn cascade_scenario_set_seed(
    handle: *mut CascadeScenario,
    seed: u64,
) -> CascadeStatus {
    let Some(scenario) = handle.as_mut() else {
        set_last_error("NULL scenario handle".into());
        return CascadeStatus::NullPointer;
    };
    scenario.inner.config.seed = seed;
    CascadeStatus::Ok
}

/// Runs the scenario end to end, writing artifacts under `out_dir`
/// (or the scenario's own output directory when NULL).
///
/// # Safety
/// `handle` must be a live scenario handle; `out_dir` NULL or a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cascade_run(
    handle: *const CascadeScenario,
    out_dir: *const c_char,
) -> CascadeStatus {
    let Some(scenario) = handle.as_ref() else {
        set_last_error("NULL scenario handle".into());
        return CascadeStatus::NullPointer;
    };
    let mut scenario = scenario.inner.clone();
    if !out_dir.is_null() {
        match cstr_arg(out_dir) {
            Ok(dir) => scenario.out_dir = PathBuf::from(dir),
            Err(status) => return status,
        }
    }
    match run_experiment(&scenario) {
        Ok(outcome) if outcome.exit_code == cascade::runner::EXIT_BOUNDARY => {
            set_last_error("stability verdict is boundary-inconclusive".into());
            CascadeStatus::Boundary
        }
        Ok(outcome) if outcome.exit_code != 0 => {
            set_last_error("run produced partial results".into());
            CascadeStatus::RunFailed
        }
        Ok(_) => CascadeStatus::Ok,
        Err(err) => {
            set_last_error(err.to_string());
            status_of(&err)
        }
    }
}

/// Stability verdict of the scenario's system as a JSON document.
///
/// # Safety
/// `handle` must be a live scenario handle and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cascade_stability_json(
    handle: *const CascadeScenario,
    out_json: *mut *mut c_char,
) -> CascadeStatus {
    let Some(scenario) = handle.as_ref() else {
        set_last_error("NULL scenario handle".into());
        return CascadeStatus::NullPointer;
    };
    if out_json.is_null() {
        set_last_error("NULL out pointer".into());
        return CascadeStatus::NullPointer;
    }
    let scenario = &scenario.inner;
    let verdict = if scenario.config.station_count() == 2 {
        classify_two_station_with_epsilon(&scenario.config, scenario.epsilon)
    } else {
        backward_induction(
            &scenario.config,
            &SimBudget {
                horizon: scenario.horizon,
                replications: scenario.replications,
                warmup_fraction: scenario.warmup_fraction,
                batches: scenario.batches,
                epsilon: scenario.epsilon,
            },
        )
    };
    match verdict {
        Ok(v) => return_string(out_json, serde_json::to_string(&v).unwrap_or_default()),
        Err(err) => {
            set_last_error(err.to_string());
            status_of(&err)
        }
    }
}

/// Sweep rows (see the sweep model) as a JSON array.
///
/// # Safety
/// `handle` must be a live scenario handle and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cascade_sweep_json(
    handle: *const CascadeScenario,
    out_json: *mut *mut c_char,
) -> CascadeStatus {
    let Some(scenario) = handle.as_ref() else {
        set_last_error("NULL scenario handle".into());
        return CascadeStatus::NullPointer;
    };
    if out_json.is_null() {
        set_last_error("NULL out pointer".into());
        return CascadeStatus::NullPointer;
    }
    if scenario.inner.model != Model::Sweep {
        set_last_error("scenario does not declare model = \"sweep\"".into());
        return CascadeStatus::InvalidScenario;
    }
    match sweep_points(&scenario.inner) {
        Ok(rows) => return_string(out_json, serde_json::to_string(&rows).unwrap_or_default()),
        Err(err) => {
            set_last_error(err.to_string());
            status_of(&err)
        }
    }
}

/// Releases a string returned by this library. NULL is a no-op.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cascade_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Detailed message of the last failure on this thread, or NULL.
/// The caller owns the returned string.
#[no_mangle]
pub extern "C" fn cascade_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|msg| msg.clone().into_raw())
            .unwrap_or(ptr::null_mut())
    })
}
