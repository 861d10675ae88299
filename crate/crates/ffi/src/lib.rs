//! C ABI for the controller, observer and simulation harness.
//!
//! Objects cross the boundary as opaque handles created by `*_new`, `*_run`
//! or `*_load` and released by the matching `*_free`. Every fallible call
//! returns an `AeroppcStatus` code; the message of the most recent failure
//! on the calling thread is available from `aeroppc_last_error`. Strings
//! are copied into caller buffers and always NUL-terminated.

// Entry points validate pointers themselves; C callers cannot see `unsafe`.
#![allow(clippy::not_unsafe_ptr_arg_deref)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use aeroppc::control::ControllerVariant;
use aeroppc::envelope::{beta_at, rho_at, PerformanceEnvelope, PresetTrajectory};
use aeroppc::eso::{gain_g, GainFunctionParams, VariableGainEsoUnit};
use aeroppc::harness::{column_names, run_trial, summarize, ExperimentConfig, TrialRecord};
use aeroppc::so3::Vec3;
use aeroppc::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AeroppcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    BufferTooSmall = 4,
    OutOfRange = 5,
    ConfigInvalid = 10,
    Io = 11,
    NonFiniteState = 12,
    NearSingularAttitude = 13,
    InfeasibleEnvelope = 14,
    DegenerateThrust = 15,
    NegativeTime = 16,
    NonSkewInput = 17,
    YawAlignmentSingularity = 18,
    InsufficientHistory = 19,
    Panic = 99,
}

/// Controller variants accepted by `aeroppc_trial_run`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AeroppcVariant {
    Proposed = 0,
    NoPreset = 1,
    NoEso = 2,
    Pid = 3,
}

/// Opaque experiment configuration.
pub struct AeroppcConfig(ExperimentConfig);

/// Opaque trial result: the row-major trace and its metadata.
pub struct AeroppcTrial(TrialRecord);

/// Opaque scalar variable-gain observer.
pub struct AeroppcEso(VariableGainEsoUnit);

struct Failure {
    status: AeroppcStatus,
    message: String,
}

impl Failure {
    fn new(status: AeroppcStatus, message: impl Into<String>) -> Self {
        Failure { status, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::NonSkewInput { .. } => AeroppcStatus::NonSkewInput,
            Error::NearSingularAttitude { .. } => AeroppcStatus::NearSingularAttitude,
            Error::NegativeTime(_) => AeroppcStatus::NegativeTime,
            Error::InfeasibleEnvelope { .. } => AeroppcStatus::InfeasibleEnvelope,
            Error::NonFiniteState { .. } => AeroppcStatus::NonFiniteState,
            Error::DegenerateThrust(_) => AeroppcStatus::DegenerateThrust,
            Error::YawAlignmentSingularity => AeroppcStatus::YawAlignmentSingularity,
            Error::InsufficientHistory { .. } => AeroppcStatus::InsufficientHistory,
            Error::ConfigInvalid(_) => AeroppcStatus::ConfigInvalid,
            Error::Io(_) => AeroppcStatus::Io,
        };
        Failure::new(status, e.to_string())
    }
}

type FfiResult<T> = std::result::Result<T, Failure>;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_last_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.push_str(msg);
    });
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> AeroppcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AeroppcStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            AeroppcStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    // SAFETY: callers pass either null or a pointer obtained from this library.
    unsafe { p.as_ref() }.ok_or_else(|| Failure::new(AeroppcStatus::NullPointer, format!("{what} is null")))
}

fn non_null_mut<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    // SAFETY: as for `non_null`; the caller guarantees exclusive access.
    unsafe { p.as_mut() }.ok_or_else(|| Failure::new(AeroppcStatus::NullPointer, format!("{what} is null")))
}

fn c_str<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Failure::new(AeroppcStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: non-null and NUL-terminated by contract.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure::new(AeroppcStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn put<T>(out: *mut T, value: T, what: &str) -> FfiResult<()> {
    *non_null_mut(out, what)? = value;
    Ok(())
}

/// Copies `s` plus a NUL into `buf`. `needed` (optional) receives the
/// required size in bytes, so a first call with a null buffer sizes it.
fn copy_str(s: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> FfiResult<()> {
    let need = s.len() + 1;
    if !needed.is_null() {
        // SAFETY: non-null by the check above.
        unsafe { *needed = need };
    }
    if buf.is_null() || len < need {
        return Err(Failure::new(AeroppcStatus::BufferTooSmall, format!("buffer needs {need} bytes, got {len}")));
    }
    // SAFETY: `buf` holds at least `need` bytes.
    unsafe {
        ptr::copy_nonoverlapping(s.as_ptr(), buf.cast::<u8>(), s.len());
        *buf.add(s.len()) = 0;
    }
    Ok(())
}

fn variant_from(code: c_int) -> FfiResult<ControllerVariant> {
    Ok(match code {
        0 => ControllerVariant::Proposed,
        1 => ControllerVariant::NoPresetTrajectory,
        2 => ControllerVariant::NoEso,
        3 => ControllerVariant::BaselinePid,
        _ => return Err(Failure::new(AeroppcStatus::InvalidArgument, format!("unknown variant code {code}"))),
    })
}

fn boxed<T>(out: *mut *mut T, value: T, what: &str) -> FfiResult<()> {
    let slot = non_null_mut(out, what)?;
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

/// Static name of a status code, e.g. `"ConfigInvalid"`.
#[no_mangle]
pub extern "C" fn aeroppc_status_name(status: c_int) -> *const c_char {
    let s: &'static CStr = match status {
        0 => c"Ok",
        1 => c"NullPointer",
        2 => c"InvalidUtf8",
        3 => c"InvalidArgument",
        4 => c"BufferTooSmall",
        5 => c"OutOfRange",
        10 => c"ConfigInvalid",
        11 => c"Io",
        12 => c"NonFiniteState",
        13 => c"NearSingularAttitude",
        14 => c"InfeasibleEnvelope",
        15 => c"DegenerateThrust",
        16 => c"NegativeTime",
        17 => c"NonSkewInput",
        18 => c"YawAlignmentSingularity",
        19 => c"InsufficientHistory",
        99 => c"Panic",
        _ => c"Unknown",
    };
    s.as_ptr()
}

/// Copies the last failure message of this thread into `buf` and returns
/// the size it needs including the NUL. Truncates when `len` is smaller.
#[no_mangle]
pub extern "C" fn aeroppc_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            // SAFETY: `buf` holds `len` bytes and `n < len`.
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
        }
        bytes.len() + 1
    })
}

/// The shipped default configuration.
#[no_mangle]
pub extern "C" fn aeroppc_config_default(out: *mut *mut AeroppcConfig) -> AeroppcStatus {
    guard(|| boxed(out, AeroppcConfig(ExperimentConfig::default()), "out"))
}

/// Parses and validates a TOML configuration.
#[no_mangle]
pub extern "C" fn aeroppc_config_from_toml(toml: *const c_char, out: *mut *mut AeroppcConfig) -> AeroppcStatus {
    guard(|| {
        let cfg = ExperimentConfig::from_toml_str(c_str(toml, "toml")?)?;
        boxed(out, AeroppcConfig(cfg), "out")
    })
}

/// Loads and validates a TOML configuration file.
#[no_mangle]
pub extern "C" fn aeroppc_config_load(path: *const c_char, out: *mut *mut AeroppcConfig) -> AeroppcStatus {
    guard(|| {
        let cfg = ExperimentConfig::load(Path::new(c_str(path, "path")?))?;
        boxed(out, AeroppcConfig(cfg), "out")
    })
}

/// SHA-256 of the canonical configuration, as 64 hex characters.
#[no_mangle]
pub extern "C" fn aeroppc_config_hash(
    config: *const AeroppcConfig,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> AeroppcStatus {
    guard(|| copy_str(&non_null(config, "config")?.0.hash(), buf, len, needed))
}

#[no_mangle]
pub extern "C" fn aeroppc_config_free(config: *mut AeroppcConfig) {
    if !config.is_null() {
        // SAFETY: created by `Box::into_raw` in this library and freed once.
        drop(unsafe { Box::from_raw(config) });
    }
}

/// Runs one closed-loop trial of `scenario` with the given variant and seed.
#[no_mangle]
pub extern "C" fn aeroppc_trial_run(
    config: *const AeroppcConfig,
    scenario: *const c_char,
    variant: c_int,
    seed: u64,
    out: *mut *mut AeroppcTrial,
) -> AeroppcStatus {
    guard(|| {
        let cfg = non_null(config, "config")?;
        let name = c_str(scenario, "scenario")?;
        let record = run_trial(&cfg.0, name, variant_from(variant)?, seed)?;
        boxed(out, AeroppcTrial(record), "out")
    })
}

/// Number of trace rows (control ticks), or 0 for a null handle.
#[no_mangle]
pub extern "C" fn aeroppc_trial_rows(trial: *const AeroppcTrial) -> usize {
    non_null(trial, "trial").map(|t| t.0.rows()).unwrap_or(0)
}

/// Number of trace columns.
#[no_mangle]
pub extern "C" fn aeroppc_trial_columns() -> usize {
    column_names().len()
}

/// Name of trace column `column`.
#[no_mangle]
pub extern "C" fn aeroppc_trial_column_name(
    column: usize,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> AeroppcStatus {
    guard(|| {
        let names = column_names();
        let name = names
            .get(column)
            .ok_or_else(|| Failure::new(AeroppcStatus::OutOfRange, format!("column {column} of {}", names.len())))?;
        copy_str(name, buf, len, needed)
    })
}

/// Borrowed pointer to the row-major trace, valid until the trial is freed.
/// Null for a null handle.
#[no_mangle]
pub extern "C" fn aeroppc_trial_data(trial: *const AeroppcTrial) -> *const f64 {
    non_null(trial, "trial").map(|t| t.0.data.as_ptr()).unwrap_or(ptr::null())
}

/// One trace value.
#[no_mangle]
pub extern "C" fn aeroppc_trial_value(
    trial: *const AeroppcTrial,
    row: usize,
    column: usize,
    out: *mut f64,
) -> AeroppcStatus {
    guard(|| {
        let t = non_null(trial, "trial")?;
        let cols = column_names().len();
        if row >= t.0.rows() || column >= cols {
            return Err(Failure::new(
                AeroppcStatus::OutOfRange,
                format!("cell ({row}, {column}) outside {} x {cols}", t.0.rows()),
            ));
        }
        put(out, t.0.get(row, column), "out")
    })
}

/// Writes the trace as CSV.
#[no_mangle]
pub extern "C" fn aeroppc_trial_write_csv(trial: *const AeroppcTrial, path: *const c_char) -> AeroppcStatus {
    guard(|| {
        let t = non_null(trial, "trial")?;
        let file = std::fs::File::create(c_str(path, "path")?).map_err(Error::from)?;
        t.0.write_csv(std::io::BufWriter::new(file)).map_err(Error::from)?;
        Ok(())
    })
}

/// Metadata and summary metrics as a JSON object.
#[no_mangle]
pub extern "C" fn aeroppc_trial_summary_json(
    trial: *const AeroppcTrial,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> AeroppcStatus {
    guard(|| {
        let t = non_null(trial, "trial")?;
        let body = serde_json::json!({
            "meta": t.0.meta,
            "metrics": summarize(&t.0),
            "trace_sha256": t.0.trace_sha256(),
        });
        copy_str(&body.to_string(), buf, len, needed)
    })
}

/// SHA-256 of the trace values, as 64 hex characters.
#[no_mangle]
pub extern "C" fn aeroppc_trial_sha256(
    trial: *const AeroppcTrial,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> AeroppcStatus {
    guard(|| copy_str(&non_null(trial, "trial")?.0.trace_sha256(), buf, len, needed))
}

#[no_mangle]
pub extern "C" fn aeroppc_trial_free(trial: *mut AeroppcTrial) {
    if !trial.is_null() {
        // SAFETY: created by `Box::into_raw` in this library and freed once.
        drop(unsafe { Box::from_raw(trial) });
    }
}

/// Scalar observer with gain parameters `w`, `d`, started at `y1_initial`.
#[no_mangle]
pub extern "C" fn aeroppc_eso_new(
    alpha: f64,
    epsilon: f64,
    w: f64,
    d: f64,
    y1_initial: f64,
    out: *mut *mut AeroppcEso,
) -> AeroppcStatus {
    guard(|| {
        let unit = VariableGainEsoUnit::new(alpha, epsilon, GainFunctionParams::new(w, d)?, y1_initial)?;
        boxed(out, AeroppcEso(unit), "out")
    })
}

/// One observer tick: estimate from `y1`, then advance with input `u`.
#[no_mangle]
pub extern "C" fn aeroppc_eso_step(
    eso: *mut AeroppcEso,
    y1: f64,
    u: f64,
    dt: f64,
    estimate: *mut f64,
) -> AeroppcStatus {
    guard(|| {
        let unit = non_null_mut(eso, "eso")?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Failure::new(AeroppcStatus::InvalidArgument, format!("dt must be > 0, got {dt}")));
        }
        let est = unit.0.step(y1, u, dt)?;
        put(estimate, est, "estimate")
    })
}

#[no_mangle]
pub extern "C" fn aeroppc_eso_free(eso: *mut AeroppcEso) {
    if !eso.is_null() {
        // SAFETY: created by `Box::into_raw` in this library and freed once.
        drop(unsafe { Box::from_raw(eso) });
    }
}

/// Observer gain `g(e)`.
#[no_mangle]
pub extern "C" fn aeroppc_gain_g(e: f64, w: f64, d: f64, out: *mut f64) -> AeroppcStatus {
    guard(|| {
        let params = GainFunctionParams::new(w, d)?;
        put(out, gain_g(e, &params), "out")
    })
}

/// Single-axis envelope `ρ(t)`.
#[no_mangle]
pub extern "C" fn aeroppc_rho_at(rho0: f64, rho_inf: f64, decay: f64, t: f64, out: *mut f64) -> AeroppcStatus {
    guard(|| {
        let env = PerformanceEnvelope::new(Vec3::repeat(rho0), Vec3::repeat(rho_inf), decay)?;
        put(out, rho_at(&env, t)?[0], "out")
    })
}

/// Single-axis preset trajectory `β(t)` and its first two derivatives.
/// Any of the output pointers may be null.
#[no_mangle]
pub extern "C" fn aeroppc_beta_at(
    error0: f64,
    error_rate0: f64,
    c: f64,
    decay: f64,
    t: f64,
    beta: *mut f64,
    dbeta: *mut f64,
    ddbeta: *mut f64,
) -> AeroppcStatus {
    guard(|| {
        if t < 0.0 {
            return Err(Error::NegativeTime(t).into());
        }
        let traj =
            PresetTrajectory::from_initial_error(Vec3::repeat(error0), Vec3::repeat(error_rate0), Vec3::repeat(c), decay)?;
        let s = beta_at(&traj, t);
        for (p, v) in [(beta, s.beta[0]), (dbeta, s.dbeta[0]), (ddbeta, s.ddbeta[0])] {
            if !p.is_null() {
                // SAFETY: non-null output pointer supplied by the caller.
                unsafe { *p = v };
            }
        }
        Ok(())
    })
}
