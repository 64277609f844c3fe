//! C ABI for the teleport-sim simulator.
//!
//! Configs and results are opaque handles owned by the caller and released
//! with their `_free` function. Every fallible call returns a [`TsStatus`];
//! on failure [`ts_last_error`] describes the problem. Strings returned by
//! the library are released with [`ts_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use teleport_sim::analysis::{classical_bound_wcs, HeraldNormalization, WcsStrategy};
use teleport_sim::artifacts::report_json;
use teleport_sim::config::{ConfigError, ExperimentConfig};
use teleport_sim::scenario::{
    self, RunOptions, ScenarioError, ScenarioKind, ScenarioResult, SWEEP_RATES_KHZ,
};

/// Status codes; the non-zero parse, validation, infeasible and runtime codes
/// match the exit codes of the command-line tool.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsStatus {
    Ok = 0,
    NullPointer = 1,
    Parse = 2,
    Validation = 3,
    Infeasible = 4,
    Runtime = 5,
    InvalidArgument = 6,
    Panic = 7,
}

/// Simulation parameters.
pub struct TsConfig(ExperimentConfig);

/// Outcome of one scenario run.
pub struct TsResult(ScenarioResult);

/// A figure of merit with its one-sigma error; `present` is false when the
/// run had no counts for it.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TsEstimate {
    pub present: bool,
    pub value: f64,
    pub sigma: f64,
}

/// Mean fidelities of a run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TsFidelities {
    pub f_poles: TsEstimate,
    pub f_eq: TsEstimate,
    pub f_bar: TsEstimate,
    pub unconditional_f_eq: TsEstimate,
}

/// Photon-number strategy of the classical weak-coherent-state bound.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsWcsStrategy {
    StateEstimation = 0,
    UnambiguousDiscrimination = 1,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).expect("no interior nul"));
}

fn fail(status: TsStatus, message: impl Into<String>) -> TsStatus {
    set_error(message);
    status
}

fn config_status(e: &ConfigError) -> TsStatus {
    match e {
        ConfigError::Validation { .. } => TsStatus::Validation,
        ConfigError::Io { .. } | ConfigError::Parse(_) => TsStatus::Parse,
    }
}

fn scenario_status(e: &ScenarioError) -> TsStatus {
    match e {
        ScenarioError::Infeasible(_) => TsStatus::Infeasible,
        ScenarioError::Invalid(_) => TsStatus::Validation,
        _ => TsStatus::Runtime,
    }
}

fn guard(f: impl FnOnce() -> TsStatus) -> TsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == TsStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(TsStatus::Panic, "internal panic"),
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, TsStatus> {
    if s.is_null() {
        return Err(fail(TsStatus::NullPointer, "string argument is null"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(TsStatus::InvalidArgument, "string argument is not UTF-8"))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("no interior nul")
        .into_raw()
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ts_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn ts_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates the preset configuration of `scenario` ("short-distance",
/// "long-distance" or "rate-sweep").
///
/// # Safety
/// `scenario` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ts_config_preset(
    scenario: *const c_char,
    out: *mut *mut TsConfig,
) -> TsStatus {
    guard(|| {
        if out.is_null() {
            return fail(TsStatus::NullPointer, "out is null");
        }
        let name = match read_str(scenario) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let config = match ScenarioKind::parse(name) {
            Some(ScenarioKind::ShortDistance) => ExperimentConfig::short_distance(),
            Some(ScenarioKind::LongDistance) => ExperimentConfig::long_distance(),
            Some(ScenarioKind::RateSweep) => ExperimentConfig::rate_sweep(),
            None => {
                return fail(
                    TsStatus::InvalidArgument,
                    format!("unknown scenario {name:?}"),
                )
            }
        };
        *out = Box::into_raw(Box::new(TsConfig(config)));
        TsStatus::Ok
    })
}

/// Parses and validates a TOML configuration.
///
/// # Safety
/// `toml` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ts_config_from_toml(
    toml: *const c_char,
    out: *mut *mut TsConfig,
) -> TsStatus {
    guard(|| {
        if out.is_null() {
            return fail(TsStatus::NullPointer, "out is null");
        }
        let text = match read_str(toml) {
            Ok(s) => s,
            Err(s) => return s,
        };
        match ExperimentConfig::from_toml_str(text) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(TsConfig(c)));
                TsStatus::Ok
            }
            Err(e) => fail(config_status(&e), e.to_string()),
        }
    })
}

/// Releases a configuration; null is ignored.
///
/// # Safety
/// `config` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ts_config_free(config: *mut TsConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Sets the attempts per analyzer setting and the master seed.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ts_config_set_campaign(
    config: *mut TsConfig,
    n_attempts: u64,
    master_seed: u64,
) -> TsStatus {
    guard(|| match config.as_mut() {
        Some(c) => {
            c.0.campaign.n_attempts = n_attempts;
            c.0.campaign.master_seed = master_seed;
            TsStatus::Ok
        }
        None => fail(TsStatus::NullPointer, "config is null"),
    })
}

/// Sets the white-noise weight of the pair source.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ts_config_set_werner_noise(
    config: *mut TsConfig,
    weight: f64,
) -> TsStatus {
    guard(|| match config.as_mut() {
        Some(c) => {
            let mut next = c.0;
            next.spdc.werner_white_noise = weight;
            match next.validate() {
                Ok(()) => {
                    c.0 = next;
                    TsStatus::Ok
                }
                Err(e) => fail(config_status(&e), e.to_string()),
            }
        }
        None => fail(TsStatus::NullPointer, "config is null"),
    })
}

/// Storage time left after the herald arrives, μs; negative when late.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ts_config_storage_margin_us(
    config: *const TsConfig,
    out: *mut f64,
) -> TsStatus {
    guard(|| match (config.as_ref(), out.is_null()) {
        (Some(c), false) => {
            *out = c.0.timing_budget().remaining_margin_us;
            TsStatus::Ok
        }
        _ => fail(TsStatus::NullPointer, "config or out is null"),
    })
}

/// Single-mode rate limit (kHz, 0 when unbounded) and multiplexed rate
/// limit (MHz).
///
/// # Safety
/// `config` must be a live handle; both outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ts_config_rate_limits(
    config: *const TsConfig,
    single_mode_khz: *mut f64,
    multiplexed_mhz: *mut f64,
) -> TsStatus {
    guard(|| {
        let Some(c) = config.as_ref() else {
            return fail(TsStatus::NullPointer, "config is null");
        };
        if single_mode_khz.is_null() || multiplexed_mhz.is_null() {
            return fail(TsStatus::NullPointer, "output is null");
        }
        match scenario::limits(&c.0) {
            Ok(l) => {
                *single_mode_khz = l.single_mode_rate_khz.unwrap_or(0.0);
                *multiplexed_mhz = l.multiplexed_rate_mhz;
                TsStatus::Ok
            }
            Err(e) => fail(scenario_status(&e), e.to_string()),
        }
    })
}

/// Runs a scenario; rate sweeps use the standard rates.
///
/// # Safety
/// `config` must be a live handle, `scenario` a nul-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ts_run(
    config: *const TsConfig,
    scenario: *const c_char,
    strict: bool,
    out: *mut *mut TsResult,
) -> TsStatus {
    guard(|| {
        let Some(c) = config.as_ref() else {
            return fail(TsStatus::NullPointer, "config is null");
        };
        if out.is_null() {
            return fail(TsStatus::NullPointer, "out is null");
        }
        let name = match read_str(scenario) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let Some(kind) = ScenarioKind::parse(name) else {
            return fail(
                TsStatus::InvalidArgument,
                format!("unknown scenario {name:?}"),
            );
        };
        let options = RunOptions::from_config(&c.0, strict);
        let mut sink = |_: &_, _: &_| {};
        let result = match kind {
            ScenarioKind::ShortDistance => {
                scenario::scenario_short_distance(&c.0, &options, &mut sink)
            }
            ScenarioKind::LongDistance => {
                scenario::scenario_long_distance(&c.0, &options, &mut sink)
            }
            ScenarioKind::RateSweep => {
                scenario::scenario_rate_sweep(&c.0, &SWEEP_RATES_KHZ, &options, &mut sink)
            }
        };
        match result {
            Ok(r) => {
                *out = Box::into_raw(Box::new(TsResult(r)));
                TsStatus::Ok
            }
            Err(e) => fail(scenario_status(&e), e.to_string()),
        }
    })
}

/// Releases a result; null is ignored.
///
/// # Safety
/// `result` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ts_result_free(result: *mut TsResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

fn estimate(e: Option<teleport_sim::analysis::Estimate>) -> TsEstimate {
    e.map(|e| TsEstimate {
        present: true,
        value: e.value,
        sigma: e.sigma,
    })
    .unwrap_or_default()
}

/// Fidelities from sampled counts (`expected` false) or expected counts.
///
/// # Safety
/// `result` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ts_result_fidelities(
    result: *const TsResult,
    expected: bool,
    out: *mut TsFidelities,
) -> TsStatus {
    guard(|| {
        let Some(r) = result.as_ref() else {
            return fail(TsStatus::NullPointer, "result is null");
        };
        if out.is_null() {
            return fail(TsStatus::NullPointer, "out is null");
        }
        let report = if expected {
            &r.0.expected_report
        } else {
            &r.0.report
        };
        *out = match report {
            Some(rep) => TsFidelities {
                f_poles: estimate(rep.f_poles),
                f_eq: estimate(rep.f_eq),
                f_bar: estimate(rep.f_bar),
                unconditional_f_eq: estimate(rep.unconditional_f_eq),
            },
            None => TsFidelities::default(),
        };
        TsStatus::Ok
    })
}

/// The full result as JSON; release with [`ts_string_free`].
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ts_result_json(result: *const TsResult) -> *mut c_char {
    match result.as_ref() {
        Some(r) => to_c_string(report_json(&r.0)),
        None => {
            set_error("result is null");
            ptr::null_mut()
        }
    }
}

/// Coincidence histogram as CSV; release with [`ts_string_free`].
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ts_result_histogram_csv(result: *const TsResult) -> *mut c_char {
    match result.as_ref() {
        Some(r) => to_c_string(r.0.histogram.to_csv()),
        None => {
            set_error("result is null");
            ptr::null_mut()
        }
    }
}

/// Releases a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ts_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Classical fidelity limit for weak coherent input of mean `mu` heralded
/// with probability `herald_efficiency` per attempt.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ts_classical_bound_wcs(
    mu: f64,
    herald_efficiency: f64,
    strategy: TsWcsStrategy,
    n_usd: u32,
    out: *mut f64,
) -> TsStatus {
    guard(|| {
        if out.is_null() {
            return fail(TsStatus::NullPointer, "out is null");
        }
        let s = match strategy {
            TsWcsStrategy::StateEstimation => WcsStrategy::StateEstimation,
            TsWcsStrategy::UnambiguousDiscrimination => {
                WcsStrategy::UnambiguousDiscrimination { n_usd }
            }
        };
        match classical_bound_wcs(mu, herald_efficiency, s, HeraldNormalization::PerAttempt) {
            Ok(v) => {
                *out = v;
                TsStatus::Ok
            }
            Err(e) => fail(TsStatus::InvalidArgument, e.to_string()),
        }
    })
}
