//! C ABI over the maritime MEC simulator.
//!
//! Handles are opaque and owned by the caller; every `*_new` / `*_from_*`
//! has a matching `*_free`. Fallible calls return an [`MmStatus`] and leave
//! a message retrievable with [`mm_last_error`] on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use maritime_mec::{oracle, Error, Policy, RunSummary, ScenarioConfig, Simulation};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidConfig = 4,
    Io = 5,
    Infeasible = 6,
    /// The simulation already reached its horizon.
    Finished = 7,
    Panic = 8,
    Internal = 9,
}

/// Scenario configuration handle.
pub struct MmConfig(ScenarioConfig);

/// Running simulation handle.
pub struct MmSimulation(Simulation);

/// Per-slot figures copied out of a step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MmSlotStats {
    pub slot: u64,
    pub throughput_bps: f64,
    pub total_queue: u64,
    pub processed_tasks: u64,
    pub migrated_tasks: u64,
    pub dropped_tasks: u64,
    /// Number of MISs whose energy request was clamped this slot.
    pub clamped_mis: u32,
    pub drift: f64,
    pub drift_bound: f64,
}

/// Run-level averages. Latency is negative when no task arrived.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MmSummary {
    pub slots: u64,
    pub seed: u64,
    pub avg_throughput_bps: f64,
    pub avg_latency_slots: f64,
    pub avg_queue_tasks: f64,
    pub avg_energy_j: f64,
    pub max_final_z_over_t: f64,
    pub violation_rate: f64,
    pub violation_rate_final_half: f64,
    pub drift_violations: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: MmStatus, msg: impl Into<String>) -> MmStatus {
    set_error(msg);
    status
}

fn status_of(err: &Error) -> MmStatus {
    match err {
        Error::Io { .. } => MmStatus::Io,
        Error::Parse(_) => MmStatus::Parse,
        Error::InvalidField { .. } | Error::NonPositiveDistance(_) => MmStatus::InvalidConfig,
        Error::InfeasibleMigration { .. } | Error::Infeasible(_) => MmStatus::Infeasible,
        _ => MmStatus::Internal,
    }
}

fn from_error(err: Error) -> MmStatus {
    fail(status_of(&err), err.to_string())
}

/// Runs `body`, turning panics into [`MmStatus::Panic`].
fn guard(body: impl FnOnce() -> MmStatus) -> MmStatus {
    catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|payload| {
        let msg = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        fail(MmStatus::Panic, format!("panic: {msg}"))
    })
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, MmStatus> {
    if p.is_null() {
        return Err(fail(MmStatus::NullPointer, "string argument is null"));
    }
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|e| fail(MmStatus::InvalidUtf8, e.to_string()))
}

fn boxed<T>(value: T, out: *mut *mut T) -> MmStatus {
    unsafe { *out = Box::into_raw(Box::new(value)) };
    MmStatus::Ok
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default scenario. Never returns null.
#[no_mangle]
pub extern "C" fn mm_config_default() -> *mut MmConfig {
    Box::into_raw(Box::new(MmConfig(ScenarioConfig::default())))
}

/// Parses and validates a TOML scenario; missing keys take defaults.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mm_config_from_toml(toml: *const c_char, out: *mut *mut MmConfig) -> MmStatus {
    guard(|| {
        if out.is_null() {
            return fail(MmStatus::NullPointer, "out is null");
        }
        let text = match unsafe { str_arg(toml) } {
            Ok(t) => t,
            Err(s) => return s,
        };
        match ScenarioConfig::from_toml_str(text).and_then(|c| c.validate().map(|_| c)) {
            Ok(cfg) => boxed(MmConfig(cfg), out),
            Err(e) => from_error(e),
        }
    })
}

/// Loads and validates a TOML scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mm_config_load(path: *const c_char, out: *mut *mut MmConfig) -> MmStatus {
    guard(|| {
        if out.is_null() {
            return fail(MmStatus::NullPointer, "out is null");
        }
        let path = match unsafe { str_arg(path) } {
            Ok(p) => p,
            Err(s) => return s,
        };
        match ScenarioConfig::load(path).and_then(|c| c.validate().map(|_| c)) {
            Ok(cfg) => boxed(MmConfig(cfg), out),
            Err(e) => from_error(e),
        }
    })
}

/// Resolved configuration as TOML. Free the result with [`mm_string_free`].
///
/// # Safety
/// `cfg` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mm_config_to_toml(cfg: *const MmConfig) -> *mut c_char {
    let Some(cfg) = (unsafe { cfg.as_ref() }) else {
        set_error("config is null");
        return ptr::null_mut();
    };
    let text = cfg.0.to_toml_string().replace('\0', " ");
    CString::new(text).expect("nul bytes removed").into_raw()
}

/// # Safety
/// `cfg` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mm_config_set_seed(cfg: *mut MmConfig, seed: u64) -> MmStatus {
    match unsafe { cfg.as_mut() } {
        Some(c) => {
            c.0.sim.seed = seed;
            MmStatus::Ok
        }
        None => fail(MmStatus::NullPointer, "config is null"),
    }
}

/// # Safety
/// `cfg` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mm_config_set_horizon(cfg: *mut MmConfig, slots: u64) -> MmStatus {
    match unsafe { cfg.as_mut() } {
        Some(c) => {
            c.0.sim.horizon_slots = slots;
            MmStatus::Ok
        }
        None => fail(MmStatus::NullPointer, "config is null"),
    }
}

/// Policy by name: `jcora`, `fra`, `lra`, `pra` or `tra`.
///
/// # Safety
/// `cfg` must be a live handle or null; `name` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mm_config_set_policy(cfg: *mut MmConfig, name: *const c_char) -> MmStatus {
    let Some(c) = (unsafe { cfg.as_mut() }) else {
        return fail(MmStatus::NullPointer, "config is null");
    };
    let name = match unsafe { str_arg(name) } {
        Ok(n) => n,
        Err(s) => return s,
    };
    match name.parse::<Policy>() {
        Ok(p) => {
            c.0.control.policy = p;
            MmStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// # Safety
/// `cfg` must be a live handle or null; `control_v` finite and nonnegative.
#[no_mangle]
pub unsafe extern "C" fn mm_config_set_control_v(cfg: *mut MmConfig, control_v: f64) -> MmStatus {
    let Some(c) = (unsafe { cfg.as_mut() }) else {
        return fail(MmStatus::NullPointer, "config is null");
    };
    let mut next = c.0.clone();
    next.control.control_v = control_v;
    match next.validate() {
        Ok(()) => {
            c.0 = next;
            MmStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// # Safety
/// `cfg` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn mm_config_free(cfg: *mut MmConfig) {
    if !cfg.is_null() {
        drop(unsafe { Box::from_raw(cfg) });
    }
}

/// Starts a simulation from a copy of `cfg`.
///
/// # Safety
/// `cfg` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mm_simulation_new(cfg: *const MmConfig, out: *mut *mut MmSimulation) -> MmStatus {
    guard(|| {
        let Some(cfg) = (unsafe { cfg.as_ref() }) else {
            return fail(MmStatus::NullPointer, "config is null");
        };
        if out.is_null() {
            return fail(MmStatus::NullPointer, "out is null");
        }
        match Simulation::new(cfg.0.clone()) {
            Ok(sim) => boxed(MmSimulation(sim), out),
            Err(e) => from_error(e),
        }
    })
}

/// Advances one slot. Returns [`MmStatus::Finished`] at the horizon.
///
/// # Safety
/// `sim` must be a live handle; `out` writable or null.
#[no_mangle]
pub unsafe extern "C" fn mm_simulation_step(sim: *mut MmSimulation, out: *mut MmSlotStats) -> MmStatus {
    guard(|| {
        let Some(sim) = (unsafe { sim.as_mut() }) else {
            return fail(MmStatus::NullPointer, "simulation is null");
        };
        if sim.0.state().slot >= sim.0.config().sim.horizon_slots {
            return fail(MmStatus::Finished, "horizon reached");
        }
        let rec = sim.0.step();
        if let Some(out) = unsafe { out.as_mut() } {
            *out = MmSlotStats {
                slot: rec.slot,
                throughput_bps: rec.throughput_bps,
                total_queue: rec.total_queue(),
                processed_tasks: rec.processed_tasks,
                migrated_tasks: rec.migrated_tasks,
                dropped_tasks: rec.dropped_tasks,
                clamped_mis: rec.energy_clamped.iter().filter(|&&c| c).count() as u32,
                drift: rec.drift,
                drift_bound: rec.drift_bound,
            };
        }
        MmStatus::Ok
    })
}

fn summary_of(s: &RunSummary) -> MmSummary {
    MmSummary {
        slots: s.slots,
        seed: s.seed,
        avg_throughput_bps: s.avg_throughput_bps,
        avg_latency_slots: s.avg_latency_slots.unwrap_or(-1.0),
        avg_queue_tasks: s.avg_queue_tasks,
        avg_energy_j: s.avg_energy_j,
        max_final_z_over_t: s.max_final_z_over_t,
        violation_rate: s.violation_rate,
        violation_rate_final_half: s.violation_rate_final_half,
        drift_violations: s.drift_violations,
    }
}

/// Runs the remaining slots and writes the summary.
///
/// # Safety
/// `sim` must be a live handle; `out` writable or null.
#[no_mangle]
pub unsafe extern "C" fn mm_simulation_run(sim: *mut MmSimulation, out: *mut MmSummary) -> MmStatus {
    guard(|| {
        let Some(sim) = (unsafe { sim.as_mut() }) else {
            return fail(MmStatus::NullPointer, "simulation is null");
        };
        match sim.0.run(&mut maritime_mec::sim::NullSink) {
            Ok(s) => {
                if let Some(out) = unsafe { out.as_mut() } {
                    *out = summary_of(&s);
                }
                MmStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Summary of the slots simulated so far.
///
/// # Safety
/// `sim` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mm_simulation_summary(sim: *const MmSimulation, out: *mut MmSummary) -> MmStatus {
    guard(|| {
        let Some(sim) = (unsafe { sim.as_ref() }) else {
            return fail(MmStatus::NullPointer, "simulation is null");
        };
        let Some(out) = (unsafe { out.as_mut() }) else {
            return fail(MmStatus::NullPointer, "out is null");
        };
        *out = summary_of(&sim.0.summary());
        MmStatus::Ok
    })
}

/// Full summary as JSON. Free the result with [`mm_string_free`].
///
/// # Safety
/// `sim` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mm_simulation_summary_json(sim: *const MmSimulation) -> *mut c_char {
    let Some(sim) = (unsafe { sim.as_ref() }) else {
        set_error("simulation is null");
        return ptr::null_mut();
    };
    match serde_json::to_string(&sim.0.summary()) {
        Ok(s) => CString::new(s).map_or(ptr::null_mut(), CString::into_raw),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `sim` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn mm_simulation_free(sim: *mut MmSimulation) {
    if !sim.is_null() {
        drop(unsafe { Box::from_raw(sim) });
    }
}

/// Certifies the scheduler against exhaustive search on `instances` random
/// small instances. Writes the number certified.
///
/// # Safety
/// `certified` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mm_validate(instances: u32, seed: u64, certified: *mut u32) -> MmStatus {
    guard(|| {
        let Some(out) = (unsafe { certified.as_mut() }) else {
            return fail(MmStatus::NullPointer, "certified is null");
        };
        let report = oracle::certify(instances as usize, seed);
        *out = report.certified as u32;
        MmStatus::Ok
    })
}

/// # Safety
/// `s` must be a string returned by this library, or null.
#[no_mangle]
pub unsafe extern "C" fn mm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
