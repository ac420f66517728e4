//! C ABI over the seasonal-dispatch library.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns an
//! [`SdStatus`]; the message of the last failure on the calling thread is
//! available from [`sd_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use seasonal_dispatch::data::{generate_synthetic, ingest, CaseConfig, SyntheticSpec};
use seasonal_dispatch::error::EngineError;
use seasonal_dispatch::horizon::{
    min_prediction_horizon, run_rolling, solve_full_horizon, suboptimality_gap, write_trace_csv, EngineConfig,
    RollingPolicy, SimulationTrace, StoreLevels, TargetSeries, YearBoundary,
};
use seasonal_dispatch::network::{
    leaky_fill_horizon, storage_durations, EnergyNetwork, HeatPumpParams, NodeId, SeriesBundle, StorageParams,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdStatus {
    Ok = 0,
    /// A window had no feasible schedule.
    Infeasible = 1,
    /// Null pointer, bad length or out-of-range parameter.
    InvalidArgument = 2,
    /// Config or data files could not be read.
    InputError = 3,
    /// Solver limit or numerical failure.
    SolverError = 4,
    /// Unexpected internal failure.
    Internal = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdStorage {
    Battery = 0,
    HeatStorage = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdMethod {
    /// Heat-storage targets from a reference year, battery free.
    Hybrid = 0,
    /// Both storages return to their window-start levels.
    FixedLevel = 1,
    /// No end conditions before the end of the period.
    Free = 2,
}

/// Storage parameters. Energies in kWh, powers in kW, `retention` is the
/// fraction kept per hour. A NaN `e_end` means "same as `e_init`".
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdStorageParams {
    pub eta_ch: f64,
    pub eta_dis: f64,
    pub retention: f64,
    pub e_min: f64,
    pub e_max: f64,
    pub p_ch_max: f64,
    pub p_dis_max: f64,
    pub e_init: f64,
    pub e_end: f64,
}

impl From<&StorageParams> for SdStorageParams {
    fn from(p: &StorageParams) -> Self {
        SdStorageParams {
            eta_ch: p.eta_ch,
            eta_dis: p.eta_dis,
            retention: p.retention,
            e_min: p.e_min,
            e_max: p.e_max,
            p_ch_max: p.p_ch_max,
            p_dis_max: p.p_dis_max,
            e_init: p.e_init,
            e_end: p.e_end.unwrap_or(f64::NAN),
        }
    }
}

impl From<&SdStorageParams> for StorageParams {
    fn from(p: &SdStorageParams) -> Self {
        StorageParams {
            eta_ch: p.eta_ch,
            eta_dis: p.eta_dis,
            retention: p.retention,
            e_min: p.e_min,
            e_max: p.e_max,
            p_ch_max: p.p_ch_max,
            p_dis_max: p.p_dis_max,
            e_init: p.e_init,
            e_end: (!p.e_end.is_nan()).then_some(p.e_end),
        }
    }
}

/// Device parameters and topology.
pub struct SdNetwork(EnergyNetwork);

/// Per-hour input series.
pub struct SdSeries(SeriesBundle);

/// Result of a full-horizon or rolling simulation.
pub struct SdTrace(SimulationTrace);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Fail(SdStatus, String);

impl Fail {
    fn arg(msg: impl Into<String>) -> Self {
        Fail(SdStatus::InvalidArgument, msg.into())
    }
}

impl From<EngineError> for Fail {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::Infeasible { .. } => SdStatus::Infeasible,
            EngineError::Solver(_) | EngineError::LimitReached { .. } | EngineError::Unbounded { .. } => {
                SdStatus::SolverError
            }
            _ => SdStatus::InvalidArgument,
        };
        Fail(status, e.to_string())
    }
}

/// Runs `f`, records its error message and turns panics into `Internal`.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SdStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SdStatus::Internal
        }
    }
}

/// Like [`guard`] for constructors; returns null on failure.
fn guard_new<T>(f: impl FnOnce() -> Result<T, Fail>) -> *mut T {
    let mut out = ptr::null_mut();
    guard(|| {
        out = Box::into_raw(Box::new(f()?));
        Ok(())
    });
    out
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail::arg(format!("{name} is null")))
}

unsafe fn write<T>(p: *mut T, v: T, name: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail::arg(format!("{name} is null")));
    }
    p.write(v);
    Ok(())
}

unsafe fn slice<'a>(p: *const f64, n: usize, name: &str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::arg(format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn engine(dt_hours: f64) -> Result<EngineConfig, Fail> {
    if !(dt_hours > 0.0 && 24.0 % dt_hours == 0.0) {
        return Err(Fail::arg(format!("time step {dt_hours} h must divide 24 h")));
    }
    Ok(EngineConfig {
        dt_hours,
        ..EngineConfig::default()
    })
}

fn node(s: SdStorage) -> NodeId {
    match s {
        SdStorage::Battery => NodeId::Se,
        SdStorage::HeatStorage => NodeId::Sh,
    }
}

/// Message of the last failed call on this thread, or an empty string.
/// Valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn sd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reference parameters of the battery or the heat storage.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sd_storage_reference(which: SdStorage, out: *mut SdStorageParams) -> SdStatus {
    guard(|| {
        let p = match which {
            SdStorage::Battery => StorageParams::reference_battery(),
            SdStorage::HeatStorage => StorageParams::reference_heat_storage(),
        };
        write(out, SdStorageParams::from(&p), "out")
    })
}

/// Hours to fill the usable range at full charge power and to empty it at
/// full discharge power, ignoring self-discharge.
///
/// # Safety
/// `params` must point to a valid struct; the outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sd_storage_durations(
    params: *const SdStorageParams,
    charge_hours: *mut f64,
    discharge_hours: *mut f64,
) -> SdStatus {
    guard(|| {
        let sp = StorageParams::from(deref(params, "params")?);
        let (c, d) = storage_durations(&sp).map_err(|e| Fail::arg(e.to_string()))?;
        write(charge_hours, c, "charge_hours")?;
        write(discharge_hours, d, "discharge_hours")
    })
}

/// Same as [`sd_storage_durations`] with self-discharge taken into account.
///
/// # Safety
/// As for [`sd_storage_durations`].
#[no_mangle]
pub unsafe extern "C" fn sd_leaky_fill_horizon(
    params: *const SdStorageParams,
    charge_hours: *mut f64,
    discharge_hours: *mut f64,
) -> SdStatus {
    guard(|| {
        let sp = StorageParams::from(deref(params, "params")?);
        let h = leaky_fill_horizon(&sp).map_err(|e| Fail::arg(e.to_string()))?;
        write(charge_hours, h.charge_hours, "charge_hours")?;
        write(discharge_hours, h.discharge_hours, "discharge_hours")
    })
}

/// The reference building.
#[no_mangle]
pub extern "C" fn sd_network_reference() -> *mut SdNetwork {
    guard_new(|| Ok(SdNetwork(EnergyNetwork::reference())))
}

/// A network with the given storages and heat pump. Null on failure.
///
/// # Safety
/// `battery` and `heat_storage` must point to valid structs.
#[no_mangle]
pub unsafe extern "C" fn sd_network_new(
    battery: *const SdStorageParams,
    heat_storage: *const SdStorageParams,
    hp_cop: f64,
    hp_heat_max_kw: f64,
) -> *mut SdNetwork {
    guard_new(|| {
        let b = deref(battery, "battery")?;
        let h = deref(heat_storage, "heat_storage")?;
        let net = EnergyNetwork::new(
            b.into(),
            h.into(),
            HeatPumpParams {
                cop: hp_cop,
                p_heat_max: hp_heat_max_kw,
            },
        );
        let bad = seasonal_dispatch::network::validate_network(&net);
        if !bad.is_empty() {
            let msg: Vec<String> = bad.iter().map(|v| v.to_string()).collect();
            return Err(Fail::arg(msg.join("; ")));
        }
        Ok(SdNetwork(net))
    })
}

/// # Safety
/// `net` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sd_network_free(net: *mut SdNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Series from caller arrays, each of length `n`. Null on failure.
///
/// # Safety
/// Every pointer must reference `n` readable doubles.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn sd_series_new(
    n: usize,
    d_de: *const f64,
    d_dh: *const f64,
    p_pv: *const f64,
    p_st: *const f64,
    p_ac: *const f64,
    c_buy: *const f64,
    c_sell: *const f64,
) -> *mut SdSeries {
    guard_new(|| {
        let s = SeriesBundle {
            d_de: slice(d_de, n, "d_de")?.to_vec(),
            d_dh: slice(d_dh, n, "d_dh")?.to_vec(),
            p_pv: slice(p_pv, n, "p_pv")?.to_vec(),
            p_st: slice(p_st, n, "p_st")?.to_vec(),
            p_ac: slice(p_ac, n, "p_ac")?.to_vec(),
            c_buy: slice(c_buy, n, "c_buy")?.to_vec(),
            c_sell: slice(c_sell, n, "c_sell")?.to_vec(),
        };
        s.validate(n).map_err(|e| Fail::arg(e.to_string()))?;
        Ok(SdSeries(s))
    })
}

/// Deterministic synthetic series of `days` days starting on day of year
/// `first_day`.
#[no_mangle]
pub extern "C" fn sd_series_synthetic(days: usize, first_day: usize, seed: u64) -> *mut SdSeries {
    guard_new(|| {
        if days == 0 || first_day + days > 365 {
            return Err(Fail::arg(format!("days {first_day}..{} outside one year", first_day + days)));
        }
        Ok(SdSeries(generate_synthetic(&SyntheticSpec::stub(days, first_day, seed))))
    })
}

/// Loads a case config (TOML) and its CSV inputs.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; the outputs must be
/// valid for writes. On success the caller owns both handles.
#[no_mangle]
pub unsafe extern "C" fn sd_case_load(
    config_path: *const c_char,
    out_network: *mut *mut SdNetwork,
    out_series: *mut *mut SdSeries,
) -> SdStatus {
    guard(|| {
        if config_path.is_null() || out_network.is_null() || out_series.is_null() {
            return Err(Fail::arg("null argument"));
        }
        let path = CStr::from_ptr(config_path)
            .to_str()
            .map_err(|_| Fail::arg("config path is not UTF-8"))?;
        let input = |e: seasonal_dispatch::error::DataError| Fail(SdStatus::InputError, e.to_string());
        let cfg = CaseConfig::load(Path::new(path)).map_err(input)?;
        cfg.check_files().map_err(input)?;
        let series = ingest(&cfg).map_err(input)?;
        out_network.write(Box::into_raw(Box::new(SdNetwork(cfg.network()))));
        out_series.write(Box::into_raw(Box::new(SdSeries(series))));
        Ok(())
    })
}

/// Number of steps, or 0 for null.
///
/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_series_len(series: *const SdSeries) -> usize {
    series.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `series` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sd_series_free(series: *mut SdSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Optimizes the whole series at once with the network's year-boundary
/// levels pinned at both ends.
///
/// # Safety
/// `net` and `series` must be live handles; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sd_full_horizon(
    net: *const SdNetwork,
    series: *const SdSeries,
    dt_hours: f64,
    out: *mut *mut SdTrace,
) -> SdStatus {
    guard(|| {
        let net = &deref(net, "net")?.0;
        let series = &deref(series, "series")?.0;
        if out.is_null() {
            return Err(Fail::arg("out is null"));
        }
        let t = solve_full_horizon(net, series, &YearBoundary::from_network(net), &engine(dt_hours)?)?;
        out.write(Box::into_raw(Box::new(SdTrace(t))));
        Ok(())
    })
}

/// Rolling-horizon simulation with a one-day control horizon. `targets`
/// holds hourly heat-storage levels of a reference year and is read only
/// by [`SdMethod::Hybrid`].
///
/// # Safety
/// Handles must be live; `targets` must reference `n_targets` doubles;
/// `out` must be valid for writes.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn sd_rolling(
    net: *const SdNetwork,
    series: *const SdSeries,
    method: SdMethod,
    prediction_days: usize,
    targets: *const f64,
    n_targets: usize,
    dt_hours: f64,
    out: *mut *mut SdTrace,
) -> SdStatus {
    guard(|| {
        let net = &deref(net, "net")?.0;
        let series = &deref(series, "series")?.0;
        if out.is_null() {
            return Err(Fail::arg("out is null"));
        }
        let policy = match method {
            SdMethod::Hybrid => {
                let t = TargetSeries::new(slice(targets, n_targets, "targets")?.to_vec())?;
                RollingPolicy::hybrid(prediction_days, t)
            }
            SdMethod::FixedLevel => RollingPolicy::fixed_level(prediction_days),
            SdMethod::Free => RollingPolicy::free(prediction_days),
        };
        let t = run_rolling(net, series, &policy, &YearBoundary::from_network(net), &engine(dt_hours)?)?;
        out.write(Box::into_raw(Box::new(SdTrace(t))));
        Ok(())
    })
}

/// Minimum prediction horizon for `day` (0-based) starting from the given
/// levels. `out_days` is `max_days + 1` when no horizon up to `max_days`
/// was sufficient; `out_found` tells the two cases apart.
///
/// # Safety
/// Handles must be live; outputs must be valid for writes.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn sd_min_horizon(
    net: *const SdNetwork,
    series: *const SdSeries,
    day: usize,
    init_battery: f64,
    init_heat: f64,
    max_days: usize,
    dt_hours: f64,
    out_days: *mut usize,
    out_found: *mut bool,
) -> SdStatus {
    guard(|| {
        let net = &deref(net, "net")?.0;
        let series = &deref(series, "series")?.0;
        let init = StoreLevels {
            se: init_battery,
            sh: init_heat,
        };
        let r = min_prediction_horizon(net, series, day, init, max_days, &engine(dt_hours)?)?;
        write(out_days, r.days, "out_days")?;
        write(out_found, r.found, "out_found")
    })
}

/// Number of steps, or 0 for null.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_trace_len(trace: *const SdTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.len())
}

/// Total operating cost in euros, NaN for null.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_trace_cost(trace: *const SdTrace) -> f64 {
    trace.as_ref().map_or(f64::NAN, |t| t.0.total_cost)
}

/// Copies up to `cap` end-of-step storage levels into `buf` and returns
/// the trace length, so a call with `cap = 0` queries the size.
///
/// # Safety
/// `trace` must be a live handle; `buf` must be valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn sd_trace_levels(trace: *const SdTrace, which: SdStorage, buf: *mut f64, cap: usize) -> usize {
    let Some(t) = trace.as_ref() else {
        return 0;
    };
    let levels = t.0.states(node(which));
    if !buf.is_null() {
        let n = cap.min(levels.len());
        ptr::copy_nonoverlapping(levels.as_ptr(), buf, n);
    }
    levels.len()
}

/// `(cost - benchmark) / |benchmark|` where `benchmark` is a full-horizon
/// trace over the same period.
///
/// # Safety
/// Handles must be live; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sd_trace_gap(trace: *const SdTrace, benchmark: *const SdTrace, out: *mut f64) -> SdStatus {
    guard(|| {
        let g = suboptimality_gap(&deref(trace, "trace")?.0, &deref(benchmark, "benchmark")?.0)?;
        write(out, g, "out")
    })
}

/// Writes the trace as CSV.
///
/// # Safety
/// `trace` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sd_trace_write_csv(trace: *const SdTrace, path: *const c_char) -> SdStatus {
    guard(|| {
        let t = &deref(trace, "trace")?.0;
        if path.is_null() {
            return Err(Fail::arg("path is null"));
        }
        let p = CStr::from_ptr(path).to_str().map_err(|_| Fail::arg("path is not UTF-8"))?;
        write_trace_csv(t, Path::new(p)).map_err(|e| Fail(SdStatus::InputError, e.to_string()))
    })
}

/// # Safety
/// `trace` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sd_trace_free(trace: *mut SdTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}
