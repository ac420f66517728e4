use std::ffi::{CStr, CString};
use std::ptr;

use seasonal_dispatch_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(sd_last_error()) }.to_string_lossy().into_owned()
}

fn reference(which: SdStorage) -> SdStorageParams {
    let mut p = SdStorageParams {
        eta_ch: 0.0,
        eta_dis: 0.0,
        retention: 0.0,
        e_min: 0.0,
        e_max: 0.0,
        p_ch_max: 0.0,
        p_dis_max: 0.0,
        e_init: 0.0,
        e_end: 0.0,
    };
    assert_eq!(unsafe { sd_storage_reference(which, &mut p) }, SdStatus::Ok);
    p
}

#[test]
fn durations_match_hand_computation() {
    let b = reference(SdStorage::Battery);
    let (mut c, mut d) = (0.0, 0.0);
    assert_eq!(unsafe { sd_storage_durations(&b, &mut c, &mut d) }, SdStatus::Ok);
    let range = b.e_max - b.e_min;
    assert!((c - range / (b.eta_ch * b.p_ch_max)).abs() < 1e-12);
    assert!((d - range * b.eta_dis / b.p_dis_max).abs() < 1e-12);

    let h = reference(SdStorage::HeatStorage);
    let (mut lc, mut ld) = (0.0, 0.0);
    assert_eq!(unsafe { sd_leaky_fill_horizon(&h, &mut lc, &mut ld) }, SdStatus::Ok);
    let total_days = (lc + ld) / 24.0;
    assert!((41.0..=42.0).contains(&total_days), "{total_days}");
}

#[test]
fn null_and_invalid_arguments() {
    let mut c = 0.0;
    assert_eq!(
        unsafe { sd_storage_durations(ptr::null(), &mut c, &mut c) },
        SdStatus::InvalidArgument
    );
    assert!(last_error().contains("null"));

    let mut b = reference(SdStorage::Battery);
    b.p_ch_max = 0.0;
    let mut d = 0.0;
    assert_eq!(unsafe { sd_storage_durations(&b, &mut c, &mut d) }, SdStatus::InvalidArgument);
    assert!(!last_error().is_empty());

    assert!(sd_series_synthetic(0, 0, 1).is_null());
    assert!(unsafe { sd_series_new(3, ptr::null(), ptr::null(), ptr::null(), ptr::null(), ptr::null(), ptr::null(), ptr::null()) }.is_null());
    assert_eq!(unsafe { sd_series_len(ptr::null()) }, 0);
    assert!(unsafe { sd_trace_cost(ptr::null()) }.is_nan());
    unsafe {
        sd_network_free(ptr::null_mut());
        sd_series_free(ptr::null_mut());
        sd_trace_free(ptr::null_mut());
    }
}

#[test]
fn full_horizon_rolling_and_gap() {
    let net = sd_network_reference();
    let series = sd_series_synthetic(6, 0, 3);
    assert!(!net.is_null() && !series.is_null());
    assert_eq!(unsafe { sd_series_len(series) }, 144);

    let mut full = ptr::null_mut();
    assert_eq!(unsafe { sd_full_horizon(net, series, 1.0, &mut full) }, SdStatus::Ok, "{}", last_error());
    let n = unsafe { sd_trace_len(full) };
    assert_eq!(n, 144);

    let mut fixed = ptr::null_mut();
    let st = unsafe { sd_rolling(net, series, SdMethod::FixedLevel, 2, ptr::null(), 0, 1.0, &mut fixed) };
    assert_eq!(st, SdStatus::Ok, "{}", last_error());
    let mut gap = f64::NAN;
    assert_eq!(unsafe { sd_trace_gap(fixed, full, &mut gap) }, SdStatus::Ok);
    let (cf, cb) = unsafe { (sd_trace_cost(fixed), sd_trace_cost(full)) };
    assert!((gap - (cf - cb) / cb.abs()).abs() < 1e-12);
    assert!(gap >= -1e-9);

    // Gap against a non-benchmark trace is refused.
    assert_eq!(unsafe { sd_trace_gap(full, fixed, &mut gap) }, SdStatus::InvalidArgument);

    let size = unsafe { sd_trace_levels(full, SdStorage::HeatStorage, ptr::null_mut(), 0) };
    assert_eq!(size, n);
    let mut sh = vec![0.0; n];
    unsafe { sd_trace_levels(full, SdStorage::HeatStorage, sh.as_mut_ptr(), n) };
    let h = reference(SdStorage::HeatStorage);
    assert!(sh.iter().all(|&e| e >= h.e_min - 1e-6 && e <= h.e_max + 1e-6));
    assert!((sh[n - 1] - h.e_init).abs() < 1e-6);

    // Hybrid with constant targets at the initial level.
    let targets = vec![h.e_init; 8760];
    let mut hybrid = ptr::null_mut();
    let st = unsafe { sd_rolling(net, series, SdMethod::Hybrid, 2, targets.as_ptr(), targets.len(), 1.0, &mut hybrid) };
    assert_eq!(st, SdStatus::Ok, "{}", last_error());
    assert!(unsafe { sd_trace_cost(hybrid) } >= cb - 1e-6 * cb.abs());

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("t.csv").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { sd_trace_write_csv(full, path.as_ptr()) }, SdStatus::Ok);
    assert!(dir.path().join("t.csv").is_file());

    unsafe {
        sd_trace_free(full);
        sd_trace_free(fixed);
        sd_trace_free(hybrid);
        sd_series_free(series);
        sd_network_free(net);
    }
}

#[test]
fn infeasible_window_reports_status() {
    let b = reference(SdStorage::Battery);
    let h = reference(SdStorage::HeatStorage);
    // A heat pump this small cannot cover a constant heat demand.
    let net = unsafe { sd_network_new(&b, &h, 4.0, 0.01) };
    assert!(!net.is_null(), "{}", last_error());
    let n = 48;
    let zero = vec![0.0; n];
    let heat = vec![5.0; n];
    let price = vec![0.3; n];
    let series = unsafe {
        sd_series_new(n, zero.as_ptr(), heat.as_ptr(), zero.as_ptr(), zero.as_ptr(), zero.as_ptr(), price.as_ptr(), price.as_ptr())
    };
    assert!(!series.is_null(), "{}", last_error());
    let mut small = h;
    small.e_max = 10.0;
    small.e_min = 0.0;
    small.e_init = 5.0;
    small.e_end = f64::NAN;
    let tiny = unsafe { sd_network_new(&b, &small, 4.0, 0.01) };
    assert!(!tiny.is_null(), "{}", last_error());
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { sd_full_horizon(tiny, series, 1.0, &mut t) }, SdStatus::Infeasible);
    assert!(last_error().contains("infeasible"));
    assert!(t.is_null());
    assert_eq!(unsafe { sd_full_horizon(tiny, series, 5.0, &mut t) }, SdStatus::InvalidArgument);
    unsafe {
        sd_series_free(series);
        sd_network_free(net);
        sd_network_free(tiny);
    }
}

#[test]
fn min_horizon_and_case_load() {
    let dir = tempfile::tempdir().unwrap();
    let spec = seasonal_dispatch::data::SyntheticSpec::stub(4, 0, 9);
    let cfg = seasonal_dispatch::data::write_synthetic_case(&spec, 2021, dir.path()).unwrap();
    let cpath = CString::new(cfg.to_str().unwrap()).unwrap();
    let (mut net, mut series) = (ptr::null_mut(), ptr::null_mut());
    assert_eq!(unsafe { sd_case_load(cpath.as_ptr(), &mut net, &mut series) }, SdStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { sd_series_len(series) }, 96);

    let b = reference(SdStorage::Battery);
    let h = reference(SdStorage::HeatStorage);
    let (mut days, mut found) = (0usize, true);
    let st = unsafe { sd_min_horizon(net, series, 0, b.e_init, h.e_init, 2, 1.0, &mut days, &mut found) };
    assert_eq!(st, SdStatus::Ok, "{}", last_error());
    // The seasonal store cannot swing between its bounds in two days.
    assert!(!found);
    assert_eq!(days, 3);

    let missing = CString::new(dir.path().join("nope.toml").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { sd_case_load(missing.as_ptr(), &mut net, &mut series) }, SdStatus::InputError);
    unsafe {
        sd_series_free(series);
        sd_network_free(net);
    }
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(sd_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
