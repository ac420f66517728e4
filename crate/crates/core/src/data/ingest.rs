use std::collections::HashMap;
use std::path::Path;

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, Timelike};

use super::config::{CaseConfig, SeriesFile};
use crate::error::DataError;
use crate::network::SeriesBundle;

/// Longest run of missing hours that is filled by interpolation.
pub const MAX_GAP_HOURS: usize = 3;

/// Hour starts from January 1 of `year` for `days` days, February 29
/// excluded.
pub fn hour_grid(year: i32, days: usize) -> Vec<NaiveDateTime> {
    let mut out = Vec::with_capacity(days * 24);
    let mut date = NaiveDate::from_ymd_opt(year, 1, 1).expect("valid year");
    while out.len() < days * 24 {
        if !(date.month() == 2 && date.day() == 29) {
            for h in 0..24 {
                out.push(date.and_hms_opt(h, 0, 0).expect("valid hour"));
            }
        }
        date = date.succ_opt().expect("date in range");
    }
    out
}

/// Parses an ISO-8601 timestamp. Values with an offset are converted to UTC.
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc());
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%:z", "%Y-%m-%d %H:%M%:z", "%Y-%m-%dT%H:%M%:z"] {
        if let Ok(dt) = DateTime::parse_from_str(s, fmt) {
            return Some(dt.naive_utc());
        }
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt);
        }
    }
    None
}

fn row_err(path: &Path, row: usize, msg: impl Into<String>) -> DataError {
    DataError::Row {
        path: path.to_path_buf(),
        row,
        msg: msg.into(),
    }
}

/// Reads one series onto `grid`. Rows outside the grid are ignored,
/// February 29 rows are dropped, and runs of up to [`MAX_GAP_HOURS`]
/// missing hours are filled linearly. Row numbers in errors are file line
/// numbers.
pub fn read_series_file(file: &SeriesFile, grid: &[NaiveDateTime]) -> Result<Vec<f64>, DataError> {
    let path = file.path.as_path();
    if !file.delimiter.is_ascii() {
        return Err(DataError::Config(format!("{}: delimiter must be ASCII", path.display())));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(file.delimiter as u8)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| DataError::File {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
    let header = reader
        .headers()
        .map_err(|e| row_err(path, 1, e.to_string()))?
        .clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let value_col = col(&file.value_column).ok_or_else(|| DataError::File {
        path: path.to_path_buf(),
        msg: format!("no column named {}", file.value_column),
    })?;
    let positional = file.timestamp_column.is_empty();
    let ts_col = if positional {
        None
    } else {
        Some(col(&file.timestamp_column).ok_or_else(|| DataError::File {
            path: path.to_path_buf(),
            msg: format!("no column named {}", file.timestamp_column),
        })?)
    };

    let index: HashMap<NaiveDateTime, usize> = grid.iter().enumerate().map(|(i, t)| (*t, i)).collect();
    let mut values: Vec<Option<f64>> = vec![None; grid.len()];
    let mut line_of: Vec<usize> = vec![0; grid.len()];
    let mut next_positional = 0;
    let mut leap_rows = 0;
    let mut outside = 0;
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            row_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let raw = rec.get(value_col).ok_or_else(|| row_err(path, line, "missing value cell"))?;
        let v: f64 = raw
            .parse()
            .map_err(|_| row_err(path, line, format!("value {raw:?} is not a number")))?;
        if !v.is_finite() {
            return Err(row_err(path, line, format!("value {raw:?} is not finite")));
        }
        let v = v * file.scale;
        let slot = match ts_col {
            None => {
                next_positional += 1;
                if next_positional > grid.len() {
                    outside += 1;
                    continue;
                }
                next_positional - 1
            }
            Some(c) => {
                let cell = rec.get(c).ok_or_else(|| row_err(path, line, "missing timestamp cell"))?;
                let ts = parse_timestamp(cell)
                    .ok_or_else(|| row_err(path, line, format!("timestamp {cell:?} is not ISO-8601")))?;
                if ts.month() == 2 && ts.day() == 29 {
                    leap_rows += 1;
                    continue;
                }
                if ts.minute() != 0 || ts.second() != 0 {
                    return Err(row_err(path, line, format!("timestamp {cell} is not on the hour")));
                }
                match index.get(&ts) {
                    Some(&i) => i,
                    None => {
                        outside += 1;
                        continue;
                    }
                }
            }
        };
        if values[slot].is_some() {
            return Err(row_err(path, line, format!("duplicate hour {}", grid[slot])));
        }
        values[slot] = Some(v);
        line_of[slot] = line;
    }
    if leap_rows > 0 {
        log::warn!("{}: dropped {leap_rows} rows dated February 29", path.display());
    }
    if outside > 0 {
        log::debug!("{}: ignored {outside} rows outside the study period", path.display());
    }
    if positional && next_positional < grid.len() {
        return Err(DataError::File {
            path: path.to_path_buf(),
            msg: format!("{next_positional} rows, {} required", grid.len()),
        });
    }
    fill_gaps(path, grid, &mut values, &line_of)
}

fn fill_gaps(
    path: &Path,
    grid: &[NaiveDateTime],
    values: &mut [Option<f64>],
    line_of: &[usize],
) -> Result<Vec<f64>, DataError> {
    let n = values.len();
    let mut i = 0;
    while i < n {
        if values[i].is_some() {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && values[i].is_none() {
            i += 1;
        }
        let len = i - start;
        let before_line = if start > 0 { line_of[start - 1] } else { 1 };
        if len > MAX_GAP_HOURS {
            return Err(row_err(
                path,
                before_line,
                format!("{len} hours missing from {} to {}", grid[start], grid[i - 1]),
            ));
        }
        let left = start.checked_sub(1).and_then(|k| values[k]);
        let right = values.get(i).copied().flatten();
        let (l, r) = match (left, right) {
            (Some(l), Some(r)) => (l, r),
            (Some(v), None) | (None, Some(v)) => (v, v),
            (None, None) => return Err(row_err(path, before_line, "no values in the study period")),
        };
        log::warn!(
            "{}: filling {len} missing hour(s) from {} by interpolation",
            path.display(),
            grid[start]
        );
        for k in 0..len {
            let w = (k + 1) as f64 / (len + 1) as f64;
            values[start + k] = Some(l + w * (r - l));
        }
    }
    Ok(values.iter().map(|v| v.expect("filled")).collect())
}

/// Builds the model series from the case files:
/// heat demand and AC heat from the heating source split by the summer
/// window, PV from the unit panel series, solar thermal from irradiance,
/// and buy/sell prices from the spot price plus the transport fee.
pub fn ingest(cfg: &CaseConfig) -> Result<SeriesBundle, DataError> {
    cfg.validate()?;
    cfg.check_files()?;
    let grid = hour_grid(cfg.period.year, cfg.period.days + cfg.period.extra_days);
    let de = read_series_file(&cfg.files.electric_demand, &grid)?;
    let heat = read_series_file(&cfg.files.heat_source, &grid)?;
    let pv = read_series_file(&cfg.files.pv_unit, &grid)?;
    let irr = read_series_file(&cfg.files.irradiance, &grid)?;
    let spot = read_series_file(&cfg.files.spot_price, &grid)?;

    let summer: Vec<bool> = grid.iter().map(|t| cfg.summer.contains(t.month(), t.day())).collect();
    let st_factor = cfg.solar_thermal.area_m2 * cfg.solar_thermal.efficiency;
    let bundle = SeriesBundle {
        d_de: de,
        d_dh: heat.iter().zip(&summer).map(|(&h, &s)| if s { 0.0 } else { h }).collect(),
        p_ac: heat.iter().zip(&summer).map(|(&h, &s)| if s { h } else { 0.0 }).collect(),
        p_pv: pv.iter().map(|v| v * cfg.pv.panel_count).collect(),
        p_st: irr.iter().map(|v| v * st_factor).collect(),
        c_buy: spot.iter().map(|v| v + cfg.transport_fee).collect(),
        c_sell: spot,
    };
    bundle.validate(grid.len())?;
    log::info!(
        "ingested {} hours for {}, checksum {}",
        bundle.len(),
        cfg.period.year,
        bundle.checksum()
    );
    Ok(bundle)
}
