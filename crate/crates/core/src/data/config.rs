use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::horizon::{StoreLevels, YearBoundary};
use crate::network::{EnergyNetwork, HeatPumpParams, StorageParams};

/// One input CSV: a header row, a timestamp column and a value column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesFile {
    pub path: PathBuf,
    /// Timestamp column name; empty means rows are taken in order.
    #[serde(default = "default_timestamp_column")]
    pub timestamp_column: String,
    #[serde(default = "default_value_column")]
    pub value_column: String,
    /// Multiplier applied to every value (e.g. 0.001 for W to kW).
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_timestamp_column() -> String {
    "timestamp".into()
}

fn default_value_column() -> String {
    "value".into()
}

fn default_delimiter() -> char {
    ','
}

fn one() -> f64 {
    1.0
}

impl SeriesFile {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        SeriesFile {
            path: path.into(),
            timestamp_column: default_timestamp_column(),
            value_column: default_value_column(),
            scale: 1.0,
            delimiter: ',',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesFiles {
    /// Electric demand (kW).
    pub electric_demand: SeriesFile,
    /// Electricity used for heating: heat demand outside the summer
    /// window, recoverable AC heat inside it.
    pub heat_source: SeriesFile,
    /// Production of one PV panel (kW).
    pub pv_unit: SeriesFile,
    /// Solar irradiance (kW/m²).
    pub irradiance: SeriesFile,
    /// Spot price (€/kWh).
    pub spot_price: SeriesFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvConfig {
    pub panel_count: f64,
    /// Nominal rating of one panel (kW); informational.
    pub unit_rating_kw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolarThermalConfig {
    pub area_m2: f64,
    pub efficiency: f64,
}

/// Storage block as written in the config; self-discharge in %/h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageConfig {
    #[serde(default)]
    pub e_min: f64,
    pub e_max: f64,
    pub eta_ch: f64,
    pub eta_dis: f64,
    pub p_ch_max: f64,
    pub p_dis_max: f64,
    pub self_discharge_pct_per_hour: f64,
    pub e_init: f64,
    /// Level at the end of the year; defaults to `e_init`.
    pub e_end: Option<f64>,
}

impl StorageConfig {
    pub fn params(&self) -> StorageParams {
        StorageParams {
            eta_ch: self.eta_ch,
            eta_dis: self.eta_dis,
            retention: StorageParams::retention_from_pct_per_hour(self.self_discharge_pct_per_hour),
            e_min: self.e_min,
            e_max: self.e_max,
            p_ch_max: self.p_ch_max,
            p_dis_max: self.p_dis_max,
            e_init: self.e_init,
            e_end: Some(self.e_end.unwrap_or(self.e_init)),
        }
    }

    pub fn from_params(sp: &StorageParams) -> Self {
        StorageConfig {
            e_min: sp.e_min,
            e_max: sp.e_max,
            eta_ch: sp.eta_ch,
            eta_dis: sp.eta_dis,
            p_ch_max: sp.p_ch_max,
            p_dis_max: sp.p_dis_max,
            self_discharge_pct_per_hour: (1.0 - sp.retention) * 100.0,
            e_init: sp.e_init,
            e_end: sp.e_end,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatPumpConfig {
    pub cop: f64,
    pub p_heat_max: f64,
}

/// Inclusive month/day range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummerWindow {
    pub start_month: u32,
    pub start_day: u32,
    pub end_month: u32,
    pub end_day: u32,
}

impl SummerWindow {
    pub fn contains(&self, month: u32, day: u32) -> bool {
        let md = (month, day);
        md >= (self.start_month, self.start_day) && md <= (self.end_month, self.end_day)
    }
}

impl Default for SummerWindow {
    fn default() -> Self {
        SummerWindow {
            start_month: 6,
            start_day: 1,
            end_month: 9,
            end_day: 30,
        }
    }
}

/// Period covered by the ingested series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodConfig {
    pub year: i32,
    /// Days of the study period, from January 1.
    #[serde(default = "default_days")]
    pub days: usize,
    /// Days read beyond the study period (used by the horizon search).
    #[serde(default)]
    pub extra_days: usize,
}

fn default_days() -> usize {
    365
}

/// Everything needed to build a case: input files, device parameters,
/// tariff and period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub period: PeriodConfig,
    pub files: SeriesFiles,
    pub pv: PvConfig,
    pub solar_thermal: SolarThermalConfig,
    pub battery: StorageConfig,
    pub heat_storage: StorageConfig,
    pub heat_pump: HeatPumpConfig,
    /// Added to the spot price for purchases (€/kWh).
    pub transport_fee: f64,
    #[serde(default)]
    pub summer: SummerWindow,
}

impl CaseConfig {
    /// Reference building parameters with the given input files.
    pub fn reference(year: i32, files: SeriesFiles) -> Self {
        CaseConfig {
            period: PeriodConfig {
                year,
                days: 365,
                extra_days: 0,
            },
            files,
            pv: PvConfig {
                panel_count: 80.0,
                unit_rating_kw: 0.25,
            },
            solar_thermal: SolarThermalConfig {
                area_m2: 12.0,
                efficiency: 0.9,
            },
            battery: StorageConfig::from_params(&StorageParams::reference_battery()),
            heat_storage: StorageConfig::from_params(&StorageParams::reference_heat_storage()),
            heat_pump: HeatPumpConfig {
                cop: 4.0,
                p_heat_max: 15.0,
            },
            transport_fee: 0.20,
            summer: SummerWindow::default(),
        }
    }

    /// Parses a TOML config; relative file paths are resolved against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, DataError> {
        let cfg: CaseConfig = toml::from_str(text).map_err(|e| DataError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolve_paths(&mut self, dir: &Path) {
        for f in self.files_mut() {
            if f.path.is_relative() {
                f.path = dir.join(&f.path);
            }
        }
    }

    fn files_mut(&mut self) -> [&mut SeriesFile; 5] {
        let f = &mut self.files;
        [
            &mut f.electric_demand,
            &mut f.heat_source,
            &mut f.pv_unit,
            &mut f.irradiance,
            &mut f.spot_price,
        ]
    }

    pub fn files(&self) -> [(&'static str, &SeriesFile); 5] {
        let f = &self.files;
        [
            ("electric_demand", &f.electric_demand),
            ("heat_source", &f.heat_source),
            ("pv_unit", &f.pv_unit),
            ("irradiance", &f.irradiance),
            ("spot_price", &f.spot_price),
        ]
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::Config(m));
        if !(self.transport_fee >= 0.0) {
            return bad(format!("transport fee {} must be >= 0", self.transport_fee));
        }
        let s = &self.summer;
        let valid_md = |m: u32, d: u32| chrono::NaiveDate::from_ymd_opt(2021, m, d).is_some();
        if !valid_md(s.start_month, s.start_day) || !valid_md(s.end_month, s.end_day) {
            return bad("summer window dates are not valid calendar days".into());
        }
        if (s.start_month, s.start_day) > (s.end_month, s.end_day) {
            return bad("summer window ends before it starts".into());
        }
        if self.period.days == 0 || self.period.days > 365 {
            return bad(format!("period of {} days must be within one year", self.period.days));
        }
        if self.pv.panel_count < 0.0 || self.solar_thermal.area_m2 < 0.0 || self.solar_thermal.efficiency < 0.0 {
            return bad("PV and solar-thermal sizes must be >= 0".into());
        }
        for (name, f) in self.files() {
            if !f.scale.is_finite() {
                return bad(format!("{name}: scale must be finite"));
            }
        }
        Ok(())
    }

    /// Checks that every input file exists.
    pub fn check_files(&self) -> Result<(), DataError> {
        for (_, f) in self.files() {
            if !f.path.is_file() {
                return Err(DataError::File {
                    path: f.path.clone(),
                    msg: "file not found".into(),
                });
            }
        }
        Ok(())
    }

    pub fn network(&self) -> EnergyNetwork {
        EnergyNetwork::new(
            self.battery.params(),
            self.heat_storage.params(),
            HeatPumpParams {
                cop: self.heat_pump.cop,
                p_heat_max: self.heat_pump.p_heat_max,
            },
        )
    }

    pub fn year_boundary(&self) -> YearBoundary {
        let b = self.battery.params();
        let h = self.heat_storage.params();
        YearBoundary {
            init: StoreLevels {
                se: b.e_init,
                sh: h.e_init,
            },
            end: StoreLevels {
                se: b.e_end.unwrap_or(b.e_init),
                sh: h.e_end.unwrap_or(h.e_init),
            },
        }
    }
}
