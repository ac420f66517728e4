//! Case configuration, CSV ingestion, synthetic data and result reports.

mod config;
mod ingest;
mod report;
mod synthetic;

pub use config::{
    CaseConfig, HeatPumpConfig, PeriodConfig, PvConfig, SeriesFile, SeriesFiles, SolarThermalConfig, StorageConfig,
    SummerWindow,
};
pub use ingest::{hour_grid, ingest, parse_timestamp, read_series_file, MAX_GAP_HOURS};
pub use report::{emit_report, gap_pct, summary_rows, ReportFiles};
pub use synthetic::{generate_synthetic, write_synthetic_case, SyntheticSpec};
