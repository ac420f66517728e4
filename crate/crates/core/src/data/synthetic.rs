use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{CaseConfig, SeriesFile, SeriesFiles};
use super::ingest::hour_grid;
use crate::error::DataError;
use crate::network::SeriesBundle;

/// Parameters of the synthetic year. Every series is
/// `(1 - amplitude) * mean + amplitude * shaped`, so `amplitude = 0` gives
/// constant series and `amplitude = 1` the full daily, seasonal and random
/// variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub days: usize,
    /// Day of year of the first day (0 = January 1).
    pub first_day: usize,
    pub seed: u64,
    pub amplitude: f64,
    /// Mean electric demand (kW).
    pub electric_kw: f64,
    /// Mean winter heat demand (kW).
    pub heat_kw: f64,
    /// Mean summer AC heat (kW).
    pub ac_kw: f64,
    /// PV peak (kW) on a clear summer day.
    pub pv_peak_kw: f64,
    /// Solar-thermal peak (kW) on a clear summer day.
    pub st_peak_kw: f64,
    /// Mean spot price (€/kWh).
    pub price_mean: f64,
    /// Daily swing of the spot price (€/kWh).
    pub price_daily: f64,
    /// Standard deviation of hourly price noise (€/kWh).
    pub price_noise: f64,
    /// Probability per day of a negative-price episode.
    pub negative_day_prob: f64,
    pub transport_fee: f64,
    /// Day-of-year range (inclusive) in which the heating source is AC
    /// heat instead of heat demand; `None` disables the split.
    pub summer: Option<(usize, usize)>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            days: 365,
            first_day: 0,
            seed: 2021,
            amplitude: 1.0,
            electric_kw: 1.5,
            heat_kw: 3.0,
            ac_kw: 0.8,
            pv_peak_kw: 16.0,
            st_peak_kw: 8.0,
            price_mean: 0.09,
            price_daily: 0.04,
            price_noise: 0.015,
            negative_day_prob: 0.04,
            transport_fee: 0.20,
            summer: Some((151, 272)),
        }
    }
}

impl SyntheticSpec {
    /// Short stub starting on `first_day`, for tests.
    pub fn stub(days: usize, first_day: usize, seed: u64) -> Self {
        SyntheticSpec {
            days,
            first_day,
            seed,
            ..Self::default()
        }
    }
}

/// Uniform-sum approximation of a standard normal draw.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0
}

/// Generates the series. Deterministic for a given spec.
pub fn generate_synthetic(spec: &SyntheticSpec) -> SeriesBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.days * 24;
    let mut raw = SeriesBundle::zeros(n);
    let mut heat_source = vec![0.0; n];
    let mut summer_flag = vec![false; n];
    let mut negative_left = 0usize;
    let mut negative_depth = 0.0;
    let mut cloud = 1.0;
    for t in 0..n {
        let day = (spec.first_day + t / 24) % 365;
        let h = (t % 24) as f64 + 0.5;
        if t % 24 == 0 {
            cloud = 0.25 + 0.75 * rng.gen::<f64>();
            if rng.gen::<f64>() < spec.negative_day_prob {
                negative_left = rng.gen_range(1..=4);
                negative_depth = 0.005 + 0.04 * rng.gen::<f64>();
            }
        }
        // +1 at midsummer, -1 at midwinter.
        let season = (2.0 * PI * (day as f64 - 172.0) / 365.0).cos();
        let day_length = 12.0 + 5.0 * season;
        let sunrise = 12.5 - day_length / 2.0;
        let sun = if h > sunrise && h < sunrise + day_length {
            (PI * (h - sunrise) / day_length).sin()
        } else {
            0.0
        };
        let irradiance = sun * (0.55 + 0.45 * season) * cloud;
        raw.p_pv[t] = spec.pv_peak_kw * irradiance;
        raw.p_st[t] = spec.st_peak_kw * irradiance;

        let evening = (-((h - 19.0) / 2.5).powi(2)).exp();
        let morning = (-((h - 8.0) / 2.0).powi(2)).exp();
        raw.d_de[t] = (spec.electric_kw * (0.6 + 0.6 * evening + 0.4 * morning + 0.1 * gaussian(&mut rng))).max(0.0);

        let summer = spec.summer.is_some_and(|(a, b)| day >= a && day <= b);
        summer_flag[t] = summer;
        heat_source[t] = if summer {
            (spec.ac_kw * (0.2 + 2.0 * sun * cloud) * (1.0 + 0.1 * gaussian(&mut rng))).max(0.0)
        } else {
            (spec.heat_kw * (1.0 - 0.85 * season) * (1.0 + 0.25 * morning + 0.1 * gaussian(&mut rng))).max(0.0)
        };

        let mut spot = spec.price_mean + spec.price_daily * (0.8 * evening + 0.5 * morning - 0.4 - 0.3 * sun)
            + 0.02 * (-season)
            + spec.price_noise * gaussian(&mut rng);
        if negative_left > 0 && (10.0..16.0).contains(&h) {
            spot = -negative_depth;
            negative_left -= 1;
        }
        raw.c_sell[t] = spot;
    }

    let a = spec.amplitude;
    let blend = |v: &[f64]| -> Vec<f64> {
        if a == 1.0 {
            return v.to_vec();
        }
        let mean = if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        v.iter().map(|x| (1.0 - a) * mean + a * x).collect()
    };
    let heat = blend(&heat_source);
    let sell = blend(&raw.c_sell);
    SeriesBundle {
        d_de: blend(&raw.d_de),
        d_dh: heat.iter().zip(&summer_flag).map(|(&v, &s)| if s { 0.0 } else { v }).collect(),
        p_ac: heat.iter().zip(&summer_flag).map(|(&v, &s)| if s { v } else { 0.0 }).collect(),
        p_pv: blend(&raw.p_pv),
        p_st: blend(&raw.p_st),
        c_buy: sell.iter().map(|v| v + spec.transport_fee).collect(),
        c_sell: sell,
    }
}

/// Writes the series as case CSVs plus a `case.toml` that ingests them
/// back into the same bundle, using the reference building parameters.
/// Returns the config path.
pub fn write_synthetic_case(spec: &SyntheticSpec, year: i32, dir: &Path) -> Result<PathBuf, DataError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| DataError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    if spec.first_day != 0 {
        return Err(DataError::Config("case files start on January 1; use first_day = 0".into()));
    }
    let bundle = generate_synthetic(spec);
    let grid = hour_grid(year, spec.days);
    let mut cfg = CaseConfig::reference(
        year,
        SeriesFiles {
            electric_demand: SeriesFile::new("electric_demand.csv"),
            heat_source: SeriesFile::new("heat_source.csv"),
            pv_unit: SeriesFile::new("pv_unit.csv"),
            irradiance: SeriesFile::new("irradiance.csv"),
            spot_price: SeriesFile::new("spot_price.csv"),
        },
    );
    cfg.period.days = spec.days;
    cfg.transport_fee = spec.transport_fee;
    if let Some((a, b)) = spec.summer {
        let md = |doy: usize| {
            let d = chrono::NaiveDate::from_yo_opt(2021, doy as u32 + 1).expect("day of year");
            (chrono::Datelike::month(&d), chrono::Datelike::day(&d))
        };
        let (sm, sd) = md(a);
        let (em, ed) = md(b);
        cfg.summer = super::config::SummerWindow {
            start_month: sm,
            start_day: sd,
            end_month: em,
            end_day: ed,
        };
    }
    let heat: Vec<f64> = bundle.d_dh.iter().zip(&bundle.p_ac).map(|(d, a)| d + a).collect();
    let pv: Vec<f64> = bundle.p_pv.iter().map(|v| v / cfg.pv.panel_count).collect();
    let st = cfg.solar_thermal.area_m2 * cfg.solar_thermal.efficiency;
    let irr: Vec<f64> = bundle.p_st.iter().map(|v| v / st).collect();
    let columns: [(&str, &[f64]); 5] = [
        ("electric_demand.csv", &bundle.d_de),
        ("heat_source.csv", &heat),
        ("pv_unit.csv", &pv),
        ("irradiance.csv", &irr),
        ("spot_price.csv", &bundle.c_sell),
    ];
    for (name, values) in columns {
        let path = dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| DataError::File {
            path: path.clone(),
            msg: e.to_string(),
        })?;
        let csv_err = |e: csv::Error| DataError::File {
            path: path.clone(),
            msg: e.to_string(),
        };
        w.write_record(["timestamp", "value"]).map_err(csv_err)?;
        for (t, v) in grid.iter().zip(values) {
            w.write_record([t.format("%Y-%m-%dT%H:%M:%S").to_string(), v.to_string()])
                .map_err(csv_err)?;
        }
        w.flush().map_err(io(&path))?;
    }
    let cfg_path = dir.join("case.toml");
    std::fs::write(&cfg_path, cfg.to_toml()).map_err(io(&cfg_path))?;
    Ok(cfg_path)
}
