use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};

use seasonal_dispatch::data::{emit_report, ingest, write_synthetic_case, CaseConfig, SyntheticSpec};
use seasonal_dispatch::error::{DataError, EngineError, FormulationError};
use seasonal_dispatch::horizon::{
    derive_targets, min_prediction_horizon_days, read_trace_csv, run_rolling, solve_full_horizon, write_trace_csv,
    EngineConfig, RollingPolicy, SimulationTrace, StoreLevels, SummaryRecord, TargetSeries,
};

/// Yearly dispatch of a building electricity-heat system with seasonal storage.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Log more (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CaseArgs {
    /// Case configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Override a config entry, e.g. `--set heat_storage.e_max=5000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Time step in hours.
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    /// Wall-clock limit per solve, in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Write every solved model as an LP file into this directory.
    #[arg(long, value_name = "DIR")]
    dump_lp: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Hybrid,
    FixedLevel,
    Free,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the whole period at once (the benchmark).
    FullHorizon {
        #[command(flatten)]
        case: CaseArgs,
        /// Trace CSV to write.
        #[arg(short, long)]
        trace: Option<PathBuf>,
    },
    /// Rolling-horizon simulation with a one-day control horizon.
    Rolling {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(short, long, value_enum)]
        method: Method,
        /// Prediction horizon in days.
        #[arg(long)]
        horizon: usize,
        /// Control horizon in days.
        #[arg(long, default_value_t = 1)]
        control: usize,
        /// Heat-storage targets (from `derive-targets`), required by hybrid.
        #[arg(long)]
        targets: Option<PathBuf>,
        /// Make end levels soft at this penalty (€/kWh).
        #[arg(long)]
        soft_penalty: Option<f64>,
        #[arg(short, long)]
        trace: Option<PathBuf>,
    },
    /// Minimum prediction horizon per day.
    MinHorizon {
        #[command(flatten)]
        case: CaseArgs,
        /// Largest horizon tried, in days.
        #[arg(long, default_value_t = 60)]
        max_days: usize,
        /// First day searched (0-based).
        #[arg(long, default_value_t = 0)]
        from: usize,
        /// Day after the last one searched; defaults to the study period.
        #[arg(long)]
        to: Option<usize>,
        /// Benchmark trace giving the storage levels at the start of each
        /// day; without it every day starts from the year's initial levels.
        #[arg(long)]
        levels: Option<PathBuf>,
        #[arg(long, default_value_t = default_threads())]
        threads: usize,
        /// CSV with one row per day.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Hourly heat-storage targets from a full-year benchmark trace.
    DeriveTargets {
        /// Benchmark trace CSV of the reference year.
        #[arg(short, long)]
        trace: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Results table and plots from trace files.
    Report {
        /// Trace CSVs; the first benchmark among them is the gap reference.
        #[arg(short, long, required = true)]
        trace: Vec<PathBuf>,
        /// Extra infeasible rows as `method:days[:note]`.
        #[arg(long)]
        infeasible: Vec<String>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Write a synthetic case (CSVs and case.toml).
    Synth {
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 365)]
        days: usize,
        #[arg(long, default_value_t = 2021)]
        seed: u64,
        #[arg(long, default_value_t = 2021)]
        year: i32,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
    },
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

enum CliError {
    Input(String),
    Infeasible(String),
    Other(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Other(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Input(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Infeasible(m) | CliError::Other(m) => m,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io { .. } => CliError::Other(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        let msg = e.to_string();
        match e {
            EngineError::Infeasible { .. } => CliError::Infeasible(msg),
            EngineError::InvalidPolicy(_)
            | EngineError::NotFullYear { .. }
            | EngineError::NotBenchmark
            | EngineError::Model(_)
            | EngineError::Formulation(
                FormulationError::InvalidNetwork(_)
                | FormulationError::EndLevelOutOfBounds { .. }
                | FormulationError::InitLevelOutOfBounds { .. }
                | FormulationError::Model(_),
            ) => CliError::Input(msg),
            _ => CliError::Other(msg),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

/// Loads the config, applies `--set` overrides and resolves relative
/// file paths against the config's directory.
fn load_case(args: &CaseArgs) -> Result<CaseConfig, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.config.display())))?;
    let mut value: toml::Value = toml::from_str(&text).map_err(|e| CliError::Input(format!("config: {e}")))?;
    for o in &args.overrides {
        apply_override(&mut value, o)?;
    }
    let text = toml::to_string(&value).map_err(|e| CliError::Other(e.to_string()))?;
    let mut cfg = CaseConfig::from_toml(&text)?;
    if let Some(dir) = args.config.parent() {
        cfg.resolve_paths(dir);
    }
    cfg.check_files()?;
    Ok(cfg)
}

fn apply_override(root: &mut toml::Value, spec: &str) -> Result<(), CliError> {
    let bad = |m: &str| CliError::Input(format!("--set {spec}: {m}"));
    let (key, raw) = spec.split_once('=').ok_or_else(|| bad("expected KEY=VALUE"))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut node = root;
    for p in &parts[..parts.len() - 1] {
        node = node
            .as_table_mut()
            .ok_or_else(|| bad("not a table"))?
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    node.as_table_mut()
        .ok_or_else(|| bad("not a table"))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn engine_config(args: &CaseArgs) -> Result<EngineConfig, CliError> {
    if !(args.dt > 0.0 && 24.0 % args.dt == 0.0) {
        return Err(CliError::Input(format!("time step {} h must divide 24 h", args.dt)));
    }
    let mut cfg = EngineConfig {
        dt_hours: args.dt,
        dump_lp_dir: args.dump_lp.clone(),
        ..EngineConfig::default()
    };
    cfg.solver.time_limit = args.time_limit.map(Duration::from_secs_f64);
    if let Some(dir) = &args.dump_lp {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Other(format!("{}: {e}", dir.display())))?;
    }
    Ok(cfg)
}

fn save_trace(trace: &SimulationTrace, path: Option<&Path>) -> Result<(), CliError> {
    if let Some(p) = path {
        write_trace_csv(trace, p)?;
    }
    Ok(())
}

fn read_targets(path: &Path) -> Result<TargetSeries, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let v = rec
            .get(1)
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| CliError::Input(format!("{}: row {}: expected hour,e_SH", path.display(), i + 2)))?;
        values.push(v);
    }
    Ok(TargetSeries::new(values)?)
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::FullHorizon { case, trace } => {
            let cfg = load_case(&case)?;
            let eng = engine_config(&case)?;
            let series = ingest(&cfg)?;
            let t = solve_full_horizon(&cfg.network(), &series, &cfg.year_boundary(), &eng)?;
            save_trace(&t, trace.as_deref())?;
            println!("full-horizon cost {:.4} EUR in {:.1} s", t.total_cost, t.runtime.as_secs_f64());
        }
        Command::Rolling {
            case,
            method,
            horizon,
            control,
            targets,
            soft_penalty,
            trace,
        } => {
            let cfg = load_case(&case)?;
            let eng = engine_config(&case)?;
            let mut policy = match method {
                Method::Hybrid => {
                    let path = targets.ok_or_else(|| CliError::Input("hybrid needs --targets".into()))?;
                    RollingPolicy::hybrid(horizon, read_targets(&path)?)
                }
                Method::FixedLevel => RollingPolicy::fixed_level(horizon),
                Method::Free => RollingPolicy::free(horizon),
            };
            policy.control_days = control;
            policy.soft_end_penalty = soft_penalty;
            let series = ingest(&cfg)?;
            let t = run_rolling(&cfg.network(), &series, &policy, &cfg.year_boundary(), &eng)?;
            save_trace(&t, trace.as_deref())?;
            println!(
                "{} {horizon}d cost {:.4} EUR in {:.1} s",
                t.method,
                t.total_cost,
                t.runtime.as_secs_f64()
            );
        }
        Command::MinHorizon {
            case,
            max_days,
            from,
            to,
            levels,
            threads,
            out,
        } => {
            // Horizons past the ingested data are not tried; set
            // period.extra_days to read beyond the study period.
            let cfg = load_case(&case)?;
            let eng = engine_config(&case)?;
            let to = to.unwrap_or(cfg.period.days);
            if from >= to {
                return Err(CliError::Input(format!("empty day range {from}..{to}")));
            }
            let series = ingest(&cfg)?;
            let year = cfg.year_boundary();
            let bench = levels.as_deref().map(read_trace_csv).transpose()?;
            let spd = eng.steps_per_day();
            let init_of = |day: usize| match &bench {
                Some(t) if day > 0 && day * spd <= t.len() => StoreLevels {
                    se: t.se[day * spd - 1],
                    sh: t.sh[day * spd - 1],
                },
                Some(t) => t.init,
                None => year.init,
            };
            let days: Vec<usize> = (from..to).collect();
            let started = Instant::now();
            let res = min_prediction_horizon_days(&cfg.network(), &series, &days, init_of, max_days, &eng, threads)?;
            let mut csv = String::from("day,min_days,found,skipped,recheck\n");
            for r in &res {
                let skipped: Vec<String> = r.skipped.iter().map(|d| d.to_string()).collect();
                csv += &format!(
                    "{},{},{},{},{}\n",
                    r.day,
                    r.days,
                    r.found,
                    skipped.join(";"),
                    r.recheck.map_or(String::new(), |b| b.to_string())
                );
            }
            match &out {
                Some(p) => std::fs::write(p, csv).map_err(|e| CliError::Other(format!("{}: {e}", p.display())))?,
                None => print!("{csv}"),
            }
            let worst = res.iter().max_by_key(|r| r.days).expect("non-empty day range");
            println!(
                "max minimum horizon {} days (day {}), {} of {} days found, {:.1} s",
                worst.days,
                worst.day,
                res.iter().filter(|r| r.found).count(),
                res.len(),
                started.elapsed().as_secs_f64()
            );
        }
        Command::DeriveTargets { trace, out } => {
            let t = read_trace_csv(&trace)?;
            let targets = derive_targets(&t)?;
            let mut csv = String::from("hour,e_SH\n");
            for (h, v) in targets.values().iter().enumerate() {
                csv += &format!("{},{v}\n", h + 1);
            }
            std::fs::write(&out, csv).map_err(|e| CliError::Other(format!("{}: {e}", out.display())))?;
            println!("{} hourly targets written to {}", targets.len(), out.display());
        }
        Command::Report { trace, infeasible, out } => {
            let traces = trace
                .iter()
                .map(|p| read_trace_csv(p))
                .collect::<Result<Vec<_>, _>>()?;
            let extra = infeasible
                .iter()
                .map(|s| {
                    let mut it = s.splitn(3, ':');
                    let method = it.next().unwrap_or_default();
                    let days = it.next().and_then(|d| d.parse().ok());
                    match days {
                        Some(d) if !method.is_empty() => Ok(SummaryRecord::infeasible(
                            method,
                            d,
                            0.0,
                            it.next().unwrap_or("infeasible").to_string(),
                        )),
                        _ => Err(CliError::Input(format!("--infeasible {s}: expected method:days[:note]"))),
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            let files = emit_report(&traces, &extra, &out)?;
            print!(
                "{}",
                std::fs::read_to_string(&files.table_txt)
                    .map_err(|e| CliError::Other(format!("{}: {e}", files.table_txt.display())))?
            );
        }
        Command::Synth {
            out,
            days,
            seed,
            year,
            amplitude,
        } => {
            let spec = SyntheticSpec {
                days,
                seed,
                amplitude,
                ..SyntheticSpec::default()
            };
            let path = write_synthetic_case(&spec, year, &out)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}
