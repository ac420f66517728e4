//! Full-horizon and rolling-horizon operation over a study period, the
//! minimum prediction horizon search, and trace bookkeeping.
//!
//! A rolling run solves one window per control period. Each window starts
//! from the state implemented so far, looks `prediction_days` ahead, and
//! only its first `control_days` of decisions are kept. A window that
//! would run past the end of the series is cut at the end and takes the
//! year-end levels as its end condition.

mod min_horizon;
mod trace_io;

use std::path::PathBuf;
use std::time::{Duration, Instant};

pub use min_horizon::{min_prediction_horizon, min_prediction_horizon_days, MinHorizonOutcome};
pub use trace_io::{read_trace_csv, write_trace_csv, SummaryRecord};

use crate::error::EngineError;
use crate::formulation::{build_milp, BoundaryConditions, EndPolicy, StorageBoundary, WindowFlows, WindowSpec};
use crate::formulation::{dispatch_cost, lp_file::write_lp_file, MilpInstance};
use crate::network::{Arc, EnergyNetwork, NodeId, SeriesBundle, StorageParams};
use crate::solver::{solve_milp, solve_polished, SolveResult, SolveStatus, SolverConfig};

/// Hours in a non-leap year.
pub const HOURS_PER_YEAR: usize = 8760;

/// Levels of both storages (kWh).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoreLevels {
    pub se: f64,
    pub sh: f64,
}

impl StoreLevels {
    pub fn get(&self, node: NodeId) -> f64 {
        match node {
            NodeId::Se => self.se,
            NodeId::Sh => self.sh,
            other => panic!("{other} is not a storage"),
        }
    }
}

/// Storage levels at the start and end of the study period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YearBoundary {
    pub init: StoreLevels,
    pub end: StoreLevels,
}

impl YearBoundary {
    /// Initial levels from the storage parameters; the end level defaults
    /// to the initial one when no `e_end` is given.
    pub fn from_network(net: &EnergyNetwork) -> Self {
        let se = net.storage(NodeId::Se);
        let sh = net.storage(NodeId::Sh);
        YearBoundary {
            init: StoreLevels {
                se: se.e_init,
                sh: sh.e_init,
            },
            end: StoreLevels {
                se: se.e_end.unwrap_or(se.e_init),
                sh: sh.e_end.unwrap_or(sh.e_init),
            },
        }
    }
}

/// Settings shared by every solve of an experiment.
#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub dt_hours: f64,
    pub solver: SolverConfig,
    /// Write every window's model as `window_<day>.lp` into this directory.
    pub dump_lp_dir: Option<PathBuf>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            dt_hours: 1.0,
            solver: SolverConfig::default(),
            dump_lp_dir: None,
        }
    }
}

impl EngineConfig {
    pub fn steps_per_day(&self) -> usize {
        (24.0 / self.dt_hours).round() as usize
    }
}

/// Heat-storage level per hour of a reference year, used as terminal
/// targets. Hour `h` (1-based) is the level at the end of step `h - 1`;
/// hours wrap around the series length.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSeries {
    values: Vec<f64>,
}

impl TargetSeries {
    pub fn new(values: Vec<f64>) -> Result<Self, EngineError> {
        if values.is_empty() {
            return Err(EngineError::InvalidPolicy("target series is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(EngineError::InvalidPolicy(format!("target series holds {v}")));
        }
        Ok(TargetSeries { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Level at the end of hour `hour` (1-based, wrapping).
    pub fn at_hour(&self, hour: usize) -> f64 {
        let n = self.values.len();
        self.values[(hour + n - 1) % n]
    }

    /// Checks every value against the storage bounds.
    pub fn check_bounds(&self, sp: &StorageParams) -> Result<(), EngineError> {
        let slop = 1e-7 * sp.e_max.abs().max(1.0);
        match self
            .values
            .iter()
            .position(|&v| v < sp.e_min - slop || v > sp.e_max + slop)
        {
            Some(i) => Err(EngineError::InvalidPolicy(format!(
                "target {} kWh at hour {} outside [{}, {}]",
                self.values[i],
                i + 1,
                sp.e_min,
                sp.e_max
            ))),
            None => Ok(()),
        }
    }
}

/// End condition on the heat storage at the end of each rolling window.
#[derive(Debug, Clone, PartialEq)]
pub enum ShEndPolicy {
    Free,
    /// Back to the level the window started from.
    FixedInitial,
    /// The level of a reference-year optimum at the window's last hour.
    HistoricalTarget(TargetSeries),
    ForceMin,
    ForceMax,
}

/// End condition on the battery at the end of each rolling window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeEndPolicy {
    Free,
    FixedInitial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollingPolicy {
    pub prediction_days: usize,
    pub control_days: usize,
    pub sh_end: ShEndPolicy,
    pub se_end: SeEndPolicy,
    /// Makes pinned end levels soft at this cost (€/kWh).
    pub soft_end_penalty: Option<f64>,
}

impl RollingPolicy {
    /// Hard heat-storage targets from a reference year, battery left free.
    pub fn hybrid(prediction_days: usize, targets: TargetSeries) -> Self {
        RollingPolicy {
            prediction_days,
            control_days: 1,
            sh_end: ShEndPolicy::HistoricalTarget(targets),
            se_end: SeEndPolicy::Free,
            soft_end_penalty: None,
        }
    }

    /// Both storages return to their window-start level.
    pub fn fixed_level(prediction_days: usize) -> Self {
        RollingPolicy {
            prediction_days,
            control_days: 1,
            sh_end: ShEndPolicy::FixedInitial,
            se_end: SeEndPolicy::FixedInitial,
            soft_end_penalty: None,
        }
    }

    /// No end conditions except at the end of the year.
    pub fn free(prediction_days: usize) -> Self {
        RollingPolicy {
            prediction_days,
            control_days: 1,
            sh_end: ShEndPolicy::Free,
            se_end: SeEndPolicy::Free,
            soft_end_penalty: None,
        }
    }

    pub fn method_name(&self) -> &'static str {
        match (&self.sh_end, self.se_end) {
            (ShEndPolicy::HistoricalTarget(_), _) => "hybrid",
            (ShEndPolicy::FixedInitial, SeEndPolicy::FixedInitial) => "fixed-level",
            (ShEndPolicy::Free, SeEndPolicy::Free) => "rolling-free",
            (ShEndPolicy::ForceMin, _) => "rolling-force-min",
            (ShEndPolicy::ForceMax, _) => "rolling-force-max",
            _ => "rolling",
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.control_days == 0 {
            return Err(EngineError::InvalidPolicy("control horizon must be at least one day".into()));
        }
        if self.prediction_days < self.control_days {
            return Err(EngineError::InvalidPolicy(format!(
                "prediction horizon {} days is shorter than control horizon {} days",
                self.prediction_days, self.control_days
            )));
        }
        if let Some(p) = self.soft_end_penalty {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(EngineError::InvalidPolicy(format!("soft end penalty {p} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Solve metadata of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowRecord {
    pub id: usize,
    pub day: usize,
    pub start_step: usize,
    pub steps: usize,
    pub implemented_steps: usize,
    /// Window objective, including any soft-end penalty.
    pub objective: f64,
    pub status: SolveStatus,
    pub binaries: usize,
    pub iterations: usize,
    pub nodes: usize,
    pub wall_time: Duration,
}

/// Implemented operation over the study period.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub method: String,
    pub horizon_days: Option<usize>,
    pub dt_hours: f64,
    pub arcs: Vec<Arc>,
    /// `flows[t][k]`: flow on `arcs[k]` during step `t` (kW).
    pub flows: Vec<Vec<f64>>,
    /// Battery level at the end of each step (kWh).
    pub se: Vec<f64>,
    /// Heat-storage level at the end of each step (kWh).
    pub sh: Vec<f64>,
    /// Window that produced each step.
    pub window_id: Vec<usize>,
    pub init: StoreLevels,
    pub windows: Vec<WindowRecord>,
    /// Grid cost of the implemented flows (€).
    pub total_cost: f64,
    pub is_benchmark: bool,
    pub runtime: Duration,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }

    pub fn states(&self, node: NodeId) -> &[f64] {
        match node {
            NodeId::Se => &self.se,
            NodeId::Sh => &self.sh,
            other => panic!("{other} is not a storage"),
        }
    }

    /// Grid cost recomputed from the flows and the series.
    pub fn recompute_cost(&self, series: &SeriesBundle) -> f64 {
        dispatch_cost(&self.arcs, &self.flows, series, self.dt_hours)
    }

    /// Largest residual of the state recursion over all steps, window
    /// seams included, relative to the larger of 1 and `e_max`.
    pub fn continuity_residual(&self, net: &EnergyNetwork) -> f64 {
        let mut worst = 0.0f64;
        for node in NodeId::STORAGES {
            let sp = net.storage(node);
            let rho = sp.step_retention(self.dt_hours);
            let states = self.states(node);
            let mut prev = self.init.get(node);
            for (t, row) in self.flows.iter().enumerate() {
                let mut inflow = 0.0;
                let mut outflow = 0.0;
                for (arc, p) in self.arcs.iter().zip(row) {
                    if arc.to == node {
                        inflow += p;
                    }
                    if arc.from == node {
                        outflow += p;
                    }
                }
                let expect = rho * prev + self.dt_hours * (sp.eta_ch * inflow - outflow / sp.eta_dis);
                worst = worst.max((states[t] - expect).abs() / sp.e_max.abs().max(1.0));
                prev = states[t];
            }
        }
        worst
    }

    /// Largest excursion of either storage outside its bounds (kWh).
    pub fn bound_excursion(&self, net: &EnergyNetwork) -> f64 {
        let mut worst = 0.0f64;
        for node in NodeId::STORAGES {
            let sp = net.storage(node);
            for &e in self.states(node) {
                worst = worst.max(sp.e_min - e).max(e - sp.e_max);
            }
        }
        worst
    }

    /// Table row for this trace.
    pub fn summary(&self, benchmark_cost: Option<f64>) -> SummaryRecord {
        SummaryRecord {
            method: self.method.clone(),
            horizon_days: self.horizon_days,
            cost: Some(self.total_cost),
            gap_pct: benchmark_cost.and_then(|b| gap_from_costs(self.total_cost, b).ok()).map(|g| 100.0 * g),
            runtime_s: self.runtime.as_secs_f64(),
            note: None,
        }
    }
}

/// Solves one window and maps non-optimal outcomes to engine errors.
pub(crate) fn solve_window(
    net: &EnergyNetwork,
    win: &WindowSpec,
    cfg: &EngineConfig,
    polish: bool,
    day: usize,
) -> Result<(MilpInstance, SolveResult), EngineError> {
    let inst = build_milp(net, win)?;
    if let Some(dir) = &cfg.dump_lp_dir {
        std::fs::create_dir_all(dir).map_err(|e| crate::error::SolverError::LpFile(e.into()))?;
        write_lp_file(&inst, &dir.join(format!("window_{day:03}_{}.lp", win.len())))
            .map_err(crate::error::SolverError::from)?;
    }
    let result = if polish {
        solve_polished(&inst, &cfg.solver)?
    } else {
        solve_milp(&inst, &cfg.solver)?
    };
    let (start, end) = (win.start_step, win.start_step + win.len());
    match result.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(EngineError::Infeasible { day, start, end }),
        SolveStatus::Unbounded => return Err(EngineError::Unbounded { day }),
        SolveStatus::NodeLimit | SolveStatus::TimeLimit => {
            if !result.has_solution() {
                return Err(EngineError::LimitReached { day });
            }
            log::warn!(
                "window on day {day} stopped at {} with relative gap {:.3e}; using incumbent",
                result.status.as_str(),
                result.gap()
            );
        }
    }
    Ok((inst, result))
}

fn check_series(series: &SeriesBundle, cfg: &EngineConfig) -> Result<usize, EngineError> {
    let n = series.len();
    series.validate(n)?;
    if n == 0 {
        return Err(EngineError::NotFullYear { len: 0, expected: cfg.steps_per_day() });
    }
    if !(cfg.dt_hours > 0.0) || (24.0 / cfg.dt_hours - cfg.steps_per_day() as f64).abs() > 1e-9 {
        return Err(EngineError::InvalidPolicy(format!(
            "step length {} h does not divide a day",
            cfg.dt_hours
        )));
    }
    Ok(n)
}

fn fixed(init: f64, end: f64) -> StorageBoundary {
    StorageBoundary {
        init,
        end: EndPolicy::FixedAt(end),
    }
}

/// One optimization over the whole series with the year boundary levels
/// pinned at both ends. The result is the benchmark for the other methods.
pub fn solve_full_horizon(
    net: &EnergyNetwork,
    series: &SeriesBundle,
    year: &YearBoundary,
    cfg: &EngineConfig,
) -> Result<SimulationTrace, EngineError> {
    let started = Instant::now();
    let n = check_series(series, cfg)?;
    let win = WindowSpec {
        start_step: 0,
        dt_hours: cfg.dt_hours,
        series: series.clone(),
        boundary: BoundaryConditions::new(fixed(year.init.se, year.end.se), fixed(year.init.sh, year.end.sh)),
    };
    let (inst, result) = solve_window(net, &win, cfg, false, 0)?;
    let layout = inst.layout.as_ref().expect("window instance has a layout");
    let wf = WindowFlows::extract(layout, &result.x);
    let total_cost = dispatch_cost(&wf.arcs, &wf.flows, series, cfg.dt_hours);
    let record = WindowRecord {
        id: 0,
        day: 0,
        start_step: 0,
        steps: n,
        implemented_steps: n,
        objective: result.objective,
        status: result.status,
        binaries: inst.n_binaries(),
        iterations: result.iterations,
        nodes: result.nodes,
        wall_time: result.wall_time,
    };
    log::info!(
        "full horizon: {n} steps, cost {total_cost:.4}, {} iterations, {} nodes",
        result.iterations,
        result.nodes
    );
    Ok(SimulationTrace {
        method: "full-horizon".into(),
        horizon_days: Some(n.div_ceil(cfg.steps_per_day())),
        dt_hours: cfg.dt_hours,
        arcs: wf.arcs,
        flows: wf.flows,
        se: wf.se,
        sh: wf.sh,
        window_id: vec![0; n],
        init: year.init,
        windows: vec![record],
        total_cost,
        is_benchmark: true,
        runtime: started.elapsed(),
    })
}

/// Rolling-horizon simulation: one window per control period, implementing
/// only the first `control_days` of each. Aborts on the first window that
/// has no solution.
pub fn run_rolling(
    net: &EnergyNetwork,
    series: &SeriesBundle,
    policy: &RollingPolicy,
    year: &YearBoundary,
    cfg: &EngineConfig,
) -> Result<SimulationTrace, EngineError> {
    policy.validate()?;
    let started = Instant::now();
    let n = check_series(series, cfg)?;
    if let ShEndPolicy::HistoricalTarget(targets) = &policy.sh_end {
        targets.check_bounds(net.storage(NodeId::Sh))?;
    }
    let spd = cfg.steps_per_day();
    let control = policy.control_days * spd;
    let prediction = policy.prediction_days * spd;

    let mut trace = SimulationTrace {
        method: policy.method_name().into(),
        horizon_days: Some(policy.prediction_days),
        dt_hours: cfg.dt_hours,
        arcs: net.arcs.clone(),
        flows: Vec::with_capacity(n),
        se: Vec::with_capacity(n),
        sh: Vec::with_capacity(n),
        window_id: Vec::with_capacity(n),
        init: year.init,
        windows: Vec::new(),
        total_cost: 0.0,
        is_benchmark: false,
        runtime: Duration::ZERO,
    };
    let mut state = year.init;
    let mut start = 0;
    while start < n {
        let day = start / spd;
        let nominal_end = start + prediction;
        let end = nominal_end.min(n);
        let boundary = if nominal_end >= n {
            BoundaryConditions::new(fixed(state.se, year.end.se), fixed(state.sh, year.end.sh))
        } else {
            let se_end = match policy.se_end {
                SeEndPolicy::Free => EndPolicy::Free,
                SeEndPolicy::FixedInitial => EndPolicy::FixedAt(state.se),
            };
            let sh_end = match &policy.sh_end {
                ShEndPolicy::Free => EndPolicy::Free,
                ShEndPolicy::FixedInitial => EndPolicy::FixedAt(state.sh),
                ShEndPolicy::HistoricalTarget(targets) => {
                    let hour = (nominal_end as f64 * cfg.dt_hours).round() as usize;
                    EndPolicy::FixedAt(targets.at_hour(hour))
                }
                ShEndPolicy::ForceMin => EndPolicy::ForceMin,
                ShEndPolicy::ForceMax => EndPolicy::ForceMax,
            };
            BoundaryConditions::new(
                StorageBoundary {
                    init: state.se,
                    end: se_end,
                },
                StorageBoundary {
                    init: state.sh,
                    end: sh_end,
                },
            )
        };
        let boundary = BoundaryConditions {
            soft_end_penalty: policy.soft_end_penalty,
            ..boundary
        };
        let win = WindowSpec {
            start_step: start,
            dt_hours: cfg.dt_hours,
            series: series.slice(start, end - start)?,
            boundary,
        };
        let (inst, result) = solve_window(net, &win, cfg, false, day)?;
        let wf = WindowFlows::extract(inst.layout.as_ref().expect("window instance has a layout"), &result.x);
        let keep = control.min(end - start);
        let id = trace.windows.len();
        trace.flows.extend_from_slice(&wf.flows[..keep]);
        trace.se.extend_from_slice(&wf.se[..keep]);
        trace.sh.extend_from_slice(&wf.sh[..keep]);
        trace.window_id.extend(std::iter::repeat_n(id, keep));
        state = StoreLevels {
            se: wf.se[keep - 1],
            sh: wf.sh[keep - 1],
        };
        log::debug!(
            "day {day}: window {start}..{end}, objective {:.4}, {} iterations, SH {:.2} kWh",
            result.objective,
            result.iterations,
            state.sh
        );
        trace.windows.push(WindowRecord {
            id,
            day,
            start_step: start,
            steps: end - start,
            implemented_steps: keep,
            objective: result.objective,
            status: result.status,
            binaries: inst.n_binaries(),
            iterations: result.iterations,
            nodes: result.nodes,
            wall_time: result.wall_time,
        });
        start += keep;
    }
    trace.total_cost = trace.recompute_cost(series);
    trace.runtime = started.elapsed();
    log::info!(
        "{} {} days: {} windows, cost {:.4}",
        trace.method,
        policy.prediction_days,
        trace.windows.len(),
        trace.total_cost
    );
    Ok(trace)
}

/// Relative cost excess over a benchmark cost.
pub fn gap_from_costs(cost: f64, benchmark_cost: f64) -> Result<f64, EngineError> {
    if benchmark_cost == 0.0 {
        return Err(EngineError::UndefinedGap);
    }
    Ok((cost - benchmark_cost) / benchmark_cost.abs())
}

/// `(cost - benchmark) / |benchmark|` for two traces over the same period.
pub fn suboptimality_gap(trace: &SimulationTrace, benchmark: &SimulationTrace) -> Result<f64, EngineError> {
    if !benchmark.is_benchmark {
        return Err(EngineError::NotBenchmark);
    }
    if trace.len() != benchmark.len() {
        return Err(EngineError::NotFullYear {
            len: trace.len(),
            expected: benchmark.len(),
        });
    }
    gap_from_costs(trace.total_cost, benchmark.total_cost)
}

/// Hourly heat-storage levels of a full-year benchmark, for use as
/// rolling-horizon targets in a later year.
pub fn derive_targets(prior_year: &SimulationTrace) -> Result<TargetSeries, EngineError> {
    if !prior_year.is_benchmark {
        return Err(EngineError::NotBenchmark);
    }
    let expected = (HOURS_PER_YEAR as f64 / prior_year.dt_hours).round() as usize;
    if prior_year.len() != expected {
        return Err(EngineError::NotFullYear {
            len: prior_year.len(),
            expected,
        });
    }
    let last = *prior_year.sh.last().expect("non-empty trace");
    if (last - prior_year.init.sh).abs() > 1e-6 * last.abs().max(1.0) {
        log::warn!(
            "reference year starts at {} kWh but ends at {last} kWh; targets will jump at the wrap",
            prior_year.init.sh
        );
    }
    // One value per hour: the level at the end of each hour.
    let per_hour = (1.0 / prior_year.dt_hours).round().max(1.0) as usize;
    let values = if prior_year.dt_hours < 1.0 {
        prior_year.sh.chunks(per_hour).map(|c| *c.last().unwrap()).collect()
    } else {
        prior_year.sh.clone()
    };
    TargetSeries::new(values)
}
