//! Exact solution of [`MilpInstance`]s: bounded-variable primal simplex for
//! the continuous part and best-bound branch-and-bound over the binaries.

mod bnb;
pub mod external;
mod lu;
mod simplex;
mod verify;

use std::time::{Duration, Instant};

pub use bnb::solve_milp;
pub use verify::{dual_certificate, verify_solution, DualCertificate, FlaggedItem, ItemKind, ViolationReport};

use crate::error::SolverError;
use crate::formulation::{polish_instance, MilpInstance};
use crate::network::NodeId;
use simplex::{solve_bounded, LpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Branch-and-bound stopped at the node limit.
    NodeLimit,
    /// Branch-and-bound stopped at the time limit.
    TimeLimit,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NodeLimit => "node-limit",
            SolveStatus::TimeLimit => "time-limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Relative row feasibility tolerance used when verifying solutions.
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    /// Reduced-cost tolerance for pricing.
    pub optimality_tol: f64,
    /// Phase-1 residual (relative to the largest rhs) above which a
    /// problem is declared infeasible.
    pub phase1_tol: f64,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
    pub refactor_every: usize,
    pub max_iterations: usize,
    pub node_limit: Option<usize>,
    pub time_limit: Option<Duration>,
    /// Relative gap at which branch-and-bound stops.
    pub mip_gap: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            feasibility_tol: 1e-9,
            integrality_tol: 1e-6,
            optimality_tol: 1e-9,
            phase1_tol: 1e-7,
            bland_after: 50,
            refactor_every: 100,
            max_iterations: 50_000_000,
            node_limit: None,
            time_limit: None,
            mip_gap: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Objective value (€); NaN without a solution.
    pub objective: f64,
    /// Primal values, one per variable; empty without a solution.
    pub x: Vec<f64>,
    /// Row duals of the final LP, when the problem was continuous.
    pub duals: Option<Vec<f64>>,
    /// Best lower bound proven (equals `objective` at optimality).
    pub best_bound: f64,
    pub iterations: usize,
    pub nodes: usize,
    pub wall_time: Duration,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn has_solution(&self) -> bool {
        !self.x.is_empty()
    }

    /// Relative gap between incumbent and bound.
    pub fn gap(&self) -> f64 {
        if !self.has_solution() {
            return f64::INFINITY;
        }
        (self.objective - self.best_bound).abs() / self.objective.abs().max(1e-9)
    }
}

fn bounds_of(inst: &MilpInstance) -> (Vec<f64>, Vec<f64>) {
    (
        inst.variables.iter().map(|v| v.lower).collect(),
        inst.variables.iter().map(|v| v.upper).collect(),
    )
}

/// Solves the continuous relaxation (binaries range over [0, 1]).
pub fn solve_lp(inst: &MilpInstance, cfg: &SolverConfig) -> Result<SolveResult, SolverError> {
    let start = Instant::now();
    let (lo, up) = bounds_of(inst);
    let out = solve_bounded(inst, &lo, &up, cfg)?;
    Ok(lp_result(out, start))
}

fn lp_result(out: simplex::LpOutcome, start: Instant) -> SolveResult {
    let status = match out.status {
        LpStatus::Optimal => SolveStatus::Optimal,
        LpStatus::Infeasible => SolveStatus::Infeasible,
        LpStatus::Unbounded => SolveStatus::Unbounded,
    };
    let optimal = status == SolveStatus::Optimal;
    if status == SolveStatus::Infeasible {
        log::debug!("phase 1 ended with residual {:e}", out.phase1_residual);
    }
    SolveResult {
        status,
        objective: if optimal { out.objective } else { f64::NAN },
        x: if optimal { out.x } else { Vec::new() },
        duals: optimal.then_some(out.duals),
        best_bound: if optimal { out.objective } else { f64::NAN },
        iterations: out.iterations,
        nodes: 0,
        wall_time: start.elapsed(),
    }
}

/// Solves to optimality, then lexicographically re-solves with each
/// previous objective held at its optimum: first maximizing the summed
/// heat-storage level, then the summed battery level. This picks one
/// canonical schedule among equal-cost optima. The returned objective is
/// the original cost of the polished schedule.
pub fn solve_polished(inst: &MilpInstance, cfg: &SolverConfig) -> Result<SolveResult, SolverError> {
    let first = solve_milp(inst, cfg)?;
    if !first.is_optimal() || inst.layout.is_none() {
        return Ok(first);
    }
    let mut stage_inst = inst.clone();
    let mut stage = first.clone();
    let mut total = (first.iterations, first.nodes, first.wall_time);
    for node in [NodeId::Sh, NodeId::Se] {
        let tol = 1e-9 * stage.objective.abs().max(1.0);
        let next_inst = polish_instance(&stage_inst, stage.objective, tol, node);
        let next = solve_milp(&next_inst, cfg)?;
        total = (total.0 + next.iterations, total.1 + next.nodes, total.2 + next.wall_time);
        if !next.is_optimal() {
            log::warn!("polish on {node} ended {}; keeping previous stage", next.status.as_str());
            break;
        }
        stage_inst = next_inst;
        stage = next;
    }
    Ok(SolveResult {
        objective: inst.objective(&stage.x),
        best_bound: first.best_bound,
        iterations: total.0,
        nodes: total.1,
        wall_time: total.2,
        duals: None,
        ..stage
    })
}
