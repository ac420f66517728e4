use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::simplex::{solve_bounded, LpStatus};
use super::{bounds_of, lp_result, SolveResult, SolveStatus, SolverConfig};
use crate::error::SolverError;
use crate::formulation::MilpInstance;

struct Node {
    bound: f64,
    id: usize,
    /// (variable, value) fixings accumulated along the path.
    fixings: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Most fractional binary; ties go to the lowest index.
fn branching_var(binaries: &[usize], x: &[f64], tol: f64) -> Option<usize> {
    let mut best = None;
    let mut best_dist = f64::INFINITY;
    for &j in binaries {
        let frac = x[j] - x[j].floor();
        if frac <= tol || frac >= 1.0 - tol {
            continue;
        }
        let dist = (frac - 0.5).abs();
        if dist < best_dist {
            best_dist = dist;
            best = Some(j);
        }
    }
    best
}

/// Best-bound branch-and-bound over the binary variables; each node solves
/// its LP relaxation from scratch. Without binaries this is [`super::solve_lp`].
pub fn solve_milp(inst: &MilpInstance, cfg: &SolverConfig) -> Result<SolveResult, SolverError> {
    let start = Instant::now();
    let binaries = inst.binary_indices();
    let (base_lo, base_up) = bounds_of(inst);
    if binaries.is_empty() {
        let out = solve_bounded(inst, &base_lo, &base_up, cfg)?;
        return Ok(lp_result(out, start));
    }

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        id: 0,
        fixings: Vec::new(),
    });
    let mut next_id = 1;
    let mut nodes = 0usize;
    let mut iterations = 0usize;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut root_status = None;
    let mut lo = base_lo.clone();
    let mut up = base_up.clone();

    let prune = |bound: f64, inc: &Option<(f64, Vec<f64>)>| -> bool {
        match inc {
            Some((best, _)) => bound >= best - cfg.mip_gap * best.abs().max(1.0),
            None => false,
        }
    };

    let mut stopped = None;
    while let Some(node) = heap.pop() {
        if prune(node.bound, &incumbent) {
            // Remaining nodes are no better.
            heap.clear();
            break;
        }
        if cfg.node_limit.is_some_and(|lim| nodes >= lim) {
            heap.push(node);
            stopped = Some(SolveStatus::NodeLimit);
            break;
        }
        if cfg.time_limit.is_some_and(|lim| start.elapsed() > lim) {
            heap.push(node);
            stopped = Some(SolveStatus::TimeLimit);
            break;
        }
        nodes += 1;

        lo.copy_from_slice(&base_lo);
        up.copy_from_slice(&base_up);
        for &(j, v) in &node.fixings {
            lo[j] = v;
            up[j] = v;
        }
        let out = solve_bounded(inst, &lo, &up, cfg)?;
        iterations += out.iterations;
        if node.id == 0 {
            root_status = Some(out.status);
        }
        match out.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if node.id == 0 {
                    return Ok(SolveResult {
                        status: SolveStatus::Unbounded,
                        objective: f64::NAN,
                        x: Vec::new(),
                        duals: None,
                        best_bound: f64::NEG_INFINITY,
                        iterations,
                        nodes,
                        wall_time: start.elapsed(),
                    });
                }
                continue;
            }
            LpStatus::Optimal => {}
        }
        if prune(out.objective, &incumbent) {
            continue;
        }
        match branching_var(&binaries, &out.x, cfg.integrality_tol) {
            Some(j) => {
                for v in [0.0, 1.0] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((j, v));
                    heap.push(Node {
                        bound: out.objective,
                        id: next_id,
                        fixings,
                    });
                    next_id += 1;
                }
            }
            None => {
                // Snap binaries and re-solve so continuous values match them exactly.
                let mut snapped = false;
                for &j in &binaries {
                    let r = out.x[j].round();
                    lo[j] = r;
                    up[j] = r;
                    if out.x[j] != r {
                        snapped = true;
                    }
                }
                let (obj, x) = if snapped {
                    let exact = solve_bounded(inst, &lo, &up, cfg)?;
                    iterations += exact.iterations;
                    if exact.status != LpStatus::Optimal {
                        log::warn!("rounded binaries made node {} infeasible", node.id);
                        continue;
                    }
                    (exact.objective, exact.x)
                } else {
                    (out.objective, out.x)
                };
                let better = incumbent.as_ref().is_none_or(|(best, _)| obj < *best);
                if better {
                    incumbent = Some((obj, x));
                }
            }
        }
    }

    let best_bound = heap
        .iter()
        .map(|n| n.bound)
        .fold(incumbent.as_ref().map_or(f64::INFINITY, |(v, _)| *v), f64::min);
    let wall_time = start.elapsed();
    Ok(match (incumbent, stopped) {
        (Some((obj, x)), None) => SolveResult {
            status: SolveStatus::Optimal,
            objective: obj,
            x,
            duals: None,
            best_bound: obj,
            iterations,
            nodes,
            wall_time,
        },
        (inc, Some(status)) => {
            let (objective, x) = inc.map_or((f64::NAN, Vec::new()), |(o, x)| (o, x));
            SolveResult {
                status,
                objective,
                x,
                duals: None,
                best_bound,
                iterations,
                nodes,
                wall_time,
            }
        }
        (None, None) => {
            if root_status == Some(LpStatus::Optimal) {
                log::debug!("relaxation feasible but no binary assignment is");
            }
            SolveResult {
                status: SolveStatus::Infeasible,
                objective: f64::NAN,
                x: Vec::new(),
                duals: None,
                best_bound: f64::NAN,
                iterations,
                nodes,
                wall_time,
            }
        }
    })
}
