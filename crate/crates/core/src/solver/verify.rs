use super::{SolveResult, SolverConfig};
use crate::formulation::{MilpInstance, Sense};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItemKind {
    Row,
    Bound,
    Integrality,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlaggedItem {
    pub kind: ItemKind,
    pub name: String,
    /// Relative violation.
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationReport {
    /// Largest relative violation over rows and bounds.
    pub max_violation: f64,
    /// Largest distance of a binary from {0, 1}.
    pub max_integrality: f64,
    /// Items whose violation exceeds the default tolerances.
    pub flagged: Vec<FlaggedItem>,
    pub rows_checked: usize,
    pub bounds_checked: usize,
}

impl ViolationReport {
    pub fn is_clean(&self) -> bool {
        self.flagged.is_empty()
    }
}

/// Re-checks every row, bound and binary of `inst` at the primal point of
/// `result`. Row violations are relative to the larger of 1, |rhs| and the
/// largest term magnitude; bound violations to the larger of 1 and |bound|.
pub fn verify_solution(inst: &MilpInstance, result: &SolveResult) -> ViolationReport {
    verify_point(inst, &result.x, &SolverConfig::default())
}

pub(crate) fn verify_point(inst: &MilpInstance, x: &[f64], cfg: &SolverConfig) -> ViolationReport {
    let mut report = ViolationReport {
        max_violation: 0.0,
        max_integrality: 0.0,
        flagged: Vec::new(),
        rows_checked: 0,
        bounds_checked: 0,
    };
    if x.len() != inst.n_vars() {
        report.max_violation = f64::INFINITY;
        report.flagged.push(FlaggedItem {
            kind: ItemKind::Row,
            name: format!("solution has {} values for {} variables", x.len(), inst.n_vars()),
            violation: f64::INFINITY,
        });
        return report;
    }
    for c in &inst.constraints {
        let rel = c.violation(x) / c.scale(x);
        report.rows_checked += 1;
        report.max_violation = report.max_violation.max(rel);
        if rel > cfg.feasibility_tol {
            report.flagged.push(FlaggedItem {
                kind: ItemKind::Row,
                name: c.name.clone(),
                violation: rel,
            });
        }
    }
    for (v, &xi) in inst.variables.iter().zip(x) {
        report.bounds_checked += 1;
        let below = if v.lower.is_finite() { (v.lower - xi) / v.lower.abs().max(1.0) } else { 0.0 };
        let above = if v.upper.is_finite() { (xi - v.upper) / v.upper.abs().max(1.0) } else { 0.0 };
        let rel = below.max(above).max(0.0);
        report.max_violation = report.max_violation.max(rel);
        if rel > cfg.feasibility_tol || !xi.is_finite() {
            report.flagged.push(FlaggedItem {
                kind: ItemKind::Bound,
                name: v.name.clone(),
                violation: if xi.is_finite() { rel } else { f64::INFINITY },
            });
        }
        if v.binary {
            let d = (xi - xi.round()).abs();
            report.max_integrality = report.max_integrality.max(d);
            if d > cfg.integrality_tol {
                report.flagged.push(FlaggedItem {
                    kind: ItemKind::Integrality,
                    name: v.name.clone(),
                    violation: d,
                });
            }
        }
    }
    report
}

/// Dual feasibility and dual objective recomputed from the instance data
/// and the row duals of an LP solution.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    pub dual_objective: f64,
    pub primal_objective: f64,
    /// Largest sign violation of a row dual or reduced cost.
    pub max_dual_infeasibility: f64,
    pub feasible: bool,
}

impl DualCertificate {
    pub fn relative_gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs() / self.primal_objective.abs().max(1.0)
    }
}

/// For `min c x` subject to row senses and variable bounds, with row duals
/// `y` and reduced costs `d = c - A^T y`: `y_i` must be <= 0 on `<=` rows and
/// >= 0 on `>=` rows; `d_j > 0` needs a finite lower bound and `d_j < 0` a
/// finite upper bound. The dual objective is `b.y + sum_j d_j * bound_j`.
pub fn dual_certificate(inst: &MilpInstance, result: &SolveResult, tol: f64) -> Option<DualCertificate> {
    let y = result.duals.as_ref()?;
    let mut d: Vec<f64> = inst.variables.iter().map(|v| v.cost).collect();
    let mut infeas = 0.0f64;
    let mut dual_obj = 0.0;
    for (c, &yi) in inst.constraints.iter().zip(y) {
        for &(j, a) in &c.coeffs {
            d[j] -= a * yi;
        }
        let bad = match c.sense {
            Sense::Le => yi.max(0.0),
            Sense::Ge => (-yi).max(0.0),
            Sense::Eq => 0.0,
        };
        infeas = infeas.max(bad);
        dual_obj += c.rhs * yi;
    }
    let cost_scale = inst.variables.iter().fold(1.0f64, |a, v| a.max(v.cost.abs()));
    for (v, &dj) in inst.variables.iter().zip(&d) {
        let small = dj.abs() <= tol * cost_scale;
        if dj > 0.0 {
            if v.lower.is_finite() {
                dual_obj += dj * v.lower;
            } else if !small {
                infeas = infeas.max(dj);
            }
        } else if dj < 0.0 {
            if v.upper.is_finite() {
                dual_obj += dj * v.upper;
            } else if !small {
                infeas = infeas.max(-dj);
            }
        }
    }
    Some(DualCertificate {
        dual_objective: dual_obj,
        primal_objective: result.objective,
        max_dual_infeasibility: infeas,
        feasible: infeas <= tol * cost_scale.max(1.0) * 10.0,
    })
}
