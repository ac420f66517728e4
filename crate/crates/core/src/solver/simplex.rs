//! Bounded-variable primal simplex.
//!
//! Every row `i` gets a logical variable `r_i` carrying the row activity,
//! so the system is `A x - r = 0` with the row sense and right-hand side
//! expressed as bounds on `r`. Structural variables keep their own bounds;
//! nonbasic variables sit at a bound (or at zero when free).
//!
//! Phase 1 starts from the all-logical basis and introduces one artificial
//! per row whose activity falls outside its bounds; minimizing the sum of
//! artificials either reaches a feasible basis or proves infeasibility.
//! Phase 2 uses Dantzig pricing and falls back to Bland's rule after a run
//! of degenerate pivots.

use std::time::Instant;

use super::lu::{BasisFactor, LuFactors};
use super::SolverConfig;
use crate::error::SolverError;
use crate::formulation::{MilpInstance, Sense};

const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub(crate) struct LpOutcome {
    pub status: LpStatus,
    /// Structural variable values.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row duals: `c - A^T y` are the reduced costs.
    pub duals: Vec<f64>,
    pub iterations: usize,
    /// Sum of artificials left after phase 1.
    pub phase1_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Free nonbasic, held at zero.
    AtZero,
}

struct Simplex<'a> {
    cfg: &'a SolverConfig,
    m: usize,
    n: usize,
    /// Structural columns, CSC.
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    /// Structural rows, CSR.
    row_start: Vec<usize>,
    row_col: Vec<usize>,
    row_val: Vec<f64>,
    /// Artificial column data: row and sign.
    art_row: Vec<usize>,
    art_sign: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    /// Variable held at each basis position.
    basis: Vec<usize>,
    /// Basis position of each basic variable.
    pos_of: Vec<usize>,
    factor: Option<BasisFactor>,
    iterations: usize,
    unit_idx: Vec<usize>,
    unit_val: Vec<f64>,
    // scratch
    work_row: Vec<f64>,
    work_pos: Vec<f64>,
    duals: Vec<f64>,
    /// Reduced costs, maintained across pivots and refreshed on refactor.
    d: Vec<f64>,
    alpha: Vec<f64>,
    /// Pivot row scratch: values and touched structural columns.
    prow_val: Vec<f64>,
    prow_mark: Vec<bool>,
    prow_touched: Vec<usize>,
    deadline: Option<Instant>,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl<'a> Simplex<'a> {
    fn new(inst: &MilpInstance, lower: &[f64], upper: &[f64], cfg: &'a SolverConfig) -> Self {
        let m = inst.n_rows();
        let n = inst.n_vars();
        let mut counts = vec![0usize; n];
        for c in &inst.constraints {
            for &(j, a) in &c.coeffs {
                if a != 0.0 {
                    counts[j] += 1;
                }
            }
        }
        let mut col_start = vec![0usize; n + 1];
        for j in 0..n {
            col_start[j + 1] = col_start[j] + counts[j];
        }
        let nnz = col_start[n];
        let mut col_row = vec![0usize; nnz];
        let mut col_val = vec![0.0; nnz];
        let mut fill = col_start.clone();
        for (i, c) in inst.constraints.iter().enumerate() {
            for &(j, a) in &c.coeffs {
                if a != 0.0 {
                    col_row[fill[j]] = i;
                    col_val[fill[j]] = a;
                    fill[j] += 1;
                }
            }
        }

        let mut row_start = vec![0usize; m + 1];
        for (i, c) in inst.constraints.iter().enumerate() {
            row_start[i + 1] = row_start[i] + c.coeffs.iter().filter(|(_, a)| *a != 0.0).count();
        }
        let mut row_col = Vec::with_capacity(nnz);
        let mut row_val = Vec::with_capacity(nnz);
        for c in &inst.constraints {
            for &(j, a) in &c.coeffs {
                if a != 0.0 {
                    row_col.push(j);
                    row_val.push(a);
                }
            }
        }

        let mut lo = Vec::with_capacity(n + 2 * m);
        let mut up = Vec::with_capacity(n + 2 * m);
        lo.extend_from_slice(lower);
        up.extend_from_slice(upper);
        for c in &inst.constraints {
            let (l, u) = match c.sense {
                Sense::Eq => (c.rhs, c.rhs),
                Sense::Le => (f64::NEG_INFINITY, c.rhs),
                Sense::Ge => (c.rhs, f64::INFINITY),
            };
            lo.push(l);
            up.push(u);
        }
        let mut cost: Vec<f64> = inst.variables.iter().map(|v| v.cost).collect();
        cost.resize(n + m, 0.0);

        Simplex {
            cfg,
            m,
            n,
            col_start,
            col_row,
            col_val,
            row_start,
            row_col,
            row_val,
            art_row: Vec::new(),
            art_sign: Vec::new(),
            lower: lo,
            upper: up,
            cost,
            x: vec![0.0; n + m],
            state: vec![VarState::AtLower; n + m],
            basis: Vec::with_capacity(m),
            pos_of: vec![usize::MAX; n + m],
            factor: None,
            iterations: 0,
            unit_idx: (0..m).collect(),
            unit_val: vec![-1.0; m],
            work_row: vec![0.0; m],
            work_pos: vec![0.0; m],
            duals: vec![0.0; m],
            d: Vec::new(),
            alpha: vec![0.0; m],
            prow_val: vec![0.0; n],
            prow_mark: vec![false; n],
            prow_touched: Vec::new(),
            deadline: cfg.time_limit.map(|d| Instant::now() + d),
        }
    }

    fn n_total(&self) -> usize {
        self.n + self.m + self.art_row.len()
    }

    /// Column `j` as (rows, values).
    fn column(&self, j: usize) -> (&[usize], &[f64]) {
        if j < self.n {
            let r = self.col_start[j]..self.col_start[j + 1];
            (&self.col_row[r.clone()], &self.col_val[r])
        } else if j < self.n + self.m {
            let i = j - self.n;
            (&self.unit_idx[i..i + 1], &self.unit_val[i..i + 1])
        } else {
            let k = j - self.n - self.m;
            (
                std::slice::from_ref(&self.art_row[k]),
                std::slice::from_ref(&self.art_sign[k]),
            )
        }
    }

    fn nonbasic_start(&self, j: usize) -> (VarState, f64) {
        let (l, u) = (self.lower[j], self.upper[j]);
        if l.is_finite() {
            (VarState::AtLower, l)
        } else if u.is_finite() {
            (VarState::AtUpper, u)
        } else {
            (VarState::AtZero, 0.0)
        }
    }

    /// All structurals nonbasic; each row's logical or an artificial basic.
    fn initial_basis(&mut self) {
        let mut activity = vec![0.0; self.m];
        for j in 0..self.n {
            let (s, v) = self.nonbasic_start(j);
            self.state[j] = s;
            self.x[j] = v;
            if v != 0.0 {
                let (idx, val) = self.column(j);
                for (&i, &a) in idx.iter().zip(val) {
                    activity[i] += a * v;
                }
            }
        }
        for i in 0..self.m {
            let r = self.n + i;
            let (l, u) = (self.lower[r], self.upper[r]);
            let act = activity[i];
            if act >= l && act <= u {
                self.state[r] = VarState::Basic;
                self.x[r] = act;
                self.pos_of[r] = i;
                self.basis.push(r);
            } else {
                let target = if act < l { l } else { u };
                self.state[r] = if act < l { VarState::AtLower } else { VarState::AtUpper };
                self.x[r] = target;
                // act - target + sign * w = 0, w >= 0
                let sign = if target > act { 1.0 } else { -1.0 };
                let a = self.n + self.m + self.art_row.len();
                self.art_row.push(i);
                self.art_sign.push(sign);
                self.lower.push(0.0);
                self.upper.push(f64::INFINITY);
                self.cost.push(0.0);
                self.x.push((target - act).abs());
                self.state.push(VarState::Basic);
                self.pos_of.push(i);
                self.basis.push(a);
            }
        }
    }

    fn refactor(&mut self) -> Result<(), SolverError> {
        loop {
            let result = {
                let basis = &self.basis;
                LuFactors::factorize(self.m, |p| self.column(basis[p]))
            };
            match result {
                Ok(lu) => {
                    self.factor = Some(BasisFactor::new(lu));
                    break;
                }
                Err(sing) => {
                    // Swap unpivotable columns for logicals of uncovered rows.
                    if sing.positions.len() != sing.rows.len() {
                        return Err(SolverError::Singular("rank repair mismatch".into()));
                    }
                    log::debug!("repairing singular basis ({} columns)", sing.positions.len());
                    for (&p, &row) in sing.positions.iter().zip(&sing.rows) {
                        let out = self.basis[p];
                        let logical = self.n + row;
                        if self.state[logical] == VarState::Basic {
                            return Err(SolverError::Singular("logical already basic".into()));
                        }
                        let (l, u) = (self.lower[out], self.upper[out]);
                        let v = self.x[out];
                        let (s, val) = if l.is_finite() && (v - l).abs() <= (v - u).abs() {
                            (VarState::AtLower, l)
                        } else if u.is_finite() {
                            (VarState::AtUpper, u)
                        } else if l.is_finite() {
                            (VarState::AtLower, l)
                        } else {
                            (VarState::AtZero, 0.0)
                        };
                        self.state[out] = s;
                        self.x[out] = val;
                        self.pos_of[out] = usize::MAX;
                        self.state[logical] = VarState::Basic;
                        self.pos_of[logical] = p;
                        self.basis[p] = logical;
                    }
                }
            }
        }
        self.recompute_basics();
        Ok(())
    }

    /// `x_B = B^{-1} (-N x_N)`.
    fn recompute_basics(&mut self) {
        let mut rhs = std::mem::take(&mut self.work_row);
        rhs.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.n_total() {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let v = self.x[j];
            if v == 0.0 {
                continue;
            }
            let (idx, val) = self.column(j);
            for (&i, &a) in idx.iter().zip(val) {
                rhs[i] -= a * v;
            }
        }
        let mut z = std::mem::take(&mut self.work_pos);
        self.factor.as_ref().unwrap().ftran(&mut rhs, &mut z);
        for p in 0..self.m {
            self.x[self.basis[p]] = z[p];
        }
        self.work_row = rhs;
        self.work_pos = z;
    }

    fn compute_duals(&mut self) {
        let mut c = std::mem::take(&mut self.work_pos);
        for p in 0..self.m {
            c[p] = self.cost[self.basis[p]];
        }
        let mut y = std::mem::take(&mut self.duals);
        self.factor.as_mut().unwrap().btran(&mut c, &mut y);
        self.duals = y;
        self.work_pos = c;
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        let y = &self.duals;
        if j < self.n {
            let r = self.col_start[j]..self.col_start[j + 1];
            let dot: f64 = self.col_row[r.clone()]
                .iter()
                .zip(&self.col_val[r])
                .map(|(&i, &a)| a * y[i])
                .sum();
            self.cost[j] - dot
        } else if j < self.n + self.m {
            self.cost[j] + y[j - self.n]
        } else {
            let k = j - self.n - self.m;
            self.cost[j] - self.art_sign[k] * y[self.art_row[k]]
        }
    }

    /// Entering variable and direction (+1 increase, -1 decrease).
    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let tol = self.cfg.optimality_tol;
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.n_total() {
            let st = self.state[j];
            if st == VarState::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let d = self.d[j];
            let dir = match st {
                VarState::AtLower if d < -tol => 1.0,
                VarState::AtUpper if d > tol => -1.0,
                VarState::AtZero if d.abs() > tol => -d.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if d.abs() > best_score {
                best_score = d.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn recompute_reduced_costs(&mut self) {
        self.compute_duals();
        let total = self.n_total();
        let mut d = std::mem::take(&mut self.d);
        d.clear();
        d.extend((0..total).map(|j| {
            if self.state[j] == VarState::Basic {
                0.0
            } else {
                self.reduced_cost(j)
            }
        }));
        self.d = d;
    }

    /// Updates reduced costs for the pivot that brings `q` into basis
    /// position `p`, using row `p` of `B^{-1} A` under the current basis.
    fn update_reduced_costs(&mut self, q: usize, p: usize, alpha_pq: f64) {
        let ratio = self.d[q] / alpha_pq;
        let mut e = std::mem::take(&mut self.work_pos);
        e.iter_mut().for_each(|v| *v = 0.0);
        e[p] = 1.0;
        let mut rho = std::mem::take(&mut self.work_row);
        self.factor.as_mut().unwrap().btran(&mut e, &mut rho);
        self.work_pos = e;

        for i in 0..self.m {
            let r = rho[i];
            if r == 0.0 {
                continue;
            }
            for k in self.row_start[i]..self.row_start[i + 1] {
                let j = self.row_col[k];
                if !self.prow_mark[j] {
                    self.prow_mark[j] = true;
                    self.prow_touched.push(j);
                }
                self.prow_val[j] += r * self.row_val[k];
            }
            let logical = self.n + i;
            if self.state[logical] != VarState::Basic {
                self.d[logical] += ratio * r;
            }
        }
        for k in 0..self.art_row.len() {
            let j = self.n + self.m + k;
            if self.state[j] != VarState::Basic {
                self.d[j] -= ratio * self.art_sign[k] * rho[self.art_row[k]];
            }
        }
        for &j in &self.prow_touched {
            if self.state[j] != VarState::Basic {
                self.d[j] -= ratio * self.prow_val[j];
            }
            self.prow_val[j] = 0.0;
            self.prow_mark[j] = false;
        }
        self.prow_touched.clear();
        self.work_row = rho;
        let out = self.basis[p];
        self.d[out] = -ratio;
        self.d[q] = 0.0;
    }

    fn check_limits(&self) -> Result<(), SolverError> {
        if self.iterations >= self.cfg.max_iterations {
            return Err(SolverError::IterationLimit(self.iterations));
        }
        if let Some(dl) = self.deadline {
            if self.iterations % 64 == 0 && Instant::now() > dl {
                return Err(SolverError::TimeLimit);
            }
        }
        Ok(())
    }

    fn run_phase(&mut self) -> Result<PhaseEnd, SolverError> {
        let mut degenerate_run = 0usize;
        self.recompute_reduced_costs();
        let mut fresh = true;
        loop {
            self.check_limits()?;
            let f = self.factor.as_ref().unwrap();
            if f.n_updates() >= self.cfg.refactor_every || f.is_bloated() {
                self.refactor()?;
                self.recompute_reduced_costs();
                fresh = true;
            }
            let bland = degenerate_run >= self.cfg.bland_after;
            let Some((q, dir)) = self.price(bland) else {
                if fresh {
                    return Ok(PhaseEnd::Optimal);
                }
                // Confirm with exact reduced costs before stopping.
                self.recompute_reduced_costs();
                fresh = true;
                continue;
            };
            fresh = false;

            // alpha = B^{-1} a_q
            let mut b = std::mem::take(&mut self.work_row);
            b.iter_mut().for_each(|v| *v = 0.0);
            {
                let (idx, val) = self.column(q);
                for (&i, &a) in idx.iter().zip(val) {
                    b[i] = a;
                }
            }
            let mut alpha = std::mem::take(&mut self.alpha);
            self.factor.as_ref().unwrap().ftran(&mut b, &mut alpha);
            self.work_row = b;

            // Ratio test. Basic variable at position p moves by -dir * alpha_p per unit step.
            let flip = self.upper[q] - self.lower[q];
            let mut theta = if flip.is_finite() { flip } else { f64::INFINITY };
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_alpha = 0.0f64;
            for p in 0..self.m {
                let a = alpha[p];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let j = self.basis[p];
                let rate = -dir * a;
                let (room, to_upper) = if rate > 0.0 {
                    if !self.upper[j].is_finite() {
                        continue;
                    }
                    ((self.upper[j] - self.x[j]).max(0.0) / rate, true)
                } else {
                    if !self.lower[j].is_finite() {
                        continue;
                    }
                    ((self.x[j] - self.lower[j]).max(0.0) / -rate, false)
                };
                let tie = 1e-12 * theta.max(1.0);
                let better = match leave {
                    None => room < theta,
                    Some(_) if room < theta - tie => true,
                    Some((lp, _)) if room <= theta + tie => {
                        if bland {
                            j < self.basis[lp]
                        } else {
                            a.abs() > leave_alpha
                        }
                    }
                    Some(_) => false,
                };
                if better {
                    theta = room;
                    leave = Some((p, to_upper));
                    leave_alpha = a.abs();
                }
            }
            if let Some((p, _)) = leave {
                // Recompute exactly for the chosen row.
                let j = self.basis[p];
                let rate = -dir * alpha[p];
                theta = if rate > 0.0 {
                    (self.upper[j] - self.x[j]).max(0.0) / rate
                } else {
                    (self.x[j] - self.lower[j]).max(0.0) / -rate
                };
                if flip.is_finite() && flip <= theta {
                    theta = flip;
                    leave = None;
                }
            }
            if !theta.is_finite() {
                self.alpha = alpha;
                return Ok(PhaseEnd::Unbounded);
            }

            self.iterations += 1;
            if theta <= DEGENERATE_STEP {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            if theta > 0.0 {
                for p in 0..self.m {
                    let a = alpha[p];
                    if a != 0.0 {
                        self.x[self.basis[p]] -= dir * theta * a;
                    }
                }
            }
            match leave {
                None => {
                    // Bound flip.
                    let (s, v) = if dir > 0.0 {
                        (VarState::AtUpper, self.upper[q])
                    } else {
                        (VarState::AtLower, self.lower[q])
                    };
                    self.state[q] = s;
                    self.x[q] = v;
                }
                Some((p, to_upper)) => {
                    let out = self.basis[p];
                    self.x[q] += dir * theta;
                    if to_upper {
                        self.state[out] = VarState::AtUpper;
                        self.x[out] = self.upper[out];
                    } else {
                        self.state[out] = VarState::AtLower;
                        self.x[out] = self.lower[out];
                    }
                    self.update_reduced_costs(q, p, alpha[p]);
                    self.pos_of[out] = usize::MAX;
                    self.state[q] = VarState::Basic;
                    self.pos_of[q] = p;
                    self.basis[p] = q;
                    self.factor.as_mut().unwrap().update(p, &alpha);
                }
            }
            self.alpha = alpha;
        }
    }

    fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    fn artificial_sum(&self) -> f64 {
        (self.n + self.m..self.n_total()).map(|j| self.x[j].max(0.0)).sum()
    }

    fn solve(mut self) -> Result<LpOutcome, SolverError> {
        self.initial_basis();
        self.refactor()?;
        let mut phase1_residual = 0.0;
        if !self.art_row.is_empty() {
            let saved: Vec<f64> = self.cost.clone();
            for c in self.cost.iter_mut() {
                *c = 0.0;
            }
            for j in self.n + self.m..self.n_total() {
                self.cost[j] = 1.0;
            }
            self.run_phase()?;
            self.refactor()?;
            phase1_residual = self.artificial_sum();
            let rhs_scale = self
                .lower
                .iter()
                .chain(&self.upper)
                .skip(self.n)
                .take(2 * self.m)
                .filter(|v| v.is_finite())
                .fold(1.0f64, |a, v| a.max(v.abs()));
            if phase1_residual > self.cfg.phase1_tol * rhs_scale {
                return Ok(LpOutcome {
                    status: LpStatus::Infeasible,
                    x: self.x[..self.n].to_vec(),
                    objective: f64::NAN,
                    duals: vec![0.0; self.m],
                    iterations: self.iterations,
                    phase1_residual,
                });
            }
            // Artificials are pinned at zero for phase 2.
            for j in self.n + self.m..self.n_total() {
                self.upper[j] = 0.0;
                if self.state[j] != VarState::Basic {
                    self.state[j] = VarState::AtLower;
                    self.x[j] = 0.0;
                }
            }
            let mut cost = saved;
            cost.resize(self.n_total(), 0.0);
            self.cost = cost;
            self.refactor()?;
        }

        let end = self.run_phase()?;
        self.refactor()?;
        self.compute_duals();
        let status = match end {
            PhaseEnd::Optimal => LpStatus::Optimal,
            PhaseEnd::Unbounded => LpStatus::Unbounded,
        };
        Ok(LpOutcome {
            status,
            x: self.x[..self.n].to_vec(),
            objective: self.objective(),
            duals: self.duals.clone(),
            iterations: self.iterations,
            phase1_residual,
        })
    }
}

/// Solves the continuous problem with the given variable bounds
/// (binaries are treated as continuous).
pub(crate) fn solve_bounded(
    inst: &MilpInstance,
    lower: &[f64],
    upper: &[f64],
    cfg: &SolverConfig,
) -> Result<LpOutcome, SolverError> {
    for j in 0..inst.n_vars() {
        if lower[j] > upper[j] {
            return Ok(LpOutcome {
                status: LpStatus::Infeasible,
                x: vec![0.0; inst.n_vars()],
                objective: f64::NAN,
                duals: vec![0.0; inst.n_rows()],
                iterations: 0,
                phase1_residual: lower[j] - upper[j],
            });
        }
    }
    Simplex::new(inst, lower, upper, cfg).solve()
}
