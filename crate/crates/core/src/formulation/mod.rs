//! Translation of one scheduling window into a sparse MILP.
//!
//! Per step the model holds one flow variable per arc and one state of
//! energy per storage. Rows per step, in order: electric and heat demand
//! balance, PV balance, solar-thermal and AC availability, the two state
//! recursions, charge and discharge bounds for both storages, and the heat
//! pump conversion and capacity. End-level rows follow the last step.
//! State bounds are variable bounds, not rows.
//!
//! Simultaneous charge and discharge only pays off when a price is
//! negative, so the charge/discharge selector binaries are created only
//! for steps with a negative buy or sell price. Elsewhere the selector is
//! the constant 1 in both bound rows.

mod audit;
mod instance;
pub mod lp_file;

use std::collections::BTreeSet;

pub use audit::{constraint_audit, AuditReport, BoundEntry};
pub use instance::{Constraint, MilpInstance, RowTag, Sense, Variable, WindowLayout};

use crate::error::FormulationError;
use crate::network::{validate_network, Arc, EnergyNetwork, NodeId, SeriesBundle, StorageParams};

/// Terminal condition on a storage at the end of a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndPolicy {
    Free,
    FixedAt(f64),
    ForceMin,
    ForceMax,
}

impl EndPolicy {
    /// Target level, if the policy pins one.
    pub fn target(self, sp: &StorageParams) -> Option<f64> {
        match self {
            EndPolicy::Free => None,
            EndPolicy::FixedAt(v) => Some(v),
            EndPolicy::ForceMin => Some(sp.e_min),
            EndPolicy::ForceMax => Some(sp.e_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageBoundary {
    /// Level before the first step of the window (kWh).
    pub init: f64,
    pub end: EndPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConditions {
    pub battery: StorageBoundary,
    pub heat: StorageBoundary,
    /// When set, pinned end levels become soft: deviations are allowed at
    /// this cost (€/kWh).
    pub soft_end_penalty: Option<f64>,
}

impl BoundaryConditions {
    pub fn new(battery: StorageBoundary, heat: StorageBoundary) -> Self {
        BoundaryConditions {
            battery,
            heat,
            soft_end_penalty: None,
        }
    }

    /// Initial levels and end levels taken from the storage parameters;
    /// storages without `e_end` are left free.
    pub fn from_network(net: &EnergyNetwork) -> Self {
        let of = |sp: &StorageParams| StorageBoundary {
            init: sp.e_init,
            end: sp.e_end.map_or(EndPolicy::Free, EndPolicy::FixedAt),
        };
        Self::new(of(net.storage(NodeId::Se)), of(net.storage(NodeId::Sh)))
    }

    pub fn get(&self, node: NodeId) -> &StorageBoundary {
        match node {
            NodeId::Se => &self.battery,
            NodeId::Sh => &self.heat,
            other => panic!("{other} is not a storage"),
        }
    }

    pub fn get_mut(&mut self, node: NodeId) -> &mut StorageBoundary {
        match node {
            NodeId::Se => &mut self.battery,
            NodeId::Sh => &mut self.heat,
            other => panic!("{other} is not a storage"),
        }
    }
}

/// A slice of the study period to optimize.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpec {
    /// Absolute index of the first step.
    pub start_step: usize,
    pub dt_hours: f64,
    /// Series for exactly the steps of the window.
    pub series: SeriesBundle,
    pub boundary: BoundaryConditions,
}

impl WindowSpec {
    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Local steps of the window that get charge/discharge selector binaries:
/// those where either price is negative.
pub fn flag_binary_steps(win: &WindowSpec) -> BTreeSet<usize> {
    let s = &win.series;
    (0..win.len())
        .filter(|&t| s.c_buy[t] < 0.0 || s.c_sell[t] < 0.0)
        .collect()
}

const LEVEL_SLOP: f64 = 1e-7;

fn clamp_level(
    node: NodeId,
    v: f64,
    sp: &StorageParams,
    err: fn(&'static str, f64, f64, f64) -> FormulationError,
) -> Result<f64, FormulationError> {
    let slop = LEVEL_SLOP * sp.e_max.abs().max(1.0);
    if !(v >= sp.e_min - slop && v <= sp.e_max + slop) {
        return Err(err(node.as_str(), v, sp.e_min, sp.e_max));
    }
    Ok(v.clamp(sp.e_min, sp.e_max))
}

/// Builds the MILP for one window.
pub fn build_milp(net: &EnergyNetwork, win: &WindowSpec) -> Result<MilpInstance, FormulationError> {
    let violations = validate_network(net);
    if !violations.is_empty() {
        return Err(FormulationError::InvalidNetwork(violations));
    }
    let steps = win.len();
    if steps == 0 {
        return Err(FormulationError::EmptyWindow);
    }
    win.series.validate(steps)?;

    let dt = win.dt_hours;
    let arcs = net.arcs.clone();
    let mut layout = WindowLayout::new(win.start_step, steps, dt, arcs.clone());
    let s = &win.series;

    let mut init = [0.0; 2];
    let mut end_target = [None; 2];
    for (k, node) in NodeId::STORAGES.into_iter().enumerate() {
        let sp = net.storage(node);
        let b = win.boundary.get(node);
        init[k] = clamp_level(node, b.init, sp, |node, value, min, max| {
            FormulationError::InitLevelOutOfBounds { node, value, min, max }
        })?;
        if let Some(v) = b.end.target(sp) {
            end_target[k] = Some(clamp_level(node, v, sp, |node, value, min, max| {
                FormulationError::EndLevelOutOfBounds { node, value, min, max }
            })?);
        }
    }

    let mut variables = Vec::with_capacity(layout.n_core_vars());
    for t in 0..steps {
        for arc in &arcs {
            let cost = if arc.from == NodeId::Pg {
                dt * s.c_buy[t]
            } else if arc.to == NodeId::Pg {
                -dt * s.c_sell[t]
            } else {
                0.0
            };
            variables.push(Variable::continuous(
                format!("p_{}_{}_{t}", arc.from, arc.to),
                0.0,
                f64::INFINITY,
                cost,
            ));
        }
        for node in NodeId::STORAGES {
            let sp = net.storage(node);
            variables.push(Variable::continuous(format!("e_{node}_{t}"), sp.e_min, sp.e_max, 0.0));
        }
    }
    for t in flag_binary_steps(win) {
        for node in NodeId::STORAGES {
            layout.set_binary(node, t, variables.len());
            variables.push(Variable::binary(format!("y_{node}_{t}")));
        }
    }

    let into = |node: NodeId| -> Vec<usize> {
        arcs.iter().enumerate().filter(|(_, a)| a.to == node).map(|(k, _)| k).collect()
    };
    let out_of = |node: NodeId| -> Vec<usize> {
        arcs.iter().enumerate().filter(|(_, a)| a.from == node).map(|(k, _)| k).collect()
    };
    let in_de = into(NodeId::De);
    let in_dh = into(NodeId::Dh);
    let out_pv = out_of(NodeId::Pv);
    let out_st = out_of(NodeId::St);
    let out_ac = out_of(NodeId::Ac);
    let in_hp = into(NodeId::Hp);
    let out_hp = out_of(NodeId::Hp);
    let storage_in = [into(NodeId::Se), into(NodeId::Sh)];
    let storage_out = [out_of(NodeId::Se), out_of(NodeId::Sh)];

    let mut rows = Vec::with_capacity(13 * steps + 2);
    let mut push = |name: String, tag: RowTag, mut coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64| {
        coeffs.sort_by_key(|&(j, _)| j);
        rows.push(Constraint {
            name,
            tag,
            coeffs,
            sense,
            rhs,
        });
    };
    let sum = |arcs: &[usize], t: usize, a: f64| -> Vec<(usize, f64)> {
        arcs.iter().map(|&k| (layout.flow(k, t), a)).collect()
    };

    for t in 0..steps {
        push(format!("demand_DE_{t}"), RowTag::Demand(NodeId::De), sum(&in_de, t, 1.0), Sense::Eq, s.d_de[t]);
        push(format!("demand_DH_{t}"), RowTag::Demand(NodeId::Dh), sum(&in_dh, t, 1.0), Sense::Eq, s.d_dh[t]);
        push(format!("pv_{t}"), RowTag::PvBalance, sum(&out_pv, t, 1.0), Sense::Eq, s.p_pv[t]);
        push(format!("st_{t}"), RowTag::SolarThermalLimit, sum(&out_st, t, 1.0), Sense::Le, s.p_st[t]);
        push(format!("ac_{t}"), RowTag::AirConditioningLimit, sum(&out_ac, t, 1.0), Sense::Le, s.p_ac[t]);

        for (k, node) in NodeId::STORAGES.into_iter().enumerate() {
            let sp = net.storage(node);
            let rho = sp.step_retention(dt);
            let mut row = vec![(layout.state(node, t), 1.0)];
            row.extend(sum(&storage_in[k], t, -dt * sp.eta_ch));
            row.extend(sum(&storage_out[k], t, dt / sp.eta_dis));
            let rhs = if t == 0 {
                rho * init[k]
            } else {
                row.push((layout.state(node, t - 1), -rho));
                0.0
            };
            push(format!("soe_{node}_{t}"), RowTag::StateOfEnergy(node), row, Sense::Eq, rhs);
        }

        for (k, node) in NodeId::STORAGES.into_iter().enumerate() {
            let sp = net.storage(node);
            let y = layout.binary(node, t);
            let mut ch = sum(&storage_in[k], t, 1.0);
            let mut dis = sum(&storage_out[k], t, 1.0);
            let (ch_rhs, dis_rhs) = match y {
                Some(y) => {
                    ch.push((y, -sp.p_ch_max));
                    dis.push((y, sp.p_dis_max));
                    (0.0, sp.p_dis_max)
                }
                None => (sp.p_ch_max, sp.p_dis_max),
            };
            push(format!("charge_{node}_{t}"), RowTag::ChargeBound(node), ch, Sense::Le, ch_rhs);
            push(format!("discharge_{node}_{t}"), RowTag::DischargeBound(node), dis, Sense::Le, dis_rhs);
        }

        let mut ratio = sum(&out_hp, t, 1.0);
        ratio.extend(sum(&in_hp, t, -net.heat_pump.cop));
        push(format!("hp_ratio_{t}"), RowTag::HeatPumpRatio, ratio, Sense::Eq, 0.0);
        push(format!("hp_cap_{t}"), RowTag::HeatPumpCap, sum(&out_hp, t, 1.0), Sense::Le, net.heat_pump.p_heat_max);
    }

    for (k, node) in NodeId::STORAGES.into_iter().enumerate() {
        let Some(target) = end_target[k] else { continue };
        let mut row = vec![(layout.state(node, steps - 1), 1.0)];
        if let Some(penalty) = win.boundary.soft_end_penalty {
            let short = variables.len();
            variables.push(Variable::continuous(format!("s_short_{node}"), 0.0, f64::INFINITY, penalty));
            variables.push(Variable::continuous(format!("s_excess_{node}"), 0.0, f64::INFINITY, penalty));
            row.push((short, 1.0));
            row.push((short + 1, -1.0));
            layout.end_slacks.insert(node, (short, short + 1));
        }
        push(format!("end_{node}"), RowTag::EndLevel(node), row, Sense::Eq, target);
    }

    Ok(MilpInstance {
        variables,
        constraints: rows,
        layout: Some(layout),
    })
}

/// Copy of `inst` whose objective maximizes the summed level of `node`
/// while the current objective stays within `tol` of `optimum`. Applied
/// repeatedly it picks one canonical point among equal-cost optima.
pub fn polish_instance(inst: &MilpInstance, optimum: f64, tol: f64, node: NodeId) -> MilpInstance {
    let mut out = inst.clone();
    let cut: Vec<(usize, f64)> = inst
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.cost != 0.0)
        .map(|(j, v)| (j, v.cost))
        .collect();
    out.constraints.push(Constraint {
        name: "objective_cut".into(),
        tag: RowTag::ObjectiveCut,
        coeffs: cut,
        sense: Sense::Le,
        rhs: optimum + tol,
    });
    for v in &mut out.variables {
        v.cost = 0.0;
    }
    if let Some(layout) = &inst.layout {
        for t in 0..layout.steps {
            out.variables[layout.state(node, t)].cost = -1.0;
        }
    }
    out
}

/// Per-step flows of a window solution, keyed by arc.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFlows {
    pub arcs: Vec<Arc>,
    /// `flows[t][k]` is the flow on `arcs[k]` at local step `t`.
    pub flows: Vec<Vec<f64>>,
    pub se: Vec<f64>,
    pub sh: Vec<f64>,
}

impl WindowFlows {
    pub fn extract(layout: &WindowLayout, x: &[f64]) -> Self {
        let flows = (0..layout.steps)
            .map(|t| (0..layout.arcs.len()).map(|k| x[layout.flow(k, t)]).collect())
            .collect();
        WindowFlows {
            arcs: layout.arcs.clone(),
            flows,
            se: (0..layout.steps).map(|t| x[layout.state(NodeId::Se, t)]).collect(),
            sh: (0..layout.steps).map(|t| x[layout.state(NodeId::Sh, t)]).collect(),
        }
    }
}

/// Grid cost of a flow schedule: imports at the buy price minus exports at
/// the sell price, times the step length. Independent of the instance
/// objective vector.
pub fn dispatch_cost(arcs: &[Arc], flows: &[Vec<f64>], series: &SeriesBundle, dt_hours: f64) -> f64 {
    flows
        .iter()
        .enumerate()
        .map(|(t, row)| step_cost(arcs, row, series.c_buy[t], series.c_sell[t], dt_hours))
        .sum()
}

pub(crate) fn step_cost(arcs: &[Arc], row: &[f64], c_buy: f64, c_sell: f64, dt_hours: f64) -> f64 {
    let mut bought = 0.0;
    let mut sold = 0.0;
    for (arc, p) in arcs.iter().zip(row) {
        if arc.from == NodeId::Pg {
            bought += p;
        }
        if arc.to == NodeId::Pg {
            sold += p;
        }
    }
    dt_hours * (c_buy * bought - c_sell * sold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::HeatPumpParams;

    fn window(series: SeriesBundle, net: &EnergyNetwork) -> WindowSpec {
        WindowSpec {
            start_step: 0,
            dt_hours: 1.0,
            series,
            boundary: BoundaryConditions::new(
                StorageBoundary {
                    init: net.storage(NodeId::Se).e_init,
                    end: EndPolicy::Free,
                },
                StorageBoundary {
                    init: net.storage(NodeId::Sh).e_init,
                    end: EndPolicy::Free,
                },
            ),
        }
    }

    #[test]
    fn row_and_variable_counts() {
        let net = EnergyNetwork::reference();
        let inst = build_milp(&net, &window(SeriesBundle::zeros(24), &net)).unwrap();
        assert_eq!(inst.n_vars(), 24 * 18);
        assert_eq!(inst.n_rows(), 24 * 9 + 24 * 4);
        assert_eq!(inst.n_binaries(), 0);
        assert!(inst
            .variables
            .iter()
            .filter(|v| v.name.starts_with("p_"))
            .all(|v| v.lower == 0.0));
    }

    #[test]
    fn binaries_only_on_negative_price_steps() {
        let net = EnergyNetwork::reference();
        let mut s = SeriesBundle::zeros(3);
        s.c_buy = vec![0.3, 0.2, 0.25];
        s.c_sell = vec![0.1, -0.02, 0.05];
        let win = window(s, &net);
        assert_eq!(flag_binary_steps(&win), BTreeSet::from([1]));
        let inst = build_milp(&net, &win).unwrap();
        assert_eq!(inst.n_binaries(), 2);
        let layout = inst.layout.as_ref().unwrap();
        let y = layout.binary(NodeId::Se, 1).unwrap();
        let ch = inst.constraints.iter().find(|c| c.name == "charge_SE_1").unwrap();
        assert_eq!(ch.rhs, 0.0);
        assert!(ch.coeffs.contains(&(y, -16.0)));
        let dis = inst.constraints.iter().find(|c| c.name == "discharge_SE_1").unwrap();
        assert_eq!(dis.rhs, 10.0);
        assert!(dis.coeffs.contains(&(y, 10.0)));
        assert!(layout.binary(NodeId::Sh, 0).is_none());
    }

    #[test]
    fn all_positive_prices_give_no_binaries() {
        let net = EnergyNetwork::reference();
        let mut s = SeriesBundle::zeros(2);
        s.c_buy = vec![0.3, 0.2];
        s.c_sell = vec![0.1, 0.05];
        assert!(flag_binary_steps(&window(s, &net)).is_empty());
    }

    #[test]
    fn end_policies_emit_rows() {
        let net = EnergyNetwork::reference();
        let mut win = window(SeriesBundle::zeros(4), &net);
        let inst = build_milp(&net, &win).unwrap();
        assert_eq!(inst.rows_tagged(RowTag::EndLevel(NodeId::Se)), 0);
        win.boundary.battery.end = EndPolicy::ForceMax;
        win.boundary.heat.end = EndPolicy::FixedAt(3000.0);
        let inst = build_milp(&net, &win).unwrap();
        let se_end = inst.constraints.iter().find(|c| c.tag == RowTag::EndLevel(NodeId::Se)).unwrap();
        assert_eq!(se_end.rhs, 49.0);
        let sh_end = inst.constraints.iter().find(|c| c.tag == RowTag::EndLevel(NodeId::Sh)).unwrap();
        assert_eq!(sh_end.rhs, 3000.0);
        assert_eq!(sh_end.coeffs, vec![(inst.layout.as_ref().unwrap().state(NodeId::Sh, 3), 1.0)]);
    }

    #[test]
    fn end_level_outside_bounds_is_an_error() {
        let net = EnergyNetwork::reference();
        let mut win = window(SeriesBundle::zeros(2), &net);
        win.boundary.heat.end = EndPolicy::FixedAt(5000.0);
        assert!(matches!(
            build_milp(&net, &win),
            Err(FormulationError::EndLevelOutOfBounds { node: "SH", .. })
        ));
    }

    #[test]
    fn invalid_network_is_rejected() {
        let mut net = EnergyNetwork::reference();
        net.arcs.push(Arc::new(NodeId::Dh, NodeId::Pg));
        let win = window(SeriesBundle::zeros(1), &net);
        assert!(matches!(build_milp(&net, &win), Err(FormulationError::InvalidNetwork(_))));
    }

    #[test]
    fn state_row_uses_initial_level_and_retention() {
        let net = EnergyNetwork::reference();
        let inst = build_milp(&net, &window(SeriesBundle::zeros(2), &net)).unwrap();
        let r0 = inst.constraints.iter().find(|c| c.name == "soe_SH_0").unwrap();
        assert!((r0.rhs - 0.99993 * 3000.0).abs() < 1e-9);
        let r1 = inst.constraints.iter().find(|c| c.name == "soe_SH_1").unwrap();
        let layout = inst.layout.as_ref().unwrap();
        assert!(r1.coeffs.contains(&(layout.state(NodeId::Sh, 0), -0.99993)));
        let hp_sh = layout.flow_on(Arc::new(NodeId::Hp, NodeId::Sh), 1).unwrap();
        assert!(r1.coeffs.contains(&(hp_sh, -0.78)));
        let sh_dh = layout.flow_on(Arc::new(NodeId::Sh, NodeId::Dh), 1).unwrap();
        assert!(r1.coeffs.iter().any(|&(j, a)| j == sh_dh && (a - 1.0 / 0.78).abs() < 1e-15));
    }

    #[test]
    fn objective_prices_grid_flows() {
        let net = EnergyNetwork::new(
            crate::network::StorageParams::reference_battery(),
            crate::network::StorageParams::reference_heat_storage(),
            HeatPumpParams::reference(),
        );
        let mut s = SeriesBundle::zeros(1);
        s.c_buy = vec![0.3];
        s.c_sell = vec![0.1];
        let inst = build_milp(&net, &window(s, &net)).unwrap();
        let layout = inst.layout.as_ref().unwrap();
        let pg_hp = layout.flow_on(Arc::new(NodeId::Pg, NodeId::Hp), 0).unwrap();
        let pv_pg = layout.flow_on(Arc::new(NodeId::Pv, NodeId::Pg), 0).unwrap();
        let pv_de = layout.flow_on(Arc::new(NodeId::Pv, NodeId::De), 0).unwrap();
        assert_eq!(inst.variables[pg_hp].cost, 0.3);
        assert_eq!(inst.variables[pv_pg].cost, -0.1);
        assert_eq!(inst.variables[pv_de].cost, 0.0);
    }

    #[test]
    fn soft_end_adds_penalized_slacks() {
        let net = EnergyNetwork::reference();
        let mut win = window(SeriesBundle::zeros(2), &net);
        win.boundary.heat.end = EndPolicy::FixedAt(2000.0);
        win.boundary.soft_end_penalty = Some(5.0);
        let inst = build_milp(&net, &win).unwrap();
        let (a, b) = inst.layout.as_ref().unwrap().end_slacks[&NodeId::Sh];
        assert_eq!(inst.variables[a].cost, 5.0);
        assert_eq!(inst.variables[b].cost, 5.0);
        assert_eq!(inst.n_vars(), 2 * 18 + 2);
    }

    #[test]
    fn polish_adds_cut_and_replaces_objective() {
        let net = EnergyNetwork::reference();
        let mut s = SeriesBundle::zeros(2);
        s.c_buy = vec![0.3, 0.3];
        let inst = build_milp(&net, &window(s, &net)).unwrap();
        let p = polish_instance(&inst, 1.5, 1e-9, NodeId::Sh);
        assert_eq!(p.n_rows(), inst.n_rows() + 1);
        let cut = p.constraints.last().unwrap();
        assert_eq!(cut.tag, RowTag::ObjectiveCut);
        assert_eq!(cut.coeffs.len(), 6);
        assert_eq!(p.variables.iter().filter(|v| v.cost == -1.0).count(), 2);
    }
}
