use std::collections::BTreeMap;
use std::fmt;

use crate::network::{Arc, NodeId};

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub binary: bool,
    /// Objective coefficient (€ per unit).
    pub cost: f64,
}

impl Variable {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> Self {
        Variable {
            name: name.into(),
            lower,
            upper,
            binary: false,
            cost,
        }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Variable {
            name: name.into(),
            lower: 0.0,
            upper: 1.0,
            binary: true,
            cost: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Eq,
    Le,
    Ge,
}

impl Sense {
    pub fn as_str(self) -> &'static str {
        match self {
            Sense::Eq => "=",
            Sense::Le => "<=",
            Sense::Ge => ">=",
        }
    }
}

/// What a constraint row encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RowTag {
    Demand(NodeId),
    PvBalance,
    SolarThermalLimit,
    AirConditioningLimit,
    StateOfEnergy(NodeId),
    ChargeBound(NodeId),
    DischargeBound(NodeId),
    HeatPumpRatio,
    HeatPumpCap,
    EndLevel(NodeId),
    ObjectiveCut,
    /// Row read from an LP file without structural meaning.
    Imported,
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowTag::Demand(n) => write!(f, "demand-{n}"),
            RowTag::PvBalance => f.write_str("pv-balance"),
            RowTag::SolarThermalLimit => f.write_str("st-limit"),
            RowTag::AirConditioningLimit => f.write_str("ac-limit"),
            RowTag::StateOfEnergy(n) => write!(f, "soe-{n}"),
            RowTag::ChargeBound(n) => write!(f, "charge-{n}"),
            RowTag::DischargeBound(n) => write!(f, "discharge-{n}"),
            RowTag::HeatPumpRatio => f.write_str("hp-ratio"),
            RowTag::HeatPumpCap => f.write_str("hp-cap"),
            RowTag::EndLevel(n) => write!(f, "end-level-{n}"),
            RowTag::ObjectiveCut => f.write_str("objective-cut"),
            RowTag::Imported => f.write_str("imported"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub tag: RowTag,
    /// Sparse row: (variable index, coefficient), variable indices ascending.
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Eq => (lhs - self.rhs).abs(),
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
        }
    }

    /// Scale used to make violations relative: the largest of 1, |rhs|
    /// and the magnitudes of the terms at `x`.
    pub fn scale(&self, x: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .map(|&(j, a)| (a * x[j]).abs())
            .fold(self.rhs.abs().max(1.0), f64::max)
    }
}

/// Where the variables of a window model live.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowLayout {
    pub start_step: usize,
    pub steps: usize,
    pub dt_hours: f64,
    pub arcs: Vec<Arc>,
    binaries: BTreeMap<(NodeId, usize), usize>,
    /// Soft end-level slack pairs (shortfall, excess) per storage.
    pub end_slacks: BTreeMap<NodeId, (usize, usize)>,
}

impl WindowLayout {
    pub(crate) fn new(start_step: usize, steps: usize, dt_hours: f64, arcs: Vec<Arc>) -> Self {
        WindowLayout {
            start_step,
            steps,
            dt_hours,
            arcs,
            binaries: BTreeMap::new(),
            end_slacks: BTreeMap::new(),
        }
    }

    fn stride(&self) -> usize {
        self.arcs.len() + 2
    }

    pub fn arc_index(&self, arc: Arc) -> Option<usize> {
        self.arcs.iter().position(|a| *a == arc)
    }

    /// Variable index of the flow on arc number `arc` at local step `t`.
    pub fn flow(&self, arc: usize, t: usize) -> usize {
        debug_assert!(arc < self.arcs.len() && t < self.steps);
        t * self.stride() + arc
    }

    pub fn flow_on(&self, arc: Arc, t: usize) -> Option<usize> {
        self.arc_index(arc).map(|k| self.flow(k, t))
    }

    /// Variable index of the state of energy of `node` after local step `t`.
    pub fn state(&self, node: NodeId, t: usize) -> usize {
        debug_assert!(t < self.steps);
        let off = match node {
            NodeId::Se => 0,
            NodeId::Sh => 1,
            other => panic!("{other} is not a storage"),
        };
        t * self.stride() + self.arcs.len() + off
    }

    pub fn binary(&self, node: NodeId, t: usize) -> Option<usize> {
        self.binaries.get(&(node, t)).copied()
    }

    pub(crate) fn set_binary(&mut self, node: NodeId, t: usize, var: usize) {
        self.binaries.insert((node, t), var);
    }

    pub fn binaries(&self) -> impl Iterator<Item = ((NodeId, usize), usize)> + '_ {
        self.binaries.iter().map(|(k, v)| (*k, *v))
    }

    pub fn n_core_vars(&self) -> usize {
        self.steps * self.stride()
    }
}

/// A sparse mixed-binary linear program, minimization form.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MilpInstance {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Present when built from a window; absent for imported models.
    pub layout: Option<WindowLayout>,
}

impl MilpInstance {
    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn n_rows(&self) -> usize {
        self.constraints.len()
    }

    pub fn n_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.binary).count()
    }

    pub fn binary_indices(&self) -> Vec<usize> {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.binary)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.variables.iter().zip(x).map(|(v, xi)| v.cost * xi).sum()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Copy with binaries dropped to continuous variables on their bounds.
    pub fn relaxed(&self) -> MilpInstance {
        let mut out = self.clone();
        for v in &mut out.variables {
            v.binary = false;
        }
        out
    }

    pub fn tally_tags(&self) -> BTreeMap<RowTag, usize> {
        let mut out = BTreeMap::new();
        for c in &self.constraints {
            *out.entry(c.tag).or_insert(0) += 1;
        }
        out
    }

    pub fn rows_tagged(&self, tag: RowTag) -> usize {
        self.constraints.iter().filter(|c| c.tag == tag).count()
    }
}
