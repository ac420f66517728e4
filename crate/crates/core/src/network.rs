//! Domain types for the building energy system: the nine-node network,
//! storage and heat-pump parameters, the time grid and exogenous series.
//!
//! Units are fixed across the crate: kW for power, kWh for energy, hours
//! for time and €/kWh for prices. The step length `dt_hours` carries the
//! power-to-energy conversion.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::ModelError;

/// Components of the system. The set is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeId {
    /// Electric demand.
    De,
    /// Solar photovoltaics.
    Pv,
    /// Power grid.
    Pg,
    /// Electricity storage (battery).
    Se,
    /// Heat pump.
    Hp,
    /// Seasonal heat storage.
    Sh,
    /// Air-conditioning heat byproduct.
    Ac,
    /// Solar thermal collectors.
    St,
    /// Heat demand.
    Dh,
}

impl NodeId {
    pub const ALL: [NodeId; 9] = [
        NodeId::De,
        NodeId::Pv,
        NodeId::Pg,
        NodeId::Se,
        NodeId::Hp,
        NodeId::Sh,
        NodeId::Ac,
        NodeId::St,
        NodeId::Dh,
    ];

    pub const STORAGES: [NodeId; 2] = [NodeId::Se, NodeId::Sh];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeId::De => "DE",
            NodeId::Pv => "PV",
            NodeId::Pg => "PG",
            NodeId::Se => "SE",
            NodeId::Hp => "HP",
            NodeId::Sh => "SH",
            NodeId::Ac => "AC",
            NodeId::St => "ST",
            NodeId::Dh => "DH",
        }
    }

    pub fn parse(s: &str) -> Option<NodeId> {
        NodeId::ALL
            .into_iter()
            .find(|n| n.as_str().eq_ignore_ascii_case(s.trim()))
    }

    fn is_sink(self) -> bool {
        matches!(self, NodeId::De | NodeId::Dh)
    }

    fn is_source(self) -> bool {
        matches!(self, NodeId::Pv | NodeId::St | NodeId::Ac)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A directed admissible flow between two nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Arc {
    pub from: NodeId,
    pub to: NodeId,
}

impl Arc {
    pub const fn new(from: NodeId, to: NodeId) -> Self {
        Arc { from, to }
    }
}

impl fmt::Display for Arc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.from, self.to)
    }
}

/// The sixteen arcs of the building system, in the canonical order used
/// for variable layout.
pub const CANONICAL_ARCS: [Arc; 16] = {
    use NodeId::*;
    [
        Arc::new(Pv, De),
        Arc::new(Pv, Se),
        Arc::new(Pv, Hp),
        Arc::new(Pv, Pg),
        Arc::new(Pg, De),
        Arc::new(Pg, Se),
        Arc::new(Pg, Hp),
        Arc::new(Se, De),
        Arc::new(Se, Hp),
        Arc::new(Se, Pg),
        Arc::new(St, Dh),
        Arc::new(St, Sh),
        Arc::new(Ac, Sh),
        Arc::new(Hp, Dh),
        Arc::new(Hp, Sh),
        Arc::new(Sh, Dh),
    ]
};

/// Parameters of one storage device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageParams {
    pub eta_ch: f64,
    pub eta_dis: f64,
    /// Fraction of stored energy retained over one hour.
    pub retention: f64,
    pub e_min: f64,
    pub e_max: f64,
    pub p_ch_max: f64,
    pub p_dis_max: f64,
    pub e_init: f64,
    pub e_end: Option<f64>,
}

impl StorageParams {
    /// Converts a self-discharge rate given in percent per hour into the
    /// hourly retention fraction.
    pub fn retention_from_pct_per_hour(pct: f64) -> f64 {
        1.0 - pct / 100.0
    }

    /// Retention over a step of `dt_hours`.
    pub fn step_retention(&self, dt_hours: f64) -> f64 {
        if dt_hours == 1.0 {
            self.retention
        } else {
            self.retention.powf(dt_hours)
        }
    }

    pub fn capacity_range(&self) -> f64 {
        self.e_max - self.e_min
    }

    /// The battery of the reference building: 49 kWh, 16 kW charge,
    /// 10 kW discharge, 97 % efficiencies, 0.01 %/h self-discharge,
    /// empty at both ends of the year.
    pub fn reference_battery() -> Self {
        StorageParams {
            eta_ch: 0.97,
            eta_dis: 0.97,
            retention: Self::retention_from_pct_per_hour(0.01),
            e_min: 0.0,
            e_max: 49.0,
            p_ch_max: 16.0,
            p_dis_max: 10.0,
            e_init: 0.0,
            e_end: Some(0.0),
        }
    }

    /// The seasonal heat store of the reference building: 4640 kWh,
    /// 10.2 kW charge, 9.18 kW discharge, 78 % efficiencies,
    /// 0.007 %/h self-discharge, 3000 kWh at both ends of the year.
    pub fn reference_heat_storage() -> Self {
        StorageParams {
            eta_ch: 0.78,
            eta_dis: 0.78,
            retention: Self::retention_from_pct_per_hour(0.007),
            e_min: 0.0,
            e_max: 4640.0,
            p_ch_max: 10.2,
            p_dis_max: 9.18,
            e_init: 3000.0,
            e_end: Some(3000.0),
        }
    }

    /// A storage with no capacity at all.
    pub fn empty() -> Self {
        StorageParams {
            eta_ch: 1.0,
            eta_dis: 1.0,
            retention: 1.0,
            e_min: 0.0,
            e_max: 0.0,
            p_ch_max: 0.0,
            p_dis_max: 0.0,
            e_init: 0.0,
            e_end: Some(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatPumpParams {
    pub cop: f64,
    /// Heat production capacity (kW).
    pub p_heat_max: f64,
}

impl HeatPumpParams {
    pub fn reference() -> Self {
        HeatPumpParams {
            cop: 4.0,
            p_heat_max: 15.0,
        }
    }
}

/// Topology plus device parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyNetwork {
    pub arcs: Vec<Arc>,
    pub storage: BTreeMap<NodeId, StorageParams>,
    pub heat_pump: HeatPumpParams,
}

impl EnergyNetwork {
    /// The canonical topology with the given devices.
    pub fn new(battery: StorageParams, heat_storage: StorageParams, heat_pump: HeatPumpParams) -> Self {
        let mut storage = BTreeMap::new();
        storage.insert(NodeId::Se, battery);
        storage.insert(NodeId::Sh, heat_storage);
        EnergyNetwork {
            arcs: CANONICAL_ARCS.to_vec(),
            storage,
            heat_pump,
        }
    }

    /// The reference building.
    pub fn reference() -> Self {
        Self::new(
            StorageParams::reference_battery(),
            StorageParams::reference_heat_storage(),
            HeatPumpParams::reference(),
        )
    }

    /// Parameters of a storage node. Panics for non-storage nodes or a
    /// network that failed validation.
    pub fn storage(&self, node: NodeId) -> &StorageParams {
        self.storage
            .get(&node)
            .unwrap_or_else(|| panic!("no storage parameters for {node}"))
    }

    pub fn storage_mut(&mut self, node: NodeId) -> &mut StorageParams {
        self.storage
            .get_mut(&node)
            .unwrap_or_else(|| panic!("no storage parameters for {node}"))
    }

    /// Nodes with a flow into `node`.
    pub fn inflow_nodes(&self, node: NodeId) -> Vec<NodeId> {
        self.arcs.iter().filter(|a| a.to == node).map(|a| a.from).collect()
    }

    /// Nodes `node` can send flow to.
    pub fn outflow_nodes(&self, node: NodeId) -> Vec<NodeId> {
        self.arcs.iter().filter(|a| a.from == node).map(|a| a.to).collect()
    }
}

/// One broken rule found by [`validate_network`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Node, arc or parameter the rule applies to, e.g. `DH->PG` or `SH.e_init`.
    pub subject: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.rule)
    }
}

fn violation(subject: impl Into<String>, rule: impl Into<String>) -> Violation {
    Violation {
        subject: subject.into(),
        rule: rule.into(),
    }
}

/// Checks topology and parameters. Returns every violation found; an empty
/// list means the network is usable.
pub fn validate_network(net: &EnergyNetwork) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen = Vec::with_capacity(net.arcs.len());
    for arc in &net.arcs {
        if seen.contains(arc) {
            out.push(violation(arc.to_string(), "duplicate arc"));
            continue;
        }
        seen.push(*arc);
        if CANONICAL_ARCS.contains(arc) {
            continue;
        }
        let rule = if arc.from.is_sink() {
            format!("demand node {} has no outgoing arcs", arc.from)
        } else if arc.to.is_source() {
            format!("source node {} has no incoming arcs", arc.to)
        } else {
            "arc is not part of the system topology".to_string()
        };
        out.push(violation(arc.to_string(), rule));
    }
    for arc in CANONICAL_ARCS {
        if !net.arcs.contains(&arc) {
            out.push(violation(arc.to_string(), "required arc is missing"));
        }
    }

    for node in NodeId::STORAGES {
        match net.storage.get(&node) {
            Some(sp) => validate_storage(node, sp, &mut out),
            None => out.push(violation(node.as_str(), "storage parameters missing")),
        }
    }
    for node in net.storage.keys() {
        if !NodeId::STORAGES.contains(node) {
            out.push(violation(node.as_str(), "node is not a storage"));
        }
    }

    let hp = &net.heat_pump;
    if !(hp.cop > 0.0 && hp.cop.is_finite()) {
        out.push(violation("HP.cop", "coefficient of performance must be positive"));
    }
    if !(hp.p_heat_max >= 0.0 && hp.p_heat_max.is_finite()) {
        out.push(violation("HP.p_heat_max", "capacity must be finite and nonnegative"));
    }
    out
}

fn validate_storage(node: NodeId, sp: &StorageParams, out: &mut Vec<Violation>) {
    let field = |name: &str| format!("{node}.{name}");
    for (name, v) in [("eta_ch", sp.eta_ch), ("eta_dis", sp.eta_dis), ("retention", sp.retention)] {
        if !(v > 0.0 && v <= 1.0) {
            out.push(violation(field(name), "must lie in (0, 1]"));
        }
    }
    let finite = [
        ("e_min", sp.e_min),
        ("e_max", sp.e_max),
        ("e_init", sp.e_init),
        ("p_ch_max", sp.p_ch_max),
        ("p_dis_max", sp.p_dis_max),
    ];
    let mut all_finite = true;
    for (name, v) in finite {
        if !v.is_finite() {
            out.push(violation(field(name), "must be finite"));
            all_finite = false;
        }
    }
    if !all_finite {
        return;
    }
    if sp.e_min < 0.0 {
        out.push(violation(field("e_min"), "must be nonnegative"));
    }
    if sp.e_max < sp.e_min {
        out.push(violation(field("e_max"), "must be at least e_min"));
    }
    if sp.e_init < sp.e_min || sp.e_init > sp.e_max {
        out.push(violation(field("e_init"), "must lie in [e_min, e_max]"));
    }
    if let Some(end) = sp.e_end {
        if !(end >= sp.e_min && end <= sp.e_max) {
            out.push(violation(field("e_end"), "must lie in [e_min, e_max]"));
        }
    }
    if sp.p_ch_max < 0.0 {
        out.push(violation(field("p_ch_max"), "must be nonnegative"));
    }
    if sp.p_dis_max < 0.0 {
        out.push(violation(field("p_dis_max"), "must be nonnegative"));
    }
}

/// Time to fully charge and fully discharge a storage at rated power,
/// ignoring self-discharge. Returns `(charge_hours, discharge_hours)`.
pub fn storage_durations(sp: &StorageParams) -> Result<(f64, f64), ModelError> {
    if !(sp.p_ch_max > 0.0) {
        return Err(ModelError::UndefinedDuration("charge power bound is zero"));
    }
    if !(sp.p_dis_max > 0.0) {
        return Err(ModelError::UndefinedDuration("discharge power bound is zero"));
    }
    let range = sp.capacity_range();
    let charge = range / (sp.eta_ch * sp.p_ch_max);
    let discharge = range / (sp.p_dis_max / sp.eta_dis);
    Ok((charge, discharge))
}

/// Charge and discharge durations when self-discharge is taken into account.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakyHorizon {
    pub charge_hours: f64,
    pub discharge_hours: f64,
}

impl LeakyHorizon {
    pub fn total_hours(&self) -> f64 {
        self.charge_hours + self.discharge_hours
    }

    pub fn total_days(&self) -> f64 {
        self.total_hours() / 24.0
    }

    /// Whole hourly steps needed for each leg.
    pub fn whole_steps(&self) -> (u64, u64) {
        let up = |h: f64| (h - 1e-9).ceil().max(0.0) as u64;
        (up(self.charge_hours), up(self.discharge_hours))
    }
}

/// Fill and drain times under hourly retention `rho`. Moving energy at a
/// constant effective rate `a` for `t` hours while the content leaks gives
/// `a (1 - rho^t) / (1 - rho)`; the duration of each leg is the `t` at
/// which that reaches the usable capacity. With `rho == 1` this is
/// [`storage_durations`].
pub fn leaky_fill_horizon(sp: &StorageParams) -> Result<LeakyHorizon, ModelError> {
    let (charge, discharge) = storage_durations(sp)?;
    if sp.retention >= 1.0 {
        return Ok(LeakyHorizon {
            charge_hours: charge,
            discharge_hours: discharge,
        });
    }
    if !(sp.retention > 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "retention {} outside (0, 1]",
            sp.retention
        )));
    }
    let range = sp.capacity_range();
    let leak = 1.0 - sp.retention;
    let ln_rho = (sp.retention - 1.0).ln_1p();
    let leg = |rate: f64| -> Result<f64, ModelError> {
        // rate (1 - rho^t) / leak >= range  <=>  rho^t <= 1 - range * leak / rate
        let frac = range * leak / rate;
        if frac >= 1.0 {
            return Err(ModelError::UnreachableCapacity {
                steady_state: rate / leak,
                required: range,
            });
        }
        Ok((-frac).ln_1p() / ln_rho)
    };
    Ok(LeakyHorizon {
        charge_hours: leg(sp.eta_ch * sp.p_ch_max)?,
        discharge_hours: leg(sp.p_dis_max / sp.eta_dis)?,
    })
}

/// Length and resolution of a schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub n_steps: usize,
    pub dt_hours: f64,
    pub control_steps: usize,
}

impl TimeGrid {
    pub fn new(n_steps: usize, dt_hours: f64, control_steps: usize) -> Result<Self, ModelError> {
        if control_steps < 1 || n_steps < control_steps {
            return Err(ModelError::InvalidParameter(format!(
                "time grid needs n_steps >= control_steps >= 1 (got {n_steps}, {control_steps})"
            )));
        }
        if !(dt_hours > 0.0 && dt_hours.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "step length must be positive (got {dt_hours})"
            )));
        }
        Ok(TimeGrid {
            n_steps,
            dt_hours,
            control_steps,
        })
    }

    /// Steps in one day at this resolution.
    pub fn steps_per_day(&self) -> usize {
        (24.0 / self.dt_hours).round() as usize
    }
}

/// Exogenous per-step series for the whole study period.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeriesBundle {
    /// Electric demand (kW).
    pub d_de: Vec<f64>,
    /// Heat demand (kW).
    pub d_dh: Vec<f64>,
    /// PV production (kW).
    pub p_pv: Vec<f64>,
    /// Solar thermal production (kW).
    pub p_st: Vec<f64>,
    /// Recoverable AC heat (kW).
    pub p_ac: Vec<f64>,
    /// Price paid for grid imports (€/kWh).
    pub c_buy: Vec<f64>,
    /// Price received for grid exports (€/kWh).
    pub c_sell: Vec<f64>,
}

impl SeriesBundle {
    /// All series set to zero.
    pub fn zeros(n: usize) -> Self {
        SeriesBundle {
            d_de: vec![0.0; n],
            d_dh: vec![0.0; n],
            p_pv: vec![0.0; n],
            p_st: vec![0.0; n],
            p_ac: vec![0.0; n],
            c_buy: vec![0.0; n],
            c_sell: vec![0.0; n],
        }
    }

    fn columns(&self) -> [(&'static str, &Vec<f64>); 7] {
        [
            ("d_de", &self.d_de),
            ("d_dh", &self.d_dh),
            ("p_pv", &self.p_pv),
            ("p_st", &self.p_st),
            ("p_ac", &self.p_ac),
            ("c_buy", &self.c_buy),
            ("c_sell", &self.c_sell),
        ]
    }

    /// Length of the shortest series.
    pub fn len(&self) -> usize {
        self.columns().iter().map(|(_, v)| v.len()).min().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks lengths and signs. Prices may be negative; everything else may not.
    pub fn validate(&self, required_len: usize) -> Result<(), ModelError> {
        for (name, series) in self.columns() {
            if series.len() < required_len {
                return Err(ModelError::SeriesTooShort {
                    series: name,
                    len: series.len(),
                    required: required_len,
                });
            }
            let nonneg = !name.starts_with("c_");
            if let Some(step) = series.iter().position(|v| !v.is_finite() || (nonneg && *v < 0.0)) {
                return Err(ModelError::InvalidSeriesValue {
                    series: name,
                    step,
                    value: series[step],
                });
            }
        }
        Ok(())
    }

    /// Copy of steps `start..start + len`.
    pub fn slice(&self, start: usize, len: usize) -> Result<SeriesBundle, ModelError> {
        let end = start + len;
        for (name, series) in self.columns() {
            if series.len() < end {
                return Err(ModelError::SeriesTooShort {
                    series: name,
                    len: series.len(),
                    required: end,
                });
            }
        }
        let cut = |v: &Vec<f64>| v[start..end].to_vec();
        Ok(SeriesBundle {
            d_de: cut(&self.d_de),
            d_dh: cut(&self.d_dh),
            p_pv: cut(&self.p_pv),
            p_st: cut(&self.p_st),
            p_ac: cut(&self.p_ac),
            c_buy: cut(&self.c_buy),
            c_sell: cut(&self.c_sell),
        })
    }

    /// SHA-256 over the bit patterns of every value, series by series.
    pub fn checksum(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for (name, series) in self.columns() {
            hasher.update(name.as_bytes());
            hasher.update((series.len() as u64).to_le_bytes());
            for v in series {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
