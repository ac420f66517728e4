//! Helpers shared by the integration tests. Everything here recomputes
//! model quantities from first principles instead of calling the library.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seasonal_dispatch::data::{generate_synthetic, SyntheticSpec};
use seasonal_dispatch::formulation::{
    build_milp, BoundaryConditions, EndPolicy, MilpInstance, StorageBoundary, WindowFlows, WindowSpec,
};
use seasonal_dispatch::horizon::StoreLevels;
use seasonal_dispatch::network::{Arc, EnergyNetwork, HeatPumpParams, NodeId, SeriesBundle, StorageParams};
use seasonal_dispatch::solver::{solve_lp, solve_polished, SolveResult, SolveStatus, SolverConfig};

/// Grid cost of a dispatch: purchases on arcs leaving PG, revenue on arcs
/// entering PG.
pub fn oracle_cost(arcs: &[Arc], flows: &[Vec<f64>], series: &SeriesBundle, dt: f64) -> f64 {
    let mut total = 0.0;
    for (t, row) in flows.iter().enumerate() {
        for (a, &p) in arcs.iter().zip(row) {
            if a.from == NodeId::Pg {
                total += dt * series.c_buy[t] * p;
            }
            if a.to == NodeId::Pg {
                total -= dt * series.c_sell[t] * p;
            }
        }
    }
    total
}

/// Small storages so that windows of a few hours are strongly coupled.
pub fn small_network() -> EnergyNetwork {
    let battery = StorageParams {
        eta_ch: 0.95,
        eta_dis: 0.93,
        retention: 0.9999,
        e_min: 0.0,
        e_max: 10.0,
        p_ch_max: 4.0,
        p_dis_max: 3.0,
        e_init: 2.0,
        e_end: None,
    };
    let heat = StorageParams {
        eta_ch: 0.85,
        eta_dis: 0.8,
        retention: 0.999,
        e_min: 5.0,
        e_max: 60.0,
        p_ch_max: 10.0,
        p_dis_max: 8.0,
        e_init: 20.0,
        e_end: None,
    };
    EnergyNetwork::new(battery, heat, HeatPumpParams { cop: 3.5, p_heat_max: 12.0 })
}

/// Random hourly series. `negative` steps get a negative sell price (and
/// sometimes a negative buy price); all other prices are positive.
pub fn random_series(rng: &mut ChaCha8Rng, n: usize, negative: usize) -> SeriesBundle {
    let mut s = SeriesBundle::zeros(n);
    for t in 0..n {
        s.d_de[t] = rng.gen_range(0.0..5.0);
        s.d_dh[t] = rng.gen_range(0.0..8.0);
        s.p_pv[t] = if rng.gen_bool(0.6) { rng.gen_range(0.0..10.0) } else { 0.0 };
        s.p_st[t] = if rng.gen_bool(0.5) { rng.gen_range(0.0..4.0) } else { 0.0 };
        s.p_ac[t] = if rng.gen_bool(0.3) { rng.gen_range(0.0..2.0) } else { 0.0 };
        s.c_sell[t] = rng.gen_range(0.01..0.2);
        s.c_buy[t] = s.c_sell[t] + rng.gen_range(0.05..0.25);
    }
    let mut steps: Vec<usize> = (0..n).collect();
    for k in 0..negative.min(n) {
        let j = rng.gen_range(k..n);
        steps.swap(k, j);
        let t = steps[k];
        s.c_sell[t] = -rng.gen_range(0.01..0.1);
        if rng.gen_bool(0.5) {
            s.c_buy[t] = -rng.gen_range(0.0..0.05);
        } else {
            s.c_buy[t] = rng.gen_range(0.0..0.1);
        }
    }
    s
}

pub fn window(series: SeriesBundle, battery: StorageBoundary, heat: StorageBoundary) -> WindowSpec {
    WindowSpec {
        start_step: 0,
        dt_hours: 1.0,
        series,
        boundary: BoundaryConditions::new(battery, heat),
    }
}

pub fn free(init: f64) -> StorageBoundary {
    StorageBoundary { init, end: EndPolicy::Free }
}

/// A random small window with `negative` negative-price steps.
pub fn random_window(seed: u64, steps: usize, negative: usize) -> (EnergyNetwork, WindowSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = small_network();
    let series = random_series(&mut rng, steps, negative);
    let se_init = rng.gen_range(0.0..10.0);
    let sh_init = rng.gen_range(5.0..60.0);
    let sh_end = if rng.gen_bool(0.5) {
        EndPolicy::Free
    } else {
        EndPolicy::FixedAt(rng.gen_range(5.0..60.0))
    };
    let win = window(
        series,
        free(se_init),
        StorageBoundary {
            init: sh_init,
            end: sh_end,
        },
    );
    (net, win)
}

/// Minimum over all 0/1 assignments of the binaries, each solved as an LP.
/// `None` when every assignment is infeasible. Also returns every optimal
/// LP result for verification.
pub fn enumerate_binaries(inst: &MilpInstance, cfg: &SolverConfig) -> (Option<f64>, Vec<(MilpInstance, SolveResult)>) {
    let bins = inst.binary_indices();
    assert!(bins.len() <= 16, "enumeration over {} binaries", bins.len());
    let mut best: Option<f64> = None;
    let mut solved = Vec::new();
    for mask in 0u32..(1 << bins.len()) {
        let mut fixed = inst.relaxed();
        for (k, &j) in bins.iter().enumerate() {
            let v = f64::from((mask >> k) & 1);
            fixed.variables[j].lower = v;
            fixed.variables[j].upper = v;
        }
        let r = solve_lp(&fixed, cfg).expect("LP solve");
        match r.status {
            SolveStatus::Optimal => {
                best = Some(best.map_or(r.objective, |b: f64| b.min(r.objective)));
                solved.push((fixed, r));
            }
            SolveStatus::Infeasible => {}
            other => panic!("enumeration LP ended with {other:?}"),
        }
    }
    (best, solved)
}

/// Serves every demand from the grid through the heat pump, leaves
/// storages idle and exports all PV. Requires `d_dh <= p_heat_max`.
pub fn grid_only_dispatch(net: &EnergyNetwork, win: &WindowSpec) -> Vec<f64> {
    let inst = build_milp(net, win).unwrap();
    let layout = inst.layout.as_ref().unwrap();
    let mut x = vec![0.0; inst.n_vars()];
    let s = &win.series;
    let cop = net.heat_pump.cop;
    let mut se = win.boundary.battery.init;
    let mut sh = win.boundary.heat.init;
    for t in 0..win.len() {
        let set = |x: &mut Vec<f64>, a: Arc, v: f64| x[layout.flow_on(a, t).unwrap()] = v;
        set(&mut x, Arc::new(NodeId::Pg, NodeId::De), s.d_de[t]);
        set(&mut x, Arc::new(NodeId::Hp, NodeId::Dh), s.d_dh[t]);
        set(&mut x, Arc::new(NodeId::Pg, NodeId::Hp), s.d_dh[t] / cop);
        set(&mut x, Arc::new(NodeId::Pv, NodeId::Pg), s.p_pv[t]);
        se *= net.storage(NodeId::Se).step_retention(win.dt_hours);
        sh *= net.storage(NodeId::Sh).step_retention(win.dt_hours);
        x[layout.state(NodeId::Se, t)] = se;
        x[layout.state(NodeId::Sh, t)] = sh;
    }
    // Binaries: any value is consistent with idle storages.
    for (_, j) in layout.binaries() {
        x[j] = 1.0;
    }
    x
}

/// Charge and discharge flows of a storage at step `t` of a solution.
pub fn charge_discharge(inst: &MilpInstance, x: &[f64], node: NodeId, t: usize) -> (f64, f64) {
    let layout = inst.layout.as_ref().unwrap();
    let mut ch = 0.0;
    let mut dis = 0.0;
    for (k, a) in layout.arcs.iter().enumerate() {
        let v = x[layout.flow(k, t)];
        if a.to == node {
            ch += v;
        }
        if a.from == node {
            dis += v;
        }
    }
    (ch, dis)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Ten days, small storages, a price spike on day 8.
pub fn spike_case(seed: u64) -> (EnergyNetwork, SeriesBundle) {
    let mut net = small_network();
    net.storage_mut(NodeId::Sh).e_max = 150.0;
    let mut series = generate_synthetic(&SyntheticSpec::stub(10, 20, seed));
    for t in 7 * 24..8 * 24 {
        series.c_buy[t] += 1.5;
        series.c_sell[t] += 1.0;
    }
    (net, series)
}

/// Direct definition: for growing `T`, solve the window forced empty and
/// forced full at its end (canonical optimum) and compare both storage
/// levels at the end of the first day.
/// `seen` receives every optimal solve for verification.
pub fn oracle_min_horizon(
    net: &EnergyNetwork,
    series: &SeriesBundle,
    day: usize,
    init: StoreLevels,
    max_days: usize,
    seen: &mut dyn FnMut(&MilpInstance, &SolveResult),
) -> usize {
    let cfg = SolverConfig::default();
    let available = series.len() / 24 - day;
    for days in 1..=max_days.min(available) {
        let mut levels = |pick: fn(&StorageParams) -> f64| {
            let se = net.storage(NodeId::Se);
            let sh = net.storage(NodeId::Sh);
            let win = WindowSpec {
                start_step: day * 24,
                dt_hours: 1.0,
                series: series.slice(day * 24, days * 24).unwrap(),
                boundary: BoundaryConditions::new(
                    StorageBoundary {
                        init: init.se,
                        end: EndPolicy::FixedAt(pick(se)),
                    },
                    StorageBoundary {
                        init: init.sh,
                        end: EndPolicy::FixedAt(pick(sh)),
                    },
                ),
            };
            let inst = build_milp(net, &win).unwrap();
            let r = solve_polished(&inst, &cfg).unwrap();
            if r.status != SolveStatus::Optimal {
                return None;
            }
            seen(&inst, &r);
            let wf = WindowFlows::extract(inst.layout.as_ref().unwrap(), &r.x);
            Some((wf.se[23], wf.sh[23]))
        };
        let (Some(lo), Some(hi)) = (levels(|s| s.e_min), levels(|s| s.e_max)) else {
            continue;
        };
        let tol_se = 1e-6 * net.storage(NodeId::Se).e_max;
        let tol_sh = 1e-6 * net.storage(NodeId::Sh).e_max;
        if (lo.0 - hi.0).abs() <= tol_se && (lo.1 - hi.1).abs() <= tol_sh {
            return days;
        }
    }
    max_days + 1
}
