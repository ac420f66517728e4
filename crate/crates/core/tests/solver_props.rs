mod common;

use std::path::PathBuf;

use common::*;
use proptest::prelude::*;

use seasonal_dispatch::formulation::lp_file::{parse_lp, write_lp};
use seasonal_dispatch::formulation::{build_milp, RowTag, StorageBoundary, EndPolicy};
use seasonal_dispatch::network::{Arc, EnergyNetwork, HeatPumpParams, NodeId, SeriesBundle, StorageParams};
use seasonal_dispatch::solver::external::ExternalSolver;
use seasonal_dispatch::solver::{
    dual_certificate, solve_lp, solve_milp, verify_solution, ItemKind, SolveStatus, SolverConfig,
};

fn empty_storage() -> StorageParams {
    StorageParams {
        eta_ch: 1.0,
        eta_dis: 1.0,
        retention: 1.0,
        e_min: 0.0,
        e_max: 0.0,
        p_ch_max: 0.0,
        p_dis_max: 0.0,
        e_init: 0.0,
        e_end: None,
    }
}

/// No storage and no renewables: heat can only come from the heat pump.
fn heat_pump_only(cap: f64) -> EnergyNetwork {
    EnergyNetwork::new(empty_storage(), empty_storage(), HeatPumpParams { cop: 4.0, p_heat_max: cap })
}

fn heat_series(d_dh: &[f64], price: f64) -> SeriesBundle {
    let mut s = SeriesBundle::zeros(d_dh.len());
    s.d_dh = d_dh.to_vec();
    s.c_buy = vec![price; d_dh.len()];
    s.c_sell = vec![0.05; d_dh.len()];
    s
}

#[test]
fn heat_pump_toy_matches_grid_search() {
    let net = heat_pump_only(15.0);
    let win = window(heat_series(&[15.0, 15.0], 0.25), free(0.0), free(0.0));
    let inst = build_milp(&net, &win).unwrap();
    let r = solve_lp(&inst, &SolverConfig::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);

    // Grid search over the heat-pump intake at 0.01 kW per step; the only
    // feasible point per step delivers exactly the demand.
    let mut oracle = 0.0;
    for &d in &win.series.d_dh {
        let best = (0..=1500)
            .map(|k| k as f64 * 0.01)
            .filter(|p| (4.0 * p - d).abs() < 1e-9 && 4.0 * p <= 15.0 + 1e-9)
            .map(|p| p * 0.25)
            .fold(f64::INFINITY, f64::min);
        oracle += best;
    }
    assert!((oracle - 1.875).abs() < 1e-12);
    assert!((r.objective - oracle).abs() < 1e-9, "{}", r.objective);
    assert!(verify_solution(&inst, &r).max_violation <= 1e-9);
}

#[test]
fn heat_demand_above_pump_cap_is_infeasible() {
    let net = heat_pump_only(15.0);
    let win = window(heat_series(&[20.0], 0.25), free(0.0), free(0.0));
    let r = solve_lp(&build_milp(&net, &win).unwrap(), &SolverConfig::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Infeasible);
    assert!(!r.has_solution());
}

#[test]
fn all_zero_series_costs_nothing() {
    let net = EnergyNetwork::reference();
    let mut win = window(SeriesBundle::zeros(24), free(0.0), free(3000.0));
    win.boundary = seasonal_dispatch::formulation::BoundaryConditions::from_network(&net);
    win.boundary.battery.end = EndPolicy::Free;
    win.boundary.heat.end = EndPolicy::Free;
    let inst = build_milp(&net, &win).unwrap();
    let r = solve_milp(&inst, &SolverConfig::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!(r.objective.abs() < 1e-12);
    let one = window(SeriesBundle::zeros(1), free(0.0), free(3000.0));
    let r = solve_lp(&build_milp(&net, &one).unwrap(), &SolverConfig::default()).unwrap();
    assert!(r.objective.abs() < 1e-12);
}

#[test]
fn ac_heat_is_stored_while_discharging() {
    // One hour: heat demand only the store can serve cheaply, and AC heat
    // that can only go into the store. Taking the AC heat while
    // discharging beats leaving it unused.
    let mut net = heat_pump_only(15.0);
    *net.storage_mut(NodeId::Sh) = StorageParams {
        eta_ch: 0.9,
        eta_dis: 0.9,
        retention: 1.0,
        e_min: 0.0,
        e_max: 100.0,
        p_ch_max: 10.0,
        p_dis_max: 10.0,
        e_init: 50.0,
        e_end: None,
    };
    let mut s = heat_series(&[5.0], 0.3);
    s.p_ac = vec![2.0];
    let win = window(
        s,
        free(0.0),
        StorageBoundary {
            init: 50.0,
            end: EndPolicy::FixedAt(50.0 + 0.9 * 2.0 - 5.0 / 0.9),
        },
    );
    let inst = build_milp(&net, &win).unwrap();
    let r = solve_lp(&inst, &SolverConfig::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!(r.objective.abs() < 1e-9, "{}", r.objective);
    let (ch, dis) = charge_discharge(&inst, &r.x, NodeId::Sh, 0);
    assert!((ch - 2.0).abs() < 1e-9 && (dis - 5.0).abs() < 1e-9);
}

#[test]
fn perturbed_demand_row_is_flagged() {
    let (net, win) = random_window(11, 8, 0);
    let inst = build_milp(&net, &win).unwrap();
    let mut r = solve_milp(&inst, &SolverConfig::default()).unwrap();
    assert!(verify_solution(&inst, &r).is_clean());
    let j = inst.layout.as_ref().unwrap().flow_on(Arc::new(NodeId::Pg, NodeId::De), 3).unwrap();
    r.x[j] += 1.0;
    let report = verify_solution(&inst, &r);
    let row = inst
        .constraints
        .iter()
        .position(|c| c.tag == RowTag::Demand(NodeId::De) && c.coeffs.iter().any(|&(k, _)| k == j))
        .unwrap();
    assert!(report
        .flagged
        .iter()
        .any(|f| f.kind == ItemKind::Row && f.name == inst.constraints[row].name));
}

#[test]
fn zero_binaries_matches_lp() {
    let (net, win) = random_window(5, 12, 0);
    let inst = build_milp(&net, &win).unwrap();
    assert_eq!(inst.n_binaries(), 0);
    let cfg = SolverConfig::default();
    let a = solve_milp(&inst, &cfg).unwrap();
    let b = solve_lp(&inst, &cfg).unwrap();
    assert_eq!(a.status, b.status);
    assert_eq!(a.objective, b.objective);
    assert_eq!(a.x, b.x);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn branch_and_bound_equals_enumeration(seed in any::<u64>(), steps in 6usize..12, negative in 1usize..=5) {
        let (net, win) = random_window(seed, steps, negative);
        let inst = build_milp(&net, &win).unwrap();
        prop_assert!(inst.n_binaries() <= 10);
        let cfg = SolverConfig::default();
        let r = solve_milp(&inst, &cfg).unwrap();
        let (best, lps) = enumerate_binaries(&inst, &cfg);
        for (fixed, lp) in &lps {
            prop_assert!(verify_solution(fixed, lp).max_violation <= 1e-9);
        }
        match best {
            None => prop_assert_eq!(r.status, SolveStatus::Infeasible),
            Some(b) => {
                prop_assert_eq!(r.status, SolveStatus::Optimal);
                prop_assert!(rel_diff(r.objective, b) <= 1e-8, "{} vs {b}", r.objective);
                prop_assert!(verify_solution(&inst, &r).max_violation <= 1e-9);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn lp_duality_gap_closes(seed in any::<u64>(), steps in 1usize..36) {
        let (net, win) = random_window(seed, steps, 0);
        let inst = build_milp(&net, &win).unwrap();
        let r = solve_lp(&inst, &SolverConfig::default()).unwrap();
        if r.is_optimal() {
            let cert = dual_certificate(&inst, &r, 1e-9).unwrap();
            prop_assert!(cert.feasible, "dual infeasibility {}", cert.max_dual_infeasibility);
            prop_assert!(cert.relative_gap() <= 1e-8, "gap {}", cert.relative_gap());
            prop_assert!(verify_solution(&inst, &r).max_violation <= 1e-9);
        }
    }

    #[test]
    fn no_simultaneous_charge_and_discharge_at_positive_prices(seed in any::<u64>(), steps in 1usize..36) {
        let (net, win) = random_window(seed, steps, 0);
        let inst = build_milp(&net, &win).unwrap();
        let r = solve_milp(&inst, &SolverConfig::default()).unwrap();
        if r.is_optimal() {
            let layout = inst.layout.as_ref().unwrap();
            for t in 0..steps {
                for node in NodeId::STORAGES {
                    let (mut ch, dis) = charge_discharge(&inst, &r.x, node, t);
                    // AC heat has no other outlet than the heat store, so
                    // storing it while discharging is not a crossing.
                    if node == NodeId::Sh {
                        ch -= r.x[layout.flow_on(Arc::new(NodeId::Ac, NodeId::Sh), t).unwrap()];
                    }
                    prop_assert!(ch.min(dis) <= 1e-7, "{node} step {t}: charge {ch} discharge {dis}");
                }
            }
        }
    }

    #[test]
    fn solves_are_deterministic(seed in any::<u64>(), steps in 1usize..24, negative in 0usize..3) {
        let (net, win) = random_window(seed, steps, negative);
        let inst = build_milp(&net, &win).unwrap();
        let cfg = SolverConfig::default();
        let a = solve_milp(&inst, &cfg).unwrap();
        let b = solve_milp(&inst, &cfg).unwrap();
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        prop_assert_eq!(a.x, b.x);
    }

    #[test]
    fn lp_text_round_trip_preserves_optimum(seed in any::<u64>(), steps in 1usize..12, negative in 0usize..3) {
        let (net, win) = random_window(seed, steps, negative);
        let inst = build_milp(&net, &win).unwrap();
        let back = parse_lp(&write_lp(&inst)).unwrap();
        prop_assert_eq!(back.n_vars(), inst.n_vars());
        prop_assert_eq!(back.n_rows(), inst.n_rows());
        prop_assert_eq!(back.n_binaries(), inst.n_binaries());
        let cfg = SolverConfig::default();
        let a = solve_milp(&inst, &cfg).unwrap();
        let b = solve_milp(&back, &cfg).unwrap();
        prop_assert_eq!(a.status, b.status);
        if a.is_optimal() {
            prop_assert!(rel_diff(a.objective, b.objective) <= 1e-9);
        }
    }
}

fn highs_script() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scripts/highs_solve.py")
}

#[test]
fn external_solver_agrees_on_sampled_windows() {
    if !ExternalSolver::highs_available() {
        eprintln!("highspy not installed, skipped");
        return;
    }
    let ext = ExternalSolver::highs_script(&highs_script());
    for seed in 0..5u64 {
        let (net, mut win) = random_window(1000 + seed, 24, (seed % 3) as usize);
        win.boundary.heat = StorageBoundary {
            init: 30.0,
            end: EndPolicy::FixedAt(25.0),
        };
        let inst = build_milp(&net, &win).unwrap();
        let ours = solve_milp(&inst, &SolverConfig::default()).unwrap();
        let theirs = ext.solve(&inst).unwrap();
        assert_eq!(ours.status, theirs.status, "seed {seed}");
        if ours.is_optimal() {
            assert!(rel_diff(ours.objective, theirs.objective) <= 1e-6, "seed {seed}: {} vs {}", ours.objective, theirs.objective);
            assert!(verify_solution(&inst, &theirs).max_violation <= 1e-6);
        }
    }
}
