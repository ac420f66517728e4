mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use seasonal_dispatch::formulation::{
    build_milp, constraint_audit, flag_binary_steps, EndPolicy, RowTag, StorageBoundary, WindowFlows,
};
use seasonal_dispatch::network::NodeId;
use seasonal_dispatch::solver::{solve_milp, verify_solution, SolverConfig};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn binaries_only_at_negative_prices(seed in any::<u64>(), steps in 1usize..30, negative in 0usize..4) {
        let (net, win) = random_window(seed, steps, negative);
        let inst = build_milp(&net, &win).unwrap();
        let neg: Vec<usize> = (0..steps)
            .filter(|&t| win.series.c_buy[t] < 0.0 || win.series.c_sell[t] < 0.0)
            .collect();
        prop_assert_eq!(flag_binary_steps(&win).into_iter().collect::<Vec<_>>(), neg.clone());
        prop_assert_eq!(inst.n_binaries(), 2 * neg.len());
        let layout = inst.layout.as_ref().unwrap();
        for t in 0..steps {
            for node in NodeId::STORAGES {
                prop_assert_eq!(layout.binary(node, t).is_some(), neg.contains(&t));
            }
        }
    }

    #[test]
    fn flows_are_nonnegative_and_tally_matches(seed in any::<u64>(), steps in 1usize..30) {
        let (net, win) = random_window(seed, steps, 0);
        let inst = build_milp(&net, &win).unwrap();
        let layout = inst.layout.as_ref().unwrap();
        for k in 0..layout.arcs.len() {
            for t in 0..steps {
                prop_assert_eq!(inst.variables[layout.flow(k, t)].lower, 0.0);
            }
        }
        // Per step: 2 demand, 1 PV, 1 ST, 1 AC, 2 state, 1 HP ratio, 1 HP
        // cap, plus charge and discharge bounds of both storages.
        let end_rows = [win.boundary.battery.end, win.boundary.heat.end]
            .iter()
            .filter(|e| !matches!(e, EndPolicy::Free))
            .count();
        prop_assert_eq!(inst.n_rows(), steps * (9 + 4) + end_rows);
        prop_assert_eq!(inst.rows_tagged(RowTag::Demand(NodeId::De)), steps);
        prop_assert_eq!(inst.rows_tagged(RowTag::Demand(NodeId::Dh)), steps);
        prop_assert!(constraint_audit(&inst).matches_expected());
    }

    #[test]
    fn construction_is_deterministic(seed in any::<u64>(), steps in 1usize..20, negative in 0usize..3) {
        let (net, win) = random_window(seed, steps, negative);
        prop_assert_eq!(build_milp(&net, &win).unwrap(), build_milp(&net, &win).unwrap());
    }

    #[test]
    fn hand_built_dispatch_is_feasible(seed in any::<u64>(), steps in 1usize..24, negative in 0usize..3) {
        let (net, mut win) = random_window(seed, steps, negative);
        win.boundary.heat = free(30.0);
        let inst = build_milp(&net, &win).unwrap();
        let x = grid_only_dispatch(&net, &win);
        for c in &inst.constraints {
            let rel = c.violation(&x) / c.scale(&x);
            prop_assert!(rel <= 1e-9, "{} violated by {rel}", c.name);
        }
        for (v, xi) in inst.variables.iter().zip(&x) {
            prop_assert!(*xi >= v.lower - 1e-9 && *xi <= v.upper + 1e-9, "{} = {xi}", v.name);
        }
        // Objective against the cost recomputed from flows.
        let layout = inst.layout.as_ref().unwrap();
        let wf = WindowFlows::extract(layout, &x);
        let oracle = oracle_cost(&wf.arcs, &wf.flows, &win.series, 1.0);
        prop_assert!(rel_diff(inst.objective(&x), oracle) <= 1e-9);
    }

    #[test]
    fn solved_objective_matches_independent_cost(seed in any::<u64>(), steps in 2usize..16, negative in 0usize..3) {
        let (net, win) = random_window(seed, steps, negative);
        let inst = build_milp(&net, &win).unwrap();
        let r = solve_milp(&inst, &SolverConfig::default()).unwrap();
        if r.is_optimal() {
            prop_assert!(verify_solution(&inst, &r).max_violation <= 1e-9);
            let wf = WindowFlows::extract(inst.layout.as_ref().unwrap(), &r.x);
            let oracle = oracle_cost(&wf.arcs, &wf.flows, &win.series, 1.0);
            prop_assert!(rel_diff(r.objective, oracle) <= 1e-9, "{} vs {oracle}", r.objective);
        }
    }
}

#[test]
fn fixed_end_outside_bounds_is_rejected() {
    let (net, mut win) = random_window(1, 4, 0);
    win.boundary.heat = StorageBoundary {
        init: 20.0,
        end: EndPolicy::FixedAt(61.0),
    };
    assert!(build_milp(&net, &win).is_err());
}

#[test]
fn end_policy_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let series = random_series(&mut rng, 24, 0);
    let net = small_network();
    let fixed = |v| StorageBoundary {
        init: 8.0,
        end: EndPolicy::FixedAt(v),
    };
    let w = window(series.clone(), free(2.0), free(20.0));
    assert_eq!(build_milp(&net, &w).unwrap().rows_tagged(RowTag::EndLevel(NodeId::Sh)), 0);
    let w = window(series, fixed(5.0), fixed(30.0));
    let inst = build_milp(&net, &w).unwrap();
    assert_eq!(inst.rows_tagged(RowTag::EndLevel(NodeId::Se)), 1);
    assert_eq!(inst.rows_tagged(RowTag::EndLevel(NodeId::Sh)), 1);
}
