use relaynav::mcfp::SLACK_ROW_THRESHOLD;
use relaynav::{
    build_instance, fixtures, solve_mcfp, spawn_scenario, verify_solution, CapacityModel,
    McfpInstance, Scenario, ScenarioConfig, SolverOptions, UtilityWeights, WeightPreset,
};

fn spawn(k: usize, i: usize, seed: u64) -> Scenario {
    spawn_scenario(
        &ScenarioConfig {
            num_task: k,
            num_relay: i,
            density: 1.0,
            rng_seed: seed,
        },
        CapacityModel::default(),
    )
    .unwrap()
}

fn suite() -> Vec<Scenario> {
    let mut out: Vec<Scenario> = fixtures::small_team_suite()
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    out.push(fixtures::two_agents());
    out.push(fixtures::midpoint_relay());
    for seed in 0..6 {
        out.push(spawn(
            3 + seed as usize % 3,
            1 + seed as usize % 2,
            500 + seed,
        ));
    }
    out
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

#[test]
fn every_solve_verifies() {
    for s in suite() {
        for preset in [WeightPreset::AdHoc, WeightPreset::ApRouting(0)] {
            let w = s.preset_weights(&preset).unwrap();
            let inst = build_instance(&s, &w).unwrap();
            let sol = solve_mcfp(&inst, &opts()).unwrap();
            let rep = verify_solution(&inst, &sol);
            assert!(rep.passes, "{rep}");
            assert!(rep.gap.abs() <= 1e-6);
            assert!(rep.slack_row_price <= 1e-6);
            let n = inst.num_agents();
            for i in 0..n {
                for j in (0..n).filter(|&j| j != i) {
                    assert!(sol.mu.get(i, j) >= -1e-9);
                    if inst.capacity.get(i, j) - sol.link_load(i, j) >= SLACK_ROW_THRESHOLD {
                        assert!(sol.mu.get(i, j).abs() <= 1e-6);
                    }
                }
            }
        }
    }
}

/// With every capacity below the unit flow bound the dual objective is
/// `sum mu_ij C_ij`.
#[test]
fn capacity_prices_account_for_the_utility() {
    for s in suite() {
        let w = UtilityWeights::ones(s.commodities.len());
        let inst = build_instance(&s, &w).unwrap();
        let sol = solve_mcfp(&inst, &opts()).unwrap();
        let n = inst.num_agents();
        let mut priced = 0.0;
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                priced += sol.mu.get(i, j) * inst.capacity.get(i, j);
            }
        }
        assert!(
            (priced - sol.phi).abs() <= 1e-6 * (1.0 + sol.phi),
            "{priced} vs {}",
            sol.phi
        );
    }
}

fn phi_of(inst: &McfpInstance) -> f64 {
    solve_mcfp(inst, &opts()).unwrap().phi
}

/// The optimal value is concave in the capacities and `mu` is a
/// supergradient: `Phi(C + d e_ij) <= Phi(C) + mu_ij d`.
#[test]
fn prices_bound_capacity_perturbations() {
    for s in [fixtures::pair(), fixtures::square(), spawn(4, 2, 77)] {
        let w = UtilityWeights::ones(s.commodities.len());
        let inst = build_instance(&s, &w).unwrap();
        let base = solve_mcfp(&inst, &opts()).unwrap();
        let n = inst.num_agents();
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let c = inst.capacity.get(i, j);
                for d in [-0.2 * c, -0.01 * c, 0.01 * c, 0.05] {
                    let mut moved = inst.clone();
                    moved.capacity.set(i, j, (c + d).min(1.0));
                    let d = moved.capacity.get(i, j) - c;
                    let lhs = phi_of(&moved);
                    let rhs = base.phi + base.mu.get(i, j) * d;
                    assert!(lhs <= rhs + 1e-6, "({i},{j}) d={d}: {lhs} > {rhs}");
                }
            }
        }
    }
}

#[test]
fn price_matches_one_sided_rates() {
    let s = fixtures::two_agents();
    let w = UtilityWeights::ones(2);
    let inst = build_instance(&s, &w).unwrap();
    let base = solve_mcfp(&inst, &opts()).unwrap();
    let h = 1e-4;
    let mut up = inst.clone();
    up.capacity.set(0, 1, inst.capacity.get(0, 1) + h);
    let rate = (phi_of(&up) - base.phi) / h;
    assert!(
        (rate - base.mu.get(0, 1)).abs() <= 1e-4,
        "{rate} vs {}",
        base.mu.get(0, 1)
    );
    assert!((base.mu.get(0, 1) - 1.0).abs() <= 1e-6);
}

#[test]
fn utility_grows_with_capacity() {
    for s in suite() {
        let w = UtilityWeights::ones(s.commodities.len());
        let inst = build_instance(&s, &w).unwrap();
        let mut prev = phi_of(&inst);
        for factor in [1.1, 1.3, 1.6] {
            let mut scaled = inst.clone();
            let n = inst.num_agents();
            for i in 0..n {
                for j in (0..n).filter(|&j| j != i) {
                    scaled
                        .capacity
                        .set(i, j, (inst.capacity.get(i, j) * factor).min(1.0));
                }
            }
            let next = phi_of(&scaled);
            assert!(next >= prev - 1e-7, "{next} < {prev}");
            prev = next;
        }
        let wider = Scenario {
            capacity_model: CapacityModel::new(1.5, 2.0).unwrap(),
            ..s.clone()
        };
        let w = UtilityWeights::ones(s.commodities.len());
        assert!(phi_of(&build_instance(&wider, &w).unwrap()) >= phi_of(&inst) - 1e-7);
    }
}

#[test]
fn utility_is_homogeneous_in_weights() {
    let s = fixtures::separated();
    let w = UtilityWeights::new(vec![1.0, 0.5, 0.0, 2.0]).unwrap();
    let w3 = UtilityWeights::new(w.as_slice().iter().map(|x| 3.0 * x).collect()).unwrap();
    let a = phi_of(&build_instance(&s, &w).unwrap());
    let b = phi_of(&build_instance(&s, &w3).unwrap());
    assert!((b - 3.0 * a).abs() <= 1e-6 * (1.0 + b));
}

#[test]
fn zero_weights_give_zero_utility_and_prices() {
    let s = fixtures::square();
    let w = UtilityWeights::new(vec![0.0; 4]).unwrap();
    let sol = solve_mcfp(&build_instance(&s, &w).unwrap(), &opts()).unwrap();
    assert_eq!(sol.phi, 0.0);
    assert_eq!(sol.mu.max_abs(), 0.0);
}
