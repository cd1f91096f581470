//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relaynav::ascent::phi_at;
use relaynav::dynamics::advance_task;
use relaynav::mcfp::VERIFY_TOL;
use relaynav::{
    ascend, build_instance, fixtures, gradient_check, run_bench, run_simulation, solve_mcfp,
    spawn_scenario, verify_solution, AscentConfig, AscentTrace, BenchConfig, CapacityModel,
    Execution, Position, Scenario, ScenarioConfig, SimMode, SolverOptions, UtilityWeights, Vec2,
    WeightPreset,
};

type Outcome = Result<String, String>;

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
    .expect("valid spawn")
}

fn ones(s: &Scenario) -> UtilityWeights {
    UtilityWeights::ones(s.commodities.len())
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gradient_fidelity() -> Outcome {
    let h = 1e-4;
    let shapes = [(3, 1), (3, 2), (5, 1), (5, 2)];
    let opts = SolverOptions::precise();
    let (mut kept, mut skipped, mut worst, mut misaligned) = (0, 0, 0.0f64, 0);
    let mut seed = 0u64;
    while kept < 20 && seed < 400 {
        let (k, i) = shapes[seed as usize % shapes.len()];
        let s = spawn(k, i, 31_000 + seed);
        seed += 1;
        let g = gradient_check(&s, &ones(&s), h, &opts, Execution::default())
            .map_err(|e| format!("seed {seed}: {e}"))?;
        if g.degenerate {
            skipped += 1;
            continue;
        }
        let dot: f64 = g
            .dual
            .iter()
            .zip(&g.finite_difference)
            .map(|(a, b)| a.dot(*b))
            .sum();
        if dot < 0.0 {
            misaligned += 1;
        }
        worst = worst.max(g.relative_error);
        kept += 1;
    }
    check(
        kept >= 20 && worst <= 1e-3 && misaligned == 0,
        format!(
            "{kept} scenarios, max relative error {worst:.2e}, {skipped} degenerate skipped, \
             {misaligned} misaligned"
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let solve = |s: &Scenario, w: &[f64]| -> Result<f64, String> {
        let w = UtilityWeights::new(w.to_vec()).map_err(|e| e.to_string())?;
        let inst = build_instance(s, &w).map_err(|e| e.to_string())?;
        solve_mcfp(&inst, &SolverOptions::default())
            .map(|sol| sol.phi)
            .map_err(|e| e.to_string())
    };
    let e1 = (-1.0f64).exp();
    let e4 = (-4.0f64).exp();
    let mut worst = 0.0f64;
    let mut count = 0;
    for (s, want) in [
        (fixtures::two_agents(), 2.0 * e1),
        (fixtures::midpoint_relay(), 2.0 * (e1 + e4)),
    ] {
        worst = worst.max((solve(&s, &[1.0, 1.0])? - want).abs());
        count += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (k, i) in [(2, 0), (2, 1), (2, 2), (3, 0), (3, 1), (4, 0)] {
        for seed in 0..5 {
            let s = spawn(k, i, 40_000 + 100 * k as u64 + 10 * i as u64 + seed);
            let mut weights = vec![vec![1.0; k]];
            for j in 0..k {
                let mut w = vec![0.0; k];
                w[j] = 1.0;
                weights.push(w);
            }
            weights.push((0..k).map(|_| rng.random_range(0.0..2.0)).collect());
            for w in weights {
                worst = worst.max((solve(&s, &w)? - common::brute_force_phi(&s, &w)).abs());
                count += 1;
            }
        }
    }
    check(
        worst <= 1e-5,
        format!("{count} instances with N <= 4, max |phi - oracle| {worst:.2e}"),
    )
}

struct Runs {
    fixed: Vec<(&'static str, Scenario, AscentTrace)>,
    backtracked: Vec<(&'static str, AscentTrace)>,
}

fn runs() -> Result<Runs, String> {
    let mut fixed = Vec::new();
    let mut backtracked = Vec::new();
    for (name, s) in fixtures::small_team_suite() {
        let w = ones(&s);
        let t = ascend(&s, &w, &AscentConfig::default()).map_err(|e| format!("{name}: {e}"))?;
        let cfg = AscentConfig {
            backtracking: true,
            ..AscentConfig::default()
        };
        let b = ascend(&s, &w, &cfg).map_err(|e| format!("{name}: {e}"))?;
        fixed.push((name, s, t));
        backtracked.push((name, b));
    }
    Ok(Runs { fixed, backtracked })
}

fn figure_two(runs: &Runs) -> Outcome {
    let get = |name: &str| runs.fixed.iter().find(|r| r.0 == name).expect("fixture");
    let (_, _, pair) = get("pair");
    let off = pair.final_relays[0].norm();
    let (_, _, square) = get("square");
    let inside = square
        .final_relays
        .iter()
        .all(|p| p.x.abs() < 1.0 && p.y.abs() < 1.0);
    let (_, sep, trace) = get("separated");
    let bare = Scenario::new(sep.task_positions.clone(), vec![], CapacityModel::default())
        .map_err(|e| e.to_string())?;
    let bare_phi =
        phi_at(&bare, &ones(sep), &SolverOptions::default()).map_err(|e| e.to_string())?;
    let (first, last) = (trace.initial_phi().unwrap(), trace.final_phi().unwrap());
    check(
        off <= 1e-2 && inside && last > first && last > bare_phi,
        format!(
            "(a) relay {off:.1e} from midpoint; (b) relays inside hull: {inside}; \
             (c) phi {first:.4} -> {last:.4}, no relays {bare_phi:.4}"
        ),
    )
}

fn duality_hygiene() -> Outcome {
    let mut scenes: Vec<Scenario> = fixtures::small_team_suite()
        .into_iter()
        .map(|r| r.1)
        .collect();
    scenes.push(fixtures::two_agents());
    scenes.push(fixtures::midpoint_relay());
    scenes.push(fixtures::flexibility());
    for seed in 0..12 {
        scenes.push(spawn(
            2 + seed as usize % 5,
            seed as usize % 4,
            50_000 + seed,
        ));
    }
    let (mut solves, mut gap, mut slack) = (0, 0.0f64, 0.0f64);
    for s in &scenes {
        let mut presets = vec![WeightPreset::AdHoc, WeightPreset::ApRouting(0)];
        if s.num_task() > 2 {
            presets.push(WeightPreset::Subset(vec![0, s.num_task() - 1]));
        }
        for p in presets {
            let w = s.preset_weights(&p).map_err(|e| e.to_string())?;
            let inst = build_instance(s, &w).map_err(|e| e.to_string())?;
            let sol = solve_mcfp(&inst, &SolverOptions::default()).map_err(|e| e.to_string())?;
            let rep = verify_solution(&inst, &sol);
            if !rep.passes {
                return Err(format!("verification failed: {rep}"));
            }
            gap = gap.max(rep.gap.abs());
            slack = slack.max(rep.slack_row_price);
            solves += 1;
        }
    }
    check(
        gap <= VERIFY_TOL && slack <= 1e-6,
        format!("{solves} solves verified, max gap {gap:.1e}, max slack-row price {slack:.1e}"),
    )
}

fn flexibility() -> Outcome {
    let s = fixtures::flexibility();
    let cfg = AscentConfig::default();
    let adhoc = ascend(&s, &ones(&s), &cfg).map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    let mut ok = true;
    for j in 0..s.num_task() {
        let w = s
            .preset_weights(&WeightPreset::ApRouting(j))
            .map_err(|e| e.to_string())?;
        let ap = ascend(&s, &w, &cfg).map_err(|e| e.to_string())?;
        let at = s.task_positions[j];
        let mean = |r: &[Position]| r.iter().map(|p| p.distance(at)).sum::<f64>() / r.len() as f64;
        let (near, far) = (mean(&ap.final_relays), mean(&adhoc.final_relays));
        ok &= near < far;
        lines.push(format!("ap:{j} {near:.3} vs adhoc {far:.3}"));
    }
    check(
        ok,
        format!("mean relay distance to AP: {}", lines.join(", ")),
    )
}

fn dynamics() -> Outcome {
    let s = fixtures::flexibility();
    let w = s
        .preset_weights(&WeightPreset::ApRouting(0))
        .map_err(|e| e.to_string())?;
    let start = ascend(&s, &w, &AscentConfig::default()).map_err(|e| e.to_string())?;
    let s0 = s.with_relays(start.final_relays);
    let cfg = fixtures::flexibility_motion(fixtures::DYNAMIC_DEMO_SEED);
    let run = || run_simulation(&s0, &w, &cfg, SimMode::Lockstep).map_err(|e| e.to_string());
    let a = run()?;
    let b = run()?;
    let snaps = a.snapshots.len();
    let mut step = 0.0f64;
    for pair in a.snapshots.windows(2) {
        for (p, q) in pair[0].relay_positions.iter().zip(&pair[1].relay_positions) {
            step = step.max(p.distance(*q));
        }
    }
    let side = cfg.box_side;
    let boxed = a.snapshots.iter().all(|snap| {
        snap.task_positions
            .iter()
            .all(|p| (0.0..=side).contains(&p.x) && (0.0..=side).contains(&p.y))
    });
    let identical = a.to_csv() == b.to_csv() && a.to_json() == b.to_json();

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut speed_err = 0.0f64;
    let mut bounces = 0;
    for _ in 0..10_000 {
        let x = Position::new(rng.random_range(0.0..side), rng.random_range(0.0..side));
        let v = Vec2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let acc = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let (p, v2) = advance_task(x, v, acc, cfg.dt, side);
        let free = v + cfg.dt * acc;
        if v2 != free {
            bounces += 1;
        }
        speed_err = speed_err.max((v2.norm() - free.norm()).abs());
        if !((0.0..=side).contains(&p.x) && (0.0..=side).contains(&p.y)) {
            return Err(format!("reflection left the box at {p:?}"));
        }
    }

    let phis = a.phis();
    let (lo_at, lo) =
        phis.iter().enumerate().fold(
            (0, f64::INFINITY),
            |m, (t, &v)| if v < m.1 { (t, v) } else { m },
        );
    let cap = cfg.v_max * cfg.dt;
    check(
        snaps == 101 && step <= cap + 1e-12 && boxed && speed_err <= 1e-12 && identical,
        format!(
            "{snaps} snapshots, max relay step {step:.4} km (cap {cap:.3}), tasks boxed: {boxed}, \
             speed drift {speed_err:.1e} over {bounces} reflections, identical: {identical}; \
             demo phi {:.3} -> min {lo:.3} at {:.1} s -> {:.3}",
            phis[0],
            lo_at as f64 * cfg.dt,
            phis[snaps - 1]
        ),
    )
}

fn scaling() -> Outcome {
    let rows = run_bench(&BenchConfig {
        sizes: vec![2, 5, 10],
        repeats: 10,
        execution: Execution::Sequential,
        ..BenchConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let increasing = rows.windows(2).all(|r| r[1].mean_s > r[0].mean_s);
    let table: Vec<String> = rows
        .iter()
        .map(|r| format!("A={} {:.2e}s", r.size, r.mean_s))
        .collect();
    check(increasing, table.join(", "))
}

fn algorithm_one(runs: &Runs) -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, _, t) in &runs.fixed {
        let (a, b) = (t.initial_phi().unwrap(), t.final_phi().unwrap());
        ok &= b >= a;
        lines.push(format!("{name} {a:.4}->{b:.4}"));
    }
    for (name, t) in &runs.backtracked {
        let dips = t.phis().windows(2).filter(|p| p[1] < p[0]).count();
        ok &= dips == 0;
        lines.push(format!("{name} backtracking decreases: {dips}"));
    }
    check(ok, lines.join(", "))
}

fn main() -> ExitCode {
    let all = Instant::now();
    let shared = runs();
    type Criterion<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(&str, Criterion)> = vec![
        ("gradient fidelity", Box::new(gradient_fidelity)),
        ("small-LP oracle equivalence", Box::new(oracle_equivalence)),
        (
            "small-team ascent shapes",
            Box::new(|| shared.as_ref().map_err(Clone::clone).and_then(figure_two)),
        ),
        ("duality hygiene", Box::new(duality_hygiene)),
        ("relay flexibility", Box::new(flexibility)),
        ("dynamic invariants", Box::new(dynamics)),
        ("scaling shape", Box::new(scaling)),
        (
            "ascent fidelity",
            Box::new(|| {
                shared
                    .as_ref()
                    .map_err(Clone::clone)
                    .and_then(algorithm_one)
            }),
        ),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = run();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name} ({secs:.1}s): {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name} ({secs:.1}s): {detail}", n + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        all.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
