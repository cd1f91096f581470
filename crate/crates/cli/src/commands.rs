use std::io::Read as _;
use std::path::{Path, PathBuf};

use clap::Parser;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use serde_json::json;

use relaynav::dynamics::AccelScale;
use relaynav::lp::{check_kkt, SolveRequest, StandardFormLp};
use relaynav::{
    ascend, bench_csv, build_instance, fixtures, gradient_check, run_bench, run_simulation,
    solve_mcfp, spawn_scenario, verify_solution, AscentConfig, AscentTrace, BenchConfig,
    CapacityModel, Execution, MotionConfig, Scenario, ScenarioConfig, ScenarioFile, SimMode,
    SolverOptions, UtilityWeights, Vec2, WeightPreset,
};

use crate::failure::{input, Failure, Outcome};
use crate::manifest::{self, Run};
use crate::svg::line_plot;
use crate::{
    AccelArg, AscendArgs, AscentArgs, BenchArgs, Cli, Command, FixtureArgs, GradcheckArgs,
    LpSolveArgs, Mode, ReplayArgs, ScenarioArgs, SimulateArgs, SolveArgs, SolverArgs, SpawnArgs,
};

pub fn run(cli: &Cli, args: Vec<String>) -> Outcome {
    let name = match &cli.command {
        Command::Solve(_) => "solve",
        Command::Ascend(_) => "ascend",
        Command::Simulate(_) => "simulate",
        Command::Bench(_) => "bench",
        Command::Gradcheck(_) => "gradcheck",
        Command::Spawn(_) => "spawn",
        Command::Fixture(_) => "fixture",
        Command::LpSolve(_) => "lp-solve",
        Command::Replay(a) => return replay(a, &cli.out),
    };
    if let Command::LpSolve(a) = &cli.command {
        if a.stdio {
            return lp_stdio(a);
        }
    }
    let mut run = Run::start(name, args, &cli.out)?;
    let result = match &cli.command {
        Command::Solve(a) => solve(a, &mut run),
        Command::Ascend(a) => ascend_cmd(a, cli.svg, &mut run),
        Command::Simulate(a) => simulate(a, cli.svg, &mut run),
        Command::Bench(a) => bench(a, &mut run),
        Command::Gradcheck(a) => gradcheck(a, &mut run),
        Command::Spawn(a) => spawn(a, &mut run),
        Command::Fixture(a) => fixture(a, &mut run),
        Command::LpSolve(a) => lp_solve(a, &mut run),
        Command::Replay(_) => unreachable!(),
    };
    let code = result.as_ref().err().map_or(0, Failure::code);
    run.finish(code)?;
    result
}

fn solver_options(a: &SolverArgs) -> SolverOptions {
    if a.precise {
        SolverOptions::precise()
    } else {
        SolverOptions::default()
    }
}

fn parse_preset(text: &str) -> Outcome<WeightPreset> {
    text.parse().map_err(input(format!("--weights {text:?}")))
}

struct Loaded {
    scenario: Scenario,
    weights: UtilityWeights,
    preset: Option<WeightPreset>,
}

fn load(a: &ScenarioArgs, run: &mut Run) -> Outcome<Loaded> {
    run.input(a.scenario.clone());
    let (scenario, file_weights) = match a.scenario.strip_prefix("fixture:") {
        Some(name) => {
            let s = fixtures::by_name(name)?;
            let w = UtilityWeights::ones(s.commodities.len());
            (s, w)
        }
        None => {
            let path = Path::new(&a.scenario);
            ScenarioFile::read(path)
                .and_then(ScenarioFile::into_parts)
                .map_err(input(format!("scenario {}", path.display())))?
        }
    };
    let preset = a.weights.as_deref().map(parse_preset).transpose()?;
    let weights = match &preset {
        Some(p) => scenario.preset_weights(p)?,
        None => file_weights,
    };
    Ok(Loaded {
        scenario,
        weights,
        preset,
    })
}

fn ascent_config(a: &AscentArgs, solver: SolverOptions) -> AscentConfig {
    AscentConfig {
        alpha0: a.alpha,
        decay: a.decay,
        tol: a.tol,
        max_iters: a.max_iters,
        backtracking: a.backtracking,
        solver,
    }
}

#[derive(Serialize)]
struct SolveConfig<'a> {
    weights: &'a UtilityWeights,
    solver: SolverOptions,
}

fn solve(a: &SolveArgs, run: &mut Run) -> Outcome {
    let l = load(&a.scenario, run)?;
    let opts = solver_options(&a.solver);
    run.config(&SolveConfig {
        weights: &l.weights,
        solver: opts,
    });
    let inst = build_instance(&l.scenario, &l.weights)?;
    let sol = match run.timed("solve", || solve_mcfp(&inst, &opts)) {
        Ok(sol) => sol,
        Err(relaynav::Error::Verification(rep)) => {
            run.write("report.txt", &format!("verification: {rep}\n"))?;
            return Err(Failure::Verification(rep.to_string()));
        }
        Err(e) => return Err(e.into()),
    };
    let rep = verify_solution(&inst, &sol);
    let text = serde_json::to_string_pretty(&sol.to_file()).expect("solution serialises");
    run.write("solution.json", &(text + "\n"))?;
    let report = format!(
        "phi {:.9}\nstatus {}\niterations {}\nverification: {rep}\n",
        sol.phi, sol.status, sol.iterations
    );
    run.write("report.txt", &report)?;
    print!("{report}");
    if !rep.passes {
        return Err(Failure::Verification(rep.to_string()));
    }
    Ok(())
}

fn write_trace(run: &mut Run, trace: &AscentTrace, svg: bool) -> Outcome {
    run.write("trace.csv", &trace.to_csv())?;
    run.write("trace.json", &(trace.to_json() + "\n"))?;
    if svg {
        let pts: Vec<(f64, f64)> = trace
            .records
            .iter()
            .map(|r| (r.iteration as f64, r.phi))
            .collect();
        run.write(
            "utility.svg",
            &line_plot("Team utility", "iteration", "phi", &pts),
        )?;
    }
    Ok(())
}

fn ascend_cmd(a: &AscendArgs, svg: bool, run: &mut Run) -> Outcome {
    let l = load(&a.scenario, run)?;
    let cfg = ascent_config(&a.ascent, solver_options(&a.solver));
    run.config(&json!({ "ascent": cfg, "weights": l.weights }));
    let trace = match run.timed("ascent", || ascend(&l.scenario, &l.weights, &cfg)) {
        Ok(t) => t,
        Err(relaynav::Error::Ascent { source, trace }) => {
            write_trace(run, &trace, svg)?;
            return Err((*source).into());
        }
        Err(e) => return Err(e.into()),
    };
    write_trace(run, &trace, svg)?;
    let last = l.scenario.with_relays(trace.final_relays.clone());
    run.write(
        "final_scenario.json",
        &(ScenarioFile::new(&last, &l.weights).to_json() + "\n"),
    )?;
    println!(
        "{} iterations, phi {:.6} -> {:.6}, converged: {}",
        trace.records.len(),
        trace.initial_phi().unwrap_or(f64::NAN),
        trace.final_phi().unwrap_or(f64::NAN),
        trace.converged
    );
    Ok(())
}

fn simulate(a: &SimulateArgs, svg: bool, run: &mut Run) -> Outcome {
    let l = load(&a.scenario, run)?;
    if !(a.density.is_finite() && a.density > 0.0) {
        return Err(Failure::Input(anyhow::anyhow!(
            "--density must be positive"
        )));
    }
    let box_side = a
        .box_side
        .unwrap_or_else(|| (l.scenario.num_task() as f64 / a.density).sqrt());
    let cfg = MotionConfig {
        dt: a.dt,
        accel_std: a.accel_std,
        accel_scale: match a.accel_scale {
            AccelArg::Variance => AccelScale::Variance,
            AccelArg::Std => AccelScale::StdDev,
        },
        v_max: a.vmax,
        box_side,
        duration: a.duration,
        rng_seed: a.seed,
        pinned_task: a
            .pin
            .or(l.preset.as_ref().and_then(WeightPreset::access_point)),
        realtime_factor: a.realtime,
        solver: SolverOptions::default(),
    };
    let mode = match a.mode {
        Mode::Lockstep => SimMode::Lockstep,
        Mode::Async => SimMode::Async,
    };
    let ascent = ascent_config(&a.ascent, cfg.solver);
    run.config(&json!({
        "motion": cfg,
        "mode": mode,
        "presolve": (!a.no_presolve).then_some(ascent),
        "weights": l.weights,
    }));
    run.seed("motion", a.seed);
    run.manifest.deterministic = mode.is_deterministic();

    let mut start = l.scenario.clone();
    if !a.no_presolve {
        let trace = run.timed("presolve", || ascend(&start, &l.weights, &ascent))?;
        start = start.with_relays(trace.final_relays);
    }
    run.write(
        "start_scenario.json",
        &(ScenarioFile::new(&start, &l.weights).to_json() + "\n"),
    )?;
    let timeline = match run.timed("simulate", || {
        run_simulation(&start, &l.weights, &cfg, mode)
    }) {
        Ok(t) => t,
        Err(relaynav::Error::Simulation { source, timeline }) => {
            run.write("timeline.csv", &timeline.to_csv())?;
            run.write("timeline.json", &(timeline.to_json() + "\n"))?;
            return Err((*source).into());
        }
        Err(e) => return Err(e.into()),
    };
    run.write("timeline.csv", &timeline.to_csv())?;
    run.write("timeline.json", &(timeline.to_json() + "\n"))?;
    if svg {
        let pts: Vec<(f64, f64)> = timeline.snapshots.iter().map(|s| (s.time, s.phi)).collect();
        run.write(
            "utility.svg",
            &line_plot("Utility over time", "time (s)", "phi", &pts),
        )?;
    }
    let phis = timeline.phis();
    let lo = phis.iter().copied().fold(f64::INFINITY, f64::min);
    println!(
        "{} snapshots ({:?}), phi {:.6} -> {:.6}, min {lo:.6}",
        timeline.snapshots.len(),
        mode,
        phis.first().copied().unwrap_or(f64::NAN),
        phis.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn bench(a: &BenchArgs, run: &mut Run) -> Outcome {
    let cfg = BenchConfig {
        sizes: a.sizes.clone(),
        repeats: a.repeats,
        seed: a.seed,
        density: a.density,
        solver: SolverOptions::default(),
        execution: if a.parallel {
            Execution::Parallel
        } else {
            Execution::Sequential
        },
    };
    run.config(&cfg);
    run.seed("base", a.seed);
    run.manifest.deterministic = false;
    let rows = run.timed("bench", || run_bench(&cfg))?;
    let csv = bench_csv(&rows);
    run.write("bench.csv", &csv)?;
    for r in &rows {
        println!(
            "A={:<3} relays={:<2} mean {:.3e} s  std {:.3e} s",
            r.size, r.relays, r.mean_s, r.std_s
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct Trial {
    trial: usize,
    relays: Vec<Vec2>,
    relative_error: f64,
    instability: f64,
    degenerate: bool,
    dual: Vec<Vec2>,
    finite_difference: Vec<Vec2>,
}

#[derive(Serialize)]
struct GradcheckReport {
    h: f64,
    threshold: f64,
    checked: usize,
    degenerate: usize,
    max_relative_error: f64,
    passes: bool,
    trials: Vec<Trial>,
}

fn gradcheck(a: &GradcheckArgs, run: &mut Run) -> Outcome {
    let l = load(&a.scenario, run)?;
    if !(a.spread >= 0.0 && a.spread.is_finite()) {
        return Err(Failure::Input(anyhow::anyhow!(
            "--spread must be nonnegative"
        )));
    }
    let opts = SolverOptions::precise();
    run.config(&json!({
        "h": a.h,
        "trials": a.trials,
        "spread": a.spread,
        "threshold": a.threshold,
        "solver": opts,
        "weights": l.weights,
    }));
    run.seed("jitter", a.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let jitter = Normal::new(0.0, a.spread).expect("finite spread");
    let mut trials = Vec::with_capacity(a.trials);
    for trial in 0..a.trials {
        let mut relays = l.scenario.relay_positions.clone();
        if trial > 0 {
            for p in &mut relays {
                *p += Vec2::new(jitter.sample(&mut rng), jitter.sample(&mut rng));
            }
        }
        let s = l.scenario.with_relays(relays.clone());
        let g = run.timed(&format!("trial{trial}"), || {
            gradient_check(&s, &l.weights, a.h, &opts, Execution::default())
        })?;
        trials.push(Trial {
            trial,
            relays,
            relative_error: g.relative_error,
            instability: g.instability,
            degenerate: g.degenerate,
            dual: g.dual,
            finite_difference: g.finite_difference,
        });
    }
    let kept: Vec<&Trial> = trials.iter().filter(|t| !t.degenerate).collect();
    let worst = kept.iter().map(|t| t.relative_error).fold(0.0, f64::max);
    let report = GradcheckReport {
        h: a.h,
        threshold: a.threshold,
        checked: kept.len(),
        degenerate: trials.len() - kept.len(),
        max_relative_error: worst,
        passes: worst <= a.threshold,
        trials,
    };
    let text = serde_json::to_string_pretty(&report).expect("report serialises");
    run.write("gradcheck.json", &(text + "\n"))?;
    let summary = format!(
        "checked {} configurations, skipped {} degenerate, max relative error {:.3e} (threshold {:.1e})\n",
        report.checked, report.degenerate, worst, a.threshold
    );
    run.write("report.txt", &summary)?;
    print!("{summary}");
    if !report.passes {
        return Err(Failure::Gradcheck(summary.trim_end().to_string()));
    }
    Ok(())
}

fn write_scenario(run: &mut Run, s: &Scenario, weights: Option<&str>) -> Outcome {
    let w = match weights {
        Some(text) => s.preset_weights(&parse_preset(text)?)?,
        None => UtilityWeights::ones(s.commodities.len()),
    };
    run.write(
        "scenario.json",
        &(ScenarioFile::new(s, &w).to_json() + "\n"),
    )?;
    println!("{}", run.path("scenario.json").display());
    Ok(())
}

fn spawn(a: &SpawnArgs, run: &mut Run) -> Outcome {
    let cfg = ScenarioConfig {
        num_task: a.tasks,
        num_relay: a.relays,
        density: a.density,
        rng_seed: a.seed,
    };
    run.config(&cfg);
    run.seed("spawn", a.seed);
    let s = spawn_scenario(&cfg, CapacityModel::default())?;
    write_scenario(run, &s, a.weights.as_deref())
}

fn fixture(a: &FixtureArgs, run: &mut Run) -> Outcome {
    run.config(&json!({ "fixture": a.name }));
    let s = fixtures::by_name(&a.name)?;
    write_scenario(run, &s, a.weights.as_deref())
}

fn read_request(path: &str, fallback: SolverOptions) -> Outcome<SolveRequest> {
    let text = if path == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(input("reading stdin"))?;
        buf
    } else {
        std::fs::read_to_string(path).map_err(input(format!("reading {path}")))?
    };
    if let Ok(req) = serde_json::from_str::<SolveRequest>(&text) {
        return Ok(req);
    }
    let lp: StandardFormLp = serde_json::from_str(&text).map_err(input(format!("LP {path}")))?;
    Ok(SolveRequest {
        lp,
        options: fallback,
    })
}

fn lp_stdio(a: &LpSolveArgs) -> Outcome {
    let req = read_request(&a.lp, solver_options(&a.solver))?;
    let res = relaynav::lp::solve(&req.lp, &req.options).map_err(|e| Failure::Solver(e.into()))?;
    println!(
        "{}",
        serde_json::to_string(&res).expect("result serialises")
    );
    Ok(())
}

fn lp_solve(a: &LpSolveArgs, run: &mut Run) -> Outcome {
    run.input(a.lp.clone());
    let req = read_request(&a.lp, solver_options(&a.solver))?;
    run.config(&req.options);
    let res = run
        .timed("solve", || relaynav::lp::solve(&req.lp, &req.options))
        .map_err(|e| Failure::Solver(e.into()))?;
    let kkt = check_kkt(&req.lp, &res);
    let text = serde_json::to_string_pretty(&res).expect("result serialises");
    run.write("lp_result.json", &(text + "\n"))?;
    let report = format!(
        "status {}\nobjective {:.9}\niterations {}\nprimal residual {:.3e}\ndual residual {:.3e}\ncomplementarity {:.3e}\ngap {:.3e}\n",
        res.status,
        res.objective,
        res.iterations,
        kkt.primal_residual,
        kkt.dual_residual,
        kkt.complementarity,
        kkt.gap
    );
    run.write("kkt.txt", &report)?;
    print!("{report}");
    Ok(())
}

fn absolute(p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir().unwrap_or_default().join(p)
    }
}

fn replay(a: &ReplayArgs, out: &Path) -> Outcome {
    let recorded = manifest::read(&a.manifest)?;
    let out = absolute(out);
    let original_dir = absolute(a.manifest.parent().unwrap_or(Path::new(".")));
    if out == original_dir {
        return Err(Failure::Input(anyhow::anyhow!(
            "--out must differ from the recorded output directory"
        )));
    }
    if recorded.cwd.is_dir() {
        std::env::set_current_dir(&recorded.cwd)
            .map_err(input(format!("entering {}", recorded.cwd.display())))?;
    }
    let argv = std::iter::once("relaynav".to_string()).chain(recorded.args.iter().cloned());
    let mut cli = Cli::try_parse_from(argv).map_err(input("recorded arguments"))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(Failure::Input(anyhow::anyhow!("manifest records a replay")));
    }
    cli.out = out.clone();
    let result = run(&cli, recorded.args.clone());
    let code = result.as_ref().err().map_or(0, Failure::code);
    if code != recorded.exit_code {
        return Err(Failure::Replay(format!(
            "exit status {code}, recorded {}",
            recorded.exit_code
        )));
    }
    if !recorded.deterministic {
        println!("recorded run is not deterministic; outputs not compared");
        return Ok(());
    }
    let fresh = manifest::read(&out.join(manifest::MANIFEST))?;
    let mut mismatched = Vec::new();
    for want in &recorded.outputs {
        match fresh.outputs.iter().find(|o| o.path == want.path) {
            Some(got) if got.sha256 == want.sha256 => {}
            _ => mismatched.push(want.path.clone()),
        }
    }
    if !mismatched.is_empty() {
        return Err(Failure::Replay(mismatched.join(", ")));
    }
    println!(
        "replayed {}: {} outputs identical",
        recorded.command,
        recorded.outputs.len()
    );
    Ok(())
}
