use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use relaynav::lp::ProcessSolver;
use relaynav::mcfp::solve_mcfp_with;
use relaynav::{build_instance, fixtures, solve_mcfp, ScenarioFile, SolverOptions, UtilityWeights};
use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_relaynav");

fn relaynav(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = relaynav(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

fn read(path: PathBuf) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn solve_two_agents() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["fixture", "two-agents", "--out", "f"]);
    ok(d, &["solve", "--scenario", "f/scenario.json", "--out", "s"]);
    let phi = json(d.join("s/solution.json"))["phi"].as_f64().unwrap();
    assert!((phi - 2.0 * (-1.0f64).exp()).abs() <= 1e-6);
    assert!(read(d.join("s/report.txt")).contains("(pass)"));
    let m = json(d.join("s/manifest.json"));
    assert_eq!(m["command"], "solve");
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn zero_weights_solve_to_zero() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let s = fixtures::pair();
    let file = ScenarioFile::new(&s, &UtilityWeights::new(vec![0.0, 0.0]).unwrap());
    file.write(&d.join("zero.json")).unwrap();
    ok(d, &["solve", "--scenario", "zero.json", "--out", "s"]);
    assert_eq!(json(d.join("s/solution.json"))["phi"].as_f64(), Some(0.0));

    ok(
        d,
        &[
            "gradcheck",
            "--scenario",
            "zero.json",
            "--trials",
            "3",
            "--out",
            "g",
        ],
    );
    let g = json(d.join("g/gradcheck.json"));
    for t in g["trials"].as_array().unwrap() {
        for side in ["dual", "finite_difference"] {
            for v in t[side].as_array().unwrap() {
                assert_eq!(v[0].as_f64(), Some(0.0));
                assert_eq!(v[1].as_f64(), Some(0.0));
            }
        }
    }
}

#[test]
fn input_errors_have_their_own_status() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let out = relaynav(d, &["solve", "--scenario", "missing.json", "--out", "s"]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(d.join("bad.json"), "{\n  \"task_agents\": [1, 2\n").unwrap();
    let out = relaynav(d, &["solve", "--scenario", "bad.json", "--out", "s"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
    let out = relaynav(
        d,
        &["solve", "--scenario", "fixture:pair", "--weights", "ap:7"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(d.join("s/manifest.json"))["exit_code"], 2);
}

#[test]
fn ascend_pair_reaches_the_midpoint() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "ascend",
            "--scenario",
            "fixture:pair",
            "--out",
            "a",
            "--svg",
        ],
    );
    let last = json(d.join("a/final_scenario.json"));
    let p = &last["relay_agents"][0];
    let (x, y) = (p[0].as_f64().unwrap(), p[1].as_f64().unwrap());
    assert!(x.hypot(y) <= 1e-2);
    assert!(read(d.join("a/trace.csv")).starts_with("iteration,phi,alpha,x0,y0\n"));
    assert!(read(d.join("a/utility.svg")).contains("<polyline"));
}

#[test]
fn loose_tolerance_stops_after_one_refinement() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "ascend",
            "--scenario",
            "fixture:pair",
            "--tol",
            "100",
            "--out",
            "a",
        ],
    );
    assert_eq!(read(d.join("a/trace.csv")).lines().count(), 3);
}

#[test]
fn ascend_output_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let args = [
        "ascend",
        "--scenario",
        "fixture:square",
        "--max-iters",
        "30",
    ];
    ok(d, &[&args[..], &["--out", "a"]].concat());
    ok(d, &[&args[..], &["--out", "b"]].concat());
    assert_eq!(read(d.join("a/trace.csv")), read(d.join("b/trace.csv")));
}

#[test]
fn simulate_and_replay() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "simulate",
            "--scenario",
            "fixture:flexibility",
            "--weights",
            "ap:0",
            "--seed",
            "3",
            "--out",
            "m",
            "--svg",
        ],
    );
    assert_eq!(read(d.join("m/timeline.csv")).lines().count(), 102);
    let m = json(d.join("m/manifest.json"));
    assert_eq!(m["deterministic"], true);
    assert_eq!(m["config"]["motion"]["pinned_task"], 0);
    assert_eq!(m["seeds"]["motion"], 3);
    let text = ok(d, &["replay", "m/manifest.json", "--out", "r"]);
    assert!(text.contains("identical"));
    assert_eq!(
        read(d.join("m/timeline.csv")),
        read(d.join("r/timeline.csv"))
    );

    let csv = read(d.join("m/timeline.csv")).replace("e0,", "e1,");
    std::fs::write(d.join("m/timeline.csv"), &csv).unwrap();
    let mut m = m;
    m["outputs"][1]["sha256"] = Value::from("0");
    std::fs::write(d.join("m/manifest.json"), m.to_string()).unwrap();
    let out = relaynav(d, &["replay", "m/manifest.json", "--out", "r2"]);
    assert_eq!(out.status.code(), Some(6));
}

#[test]
fn async_runs_are_marked_nondeterministic() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "simulate",
            "--scenario",
            "fixture:flexibility",
            "--no-presolve",
            "--duration",
            "1",
            "--mode",
            "async",
            "--realtime",
            "20",
            "--out",
            "m",
        ],
    );
    assert_eq!(json(d.join("m/manifest.json"))["deterministic"], false);
    assert_eq!(read(d.join("m/timeline.csv")).lines().count(), 7);
}

#[test]
fn simulate_rejects_tasks_outside_the_box() {
    let tmp = TempDir::new().unwrap();
    let out = relaynav(
        tmp.path(),
        &[
            "simulate",
            "--scenario",
            "fixture:square",
            "--no-presolve",
            "--duration",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_table() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(
        d,
        &["bench", "--sizes", "2,3", "--repeats", "1", "--out", "b"],
    );
    let csv = read(d.join("b/bench.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("size,mean_s,std_s"));
    for (line, size) in lines.zip(["2", "3"]) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0], size);
        assert!(cols[1].parse::<f64>().unwrap() > 0.0);
        assert_eq!(cols[2].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn gradcheck_statuses() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "gradcheck",
            "--scenario",
            "fixture:square",
            "--trials",
            "4",
            "--out",
            "g",
        ],
    );
    let g = json(d.join("g/gradcheck.json"));
    assert!(g["max_relative_error"].as_f64().unwrap() <= 1e-3);
    let out = relaynav(
        d,
        &[
            "gradcheck",
            "--scenario",
            "fixture:square",
            "--trials",
            "2",
            "--threshold",
            "1e-15",
        ],
    );
    assert_eq!(out.status.code(), Some(5));

    ok(
        d,
        &[
            "gradcheck",
            "--scenario",
            "fixture:symmetric-midpoint",
            "--trials",
            "1",
            "--out",
            "m",
        ],
    );
    let t = &json(d.join("m/gradcheck.json"))["trials"][0];
    for side in ["dual", "finite_difference"] {
        let v = &t[side][0];
        assert!(v[0].as_f64().unwrap().hypot(v[1].as_f64().unwrap()) <= 1e-6);
    }
}

#[test]
fn spawn_is_seeded() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "spawn", "--tasks", "4", "--relays", "2", "--seed", "9", "--out", "a",
        ],
    );
    ok(
        d,
        &[
            "spawn", "--tasks", "4", "--relays", "2", "--seed", "9", "--out", "b",
        ],
    );
    assert_eq!(
        read(d.join("a/scenario.json")),
        read(d.join("b/scenario.json"))
    );
    let s = json(d.join("a/scenario.json"));
    assert_eq!(s["task_agents"].as_array().unwrap().len(), 4);
    assert_eq!(s["relay_agents"].as_array().unwrap().len(), 2);
}

#[test]
fn lp_solve_speaks_the_external_protocol() {
    let s = fixtures::square();
    let inst = build_instance(&s, &UtilityWeights::ones(4)).unwrap();
    let opts = SolverOptions::default();
    let ext = ProcessSolver::new(BIN, ["lp-solve", "--lp", "-", "--stdio"]);
    let a = solve_mcfp_with(&inst, &opts, &ext).unwrap();
    let b = solve_mcfp(&inst, &opts).unwrap();
    assert_eq!(a.phi, b.phi);
}
