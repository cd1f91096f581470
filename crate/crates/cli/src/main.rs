//! `relaynav` command-line experiments.
//!
//! Every command writes its outputs and a `manifest.json` into `--out`.
//! Exit status: 0 success, 2 bad input, 3 solver failure, 4 verification
//! failure, 5 gradient check failure, 6 replay mismatch.

mod commands;
mod failure;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "relaynav",
    version,
    about = "Relay placement by shadow-price ascent"
)]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    pub svg: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the flow LP once and verify it.
    Solve(SolveArgs),
    /// Run shadow price ascent on the relay positions.
    Ascend(AscendArgs),
    /// Simulate a moving team.
    Simulate(SimulateArgs),
    /// Time flow solves over team sizes.
    Bench(BenchArgs),
    /// Compare the dual direction with finite differences.
    Gradcheck(GradcheckArgs),
    /// Write a random scenario.
    Spawn(SpawnArgs),
    /// Write a named fixture scenario.
    Fixture(FixtureArgs),
    /// Solve a raw LP document.
    LpSolve(LpSolveArgs),
    /// Rerun the command recorded in a manifest and compare outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Scenario JSON file, or `fixture:<name>`.
    #[arg(long)]
    pub scenario: String,
    /// `adhoc`, `ap:<index>` or `subset:<i,j,...>`; overrides weights in the file.
    #[arg(long)]
    pub weights: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Tight solver tolerances.
    #[arg(long)]
    pub precise: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AscentArgs {
    #[arg(long, default_value_t = 0.4)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.97)]
    pub decay: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    /// Halve steps that would lower the utility.
    #[arg(long)]
    pub backtracking: bool,
}

#[derive(Debug, Clone, Args)]
pub struct AscendArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub ascent: AscentArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Lockstep,
    Async,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AccelArg {
    Variance,
    Std,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.2)]
    pub dt: f64,
    #[arg(long, default_value_t = 20.0)]
    pub duration: f64,
    /// Relay speed cap in km/s.
    #[arg(long, default_value_t = 0.09)]
    pub vmax: f64,
    /// Acceleration noise `a` in km/s^2.
    #[arg(long, default_value_t = 0.01)]
    pub accel_std: f64,
    /// Whether `--accel-std` is a per-axis variance or standard deviation.
    #[arg(long, value_enum, default_value_t = AccelArg::Variance)]
    pub accel_scale: AccelArg,
    /// Side of the task box; defaults to `sqrt(K / density)`.
    #[arg(long)]
    pub box_side: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub density: f64,
    /// Task agent held fixed; defaults to the access point of an `ap:` preset.
    #[arg(long)]
    pub pin: Option<usize>,
    #[arg(long, value_enum, default_value_t = Mode::Lockstep)]
    pub mode: Mode,
    /// Wall-clock speed-up in async mode.
    #[arg(long, default_value_t = 1.0)]
    pub realtime: f64,
    /// Start from the given relay positions instead of optimising them first.
    #[arg(long)]
    pub no_presolve: bool,
    #[command(flatten)]
    pub ascent: AscentArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Task-agent counts.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 5, 10])]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub density: f64,
    /// Solve the repeats of each size concurrently.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value_t = 1e-4)]
    pub h: f64,
    /// Configurations checked: the scenario itself, then random relay jitters.
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Standard deviation of the relay jitter in km.
    #[arg(long, default_value_t = 0.1)]
    pub spread: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-3)]
    pub threshold: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SpawnArgs {
    #[arg(long)]
    pub tasks: usize,
    #[arg(long, default_value_t = 0)]
    pub relays: usize,
    #[arg(long, default_value_t = 1.0)]
    pub density: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub weights: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct FixtureArgs {
    pub name: String,
    #[arg(long)]
    pub weights: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct LpSolveArgs {
    /// LP document (`{lp, options}` or a bare LP); `-` reads stdin.
    #[arg(long)]
    pub lp: String,
    /// Speak JSON over stdio only: no files, result on stdout.
    #[arg(long)]
    pub stdio: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    match commands::run(&cli, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("relaynav: {e}");
            e.exit()
        }
    }
}
