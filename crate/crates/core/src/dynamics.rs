//! Mobile-team simulation: task agents under random acceleration inside a
//! reflecting box, relays chasing the dual ascent direction at bounded speed.

use std::fmt::Write as _;
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ascent::{gradient_from_duals, solve_at};
use crate::capacity::{Position, Vec2};
use crate::error::{Error, Result};
use crate::lp::SolverOptions;
use crate::network::{Scenario, UtilityWeights};

/// How the acceleration parameter `a` scales the per-axis Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccelScale {
    /// `a` is the per-component variance, so the deviation is `sqrt(a)`.
    #[default]
    Variance,
    /// `a` is the per-component standard deviation.
    StdDev,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionConfig {
    /// Tick length in seconds.
    pub dt: f64,
    /// Acceleration noise parameter `a` in km/s^2, see [`AccelScale`].
    pub accel_std: f64,
    #[serde(default)]
    pub accel_scale: AccelScale,
    /// Relay speed cap in km/s.
    pub v_max: f64,
    /// Side of the square `[0, L]^2` confining task agents.
    pub box_side: f64,
    pub duration: f64,
    pub rng_seed: u64,
    /// Task agent held fixed for the whole run.
    #[serde(default)]
    pub pinned_task: Option<usize>,
    /// Wall-clock speed-up in async mode.
    #[serde(default = "default_realtime_factor")]
    pub realtime_factor: f64,
    #[serde(default)]
    pub solver: SolverOptions,
}

fn default_realtime_factor() -> f64 {
    1.0
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            dt: 0.2,
            accel_std: 0.01,
            accel_scale: AccelScale::Variance,
            v_max: 0.09,
            box_side: 1.0,
            duration: 20.0,
            rng_seed: 0,
            pinned_task: None,
            realtime_factor: 1.0,
            solver: SolverOptions::default(),
        }
    }
}

impl MotionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.v_max >= 0.0 && self.v_max.is_finite()) {
            return bad(format!("v_max = {} must be nonnegative", self.v_max));
        }
        if !(self.box_side > 0.0 && self.box_side.is_finite()) {
            return bad(format!("box side = {} must be positive", self.box_side));
        }
        if !(self.accel_std >= 0.0 && self.accel_std.is_finite()) {
            return bad(format!(
                "acceleration = {} must be nonnegative",
                self.accel_std
            ));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return bad(format!("duration = {} must be nonnegative", self.duration));
        }
        if !(self.realtime_factor > 0.0) {
            return bad("realtime factor must be positive".into());
        }
        Ok(())
    }

    /// Per-component standard deviation of the sampled acceleration.
    pub fn accel_sigma(&self) -> f64 {
        match self.accel_scale {
            AccelScale::Variance => self.accel_std.sqrt(),
            AccelScale::StdDev => self.accel_std,
        }
    }

    /// Number of ticks; the timeline holds one more snapshot than this.
    pub fn ticks(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub tick: usize,
    pub time: f64,
    pub task_positions: Vec<Position>,
    pub task_velocities: Vec<Vec2>,
    pub relay_positions: Vec<Position>,
    pub directions: Vec<Vec2>,
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    #[default]
    Lockstep,
    Async,
}

impl SimMode {
    pub fn is_deterministic(self) -> bool {
        self == SimMode::Lockstep
    }
}

impl std::str::FromStr for SimMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "lockstep" => Ok(SimMode::Lockstep),
            "async" => Ok(SimMode::Async),
            other => Err(format!(
                "unknown mode {other:?}, expected lockstep or async"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTimeline {
    pub mode: SimMode,
    pub snapshots: Vec<SimState>,
}

impl SimTimeline {
    pub fn phis(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.phi).collect()
    }

    /// `tick,time_s,phi`, then `x`/`y` per task agent and per relay.
    pub fn to_csv(&self) -> String {
        let (k, r) = self.snapshots.first().map_or((0, 0), |s| {
            (s.task_positions.len(), s.relay_positions.len())
        });
        let mut out = String::from("tick,time_s,phi");
        for i in 0..k {
            let _ = write!(out, ",task{i}_x,task{i}_y");
        }
        for i in 0..r {
            let _ = write!(out, ",relay{i}_x,relay{i}_y");
        }
        out.push('\n');
        for s in &self.snapshots {
            let _ = write!(out, "{},{:e},{:e}", s.tick, s.time, s.phi);
            for p in s.task_positions.iter().chain(&s.relay_positions) {
                let _ = write!(out, ",{:e},{:e}", p.x, p.y);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("timeline serialises")
    }
}

fn reflect(x: f64, v: f64, side: f64) -> (f64, f64) {
    let (mut x, mut v) = (x, v);
    loop {
        if x > side {
            x = 2.0 * side - x;
            v = -v;
        } else if x < 0.0 {
            x = -x;
            v = -v;
        } else {
            return (x, v);
        }
    }
}

/// One tick of the random-acceleration model for a single agent, given its
/// sampled acceleration.
pub fn advance_task(x: Position, v: Vec2, accel: Vec2, dt: f64, side: f64) -> (Position, Vec2) {
    let v_new = v + dt * accel;
    let x_new = x + dt * v + (0.5 * dt * dt) * accel;
    let (px, vx) = reflect(x_new.x, v_new.x, side);
    let (py, vy) = reflect(x_new.y, v_new.y, side);
    (Position::new(px, py), Vec2::new(vx, vy))
}

/// Advances all task agents one tick, sampling accelerations from `rng`.
/// The pinned agent, if any, neither moves nor consumes samples.
pub fn step_task<R: Rng + ?Sized>(
    positions: &[Position],
    velocities: &[Vec2],
    cfg: &MotionConfig,
    rng: &mut R,
) -> (Vec<Position>, Vec<Vec2>) {
    let normal = Normal::new(0.0, cfg.accel_sigma()).expect("finite sigma");
    positions
        .iter()
        .zip(velocities)
        .enumerate()
        .map(|(i, (&x, &v))| {
            if cfg.pinned_task == Some(i) {
                return (x, Vec2::ZERO);
            }
            let accel = Vec2::new(normal.sample(rng), normal.sample(rng));
            advance_task(x, v, accel, cfg.dt, cfg.box_side)
        })
        .unzip()
}

/// Moves each relay by `min(|d|, v_max) d / |d| dt`.
pub fn step_relay(
    positions: &[Position],
    directions: &[Vec2],
    cfg: &MotionConfig,
) -> Vec<Position> {
    positions
        .iter()
        .zip(directions)
        .map(|(&x, &d)| {
            let norm = d.norm();
            if norm == 0.0 || !norm.is_finite() {
                return x;
            }
            x + (norm.min(cfg.v_max) / norm * cfg.dt) * d
        })
        .collect()
}

fn check_inputs(s0: &Scenario, w: &UtilityWeights, cfg: &MotionConfig) -> Result<()> {
    cfg.validate()?;
    s0.validate()?;
    s0.check_weights(w)?;
    if let Some(p) = cfg.pinned_task {
        if p >= s0.num_task() {
            return Err(Error::InvalidConfig(format!(
                "pinned agent {p} is not a task agent"
            )));
        }
    }
    let side = cfg.box_side;
    if let Some(p) = s0
        .task_positions
        .iter()
        .find(|p| !(0.0..=side).contains(&p.x) || !(0.0..=side).contains(&p.y))
    {
        return Err(Error::InvalidConfig(format!(
            "task agent at ({}, {}) lies outside the [0, {side}]^2 box",
            p.x, p.y
        )));
    }
    Ok(())
}

/// Runs the simulation from `s0`, whose relays should already sit at an
/// ascent optimum. Task agents start at rest.
pub fn run_simulation(
    s0: &Scenario,
    w: &UtilityWeights,
    cfg: &MotionConfig,
    mode: SimMode,
) -> Result<SimTimeline> {
    check_inputs(s0, w, cfg)?;
    match mode {
        SimMode::Lockstep => run_lockstep(s0, w, cfg),
        SimMode::Async => run_async(s0, w, cfg),
    }
}

fn run_lockstep(s0: &Scenario, w: &UtilityWeights, cfg: &MotionConfig) -> Result<SimTimeline> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut timeline = SimTimeline {
        mode: SimMode::Lockstep,
        snapshots: Vec::with_capacity(cfg.ticks() + 1),
    };
    let mut scene = s0.clone();
    let mut velocities = vec![Vec2::ZERO; s0.num_task()];
    for tick in 0..=cfg.ticks() {
        let sol = match solve_at(&scene, w, &cfg.solver) {
            Ok(sol) => sol,
            Err(e) => {
                return Err(Error::Simulation {
                    source: Box::new(e),
                    timeline: Box::new(timeline),
                })
            }
        };
        let directions = gradient_from_duals(&sol, &scene);
        timeline.snapshots.push(SimState {
            tick,
            time: tick as f64 * cfg.dt,
            task_positions: scene.task_positions.clone(),
            task_velocities: velocities.clone(),
            relay_positions: scene.relay_positions.clone(),
            directions: directions.clone(),
            phi: sol.phi,
        });
        if tick == cfg.ticks() {
            break;
        }
        let (tasks, vels) = step_task(&scene.task_positions, &velocities, cfg, &mut rng);
        let relays = step_relay(&scene.relay_positions, &directions, cfg);
        scene.task_positions = tasks;
        scene.relay_positions = relays;
        velocities = vels;
    }
    Ok(timeline)
}

struct Completed {
    phi: f64,
    directions: Vec<Vec2>,
}

/// Clock thread advances the team on the wall clock; a solver worker turns
/// the most recent snapshot into a direction. Relays coast on the latest
/// completed direction, and each snapshot records the latest completed
/// utility.
fn run_async(s0: &Scenario, w: &UtilityWeights, cfg: &MotionConfig) -> Result<SimTimeline> {
    let (snap_tx, snap_rx) = mpsc::channel::<Scenario>();
    let (done_tx, done_rx) = mpsc::channel::<Result<Completed>>();
    let weights = w.clone();
    let solver = cfg.solver;
    let worker = thread::spawn(move || {
        for scene in snap_rx {
            let out = solve_at(&scene, &weights, &solver).map(|sol| Completed {
                phi: sol.phi,
                directions: gradient_from_duals(&sol, &scene),
            });
            if done_tx.send(out).is_err() {
                break;
            }
        }
    });

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut timeline = SimTimeline {
        mode: SimMode::Async,
        snapshots: Vec::with_capacity(cfg.ticks() + 1),
    };
    let mut scene = s0.clone();
    let mut velocities = vec![Vec2::ZERO; s0.num_task()];

    // The first direction is computed before the clock starts.
    snap_tx.send(scene.clone()).expect("worker alive");
    let first = done_rx.recv().expect("worker alive");
    let mut latest = match first {
        Ok(c) => c,
        Err(e) => {
            drop(snap_tx);
            let _ = worker.join();
            return Err(Error::Simulation {
                source: Box::new(e),
                timeline: Box::new(timeline),
            });
        }
    };
    let mut busy = false;
    let tick_wall = Duration::from_secs_f64(cfg.dt / cfg.realtime_factor);
    let start = Instant::now();
    let mut failure = None;

    for tick in 0..=cfg.ticks() {
        while let Ok(out) = done_rx.try_recv() {
            busy = false;
            match out {
                Ok(c) => latest = c,
                Err(e) => failure = Some(e),
            }
        }
        if let Some(e) = failure.take() {
            drop(snap_tx);
            let _ = worker.join();
            return Err(Error::Simulation {
                source: Box::new(e),
                timeline: Box::new(timeline),
            });
        }
        if !busy {
            snap_tx.send(scene.clone()).expect("worker alive");
            busy = true;
        }
        timeline.snapshots.push(SimState {
            tick,
            time: tick as f64 * cfg.dt,
            task_positions: scene.task_positions.clone(),
            task_velocities: velocities.clone(),
            relay_positions: scene.relay_positions.clone(),
            directions: latest.directions.clone(),
            phi: latest.phi,
        });
        if tick == cfg.ticks() {
            break;
        }
        let (tasks, vels) = step_task(&scene.task_positions, &velocities, cfg, &mut rng);
        scene.relay_positions = step_relay(&scene.relay_positions, &latest.directions, cfg);
        scene.task_positions = tasks;
        velocities = vels;

        let due = start + tick_wall * (tick as u32 + 1);
        if let Some(wait) = due.checked_duration_since(Instant::now()) {
            thread::sleep(wait);
        }
    }
    drop(snap_tx);
    let _ = worker.join();
    Ok(timeline)
}
