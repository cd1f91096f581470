//! Solve-time scaling over team size.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::capacity::CapacityModel;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::lp::SolverOptions;
use crate::mcfp::{build_instance, solve_mcfp};
use crate::network::{spawn_scenario, ScenarioConfig, UtilityWeights};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Task-agent counts; each run adds `size / 2` relays.
    pub sizes: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub density: f64,
    pub solver: SolverOptions,
    pub execution: Execution,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![2, 5, 10],
            repeats: 10,
            seed: 0,
            density: 1.0,
            solver: SolverOptions::default(),
            execution: Execution::Sequential,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub size: usize,
    pub relays: usize,
    pub repeats: usize,
    pub mean_s: f64,
    /// Sample standard deviation; zero for a single repeat.
    pub std_s: f64,
}

/// Seed of the `repeat`-th scenario at `size`.
pub fn scenario_seed(base: u64, size: usize, repeat: usize) -> u64 {
    base.wrapping_add((size as u64) << 32)
        .wrapping_add(repeat as u64)
}

pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Times `solve_mcfp` on `repeats` random all-to-all scenarios per size.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }
    if let Some(&s) = cfg.sizes.iter().find(|&&s| s < 2) {
        return Err(Error::InvalidConfig(format!(
            "size {s} has no commodities; sizes start at 2"
        )));
    }
    let mut rows = Vec::with_capacity(cfg.sizes.len());
    for &size in &cfg.sizes {
        let relays = size / 2;
        let times = cfg.execution.map_range(cfg.repeats, |r| -> Result<f64> {
            let s = spawn_scenario(
                &ScenarioConfig {
                    num_task: size,
                    num_relay: relays,
                    density: cfg.density,
                    rng_seed: scenario_seed(cfg.seed, size, r),
                },
                CapacityModel::default(),
            )?;
            let inst = build_instance(&s, &UtilityWeights::ones(s.commodities.len()))?;
            let start = Instant::now();
            solve_mcfp(&inst, &cfg.solver)?;
            Ok(start.elapsed().as_secs_f64())
        });
        let times = times.into_iter().collect::<Result<Vec<_>>>()?;
        let (mean_s, std_s) = mean_std(&times);
        rows.push(BenchRow {
            size,
            relays,
            repeats: cfg.repeats,
            mean_s,
            std_s,
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("size,mean_s,std_s\n");
    for r in rows {
        let _ = writeln!(out, "{},{:e},{:e}", r.size, r.mean_s, r.std_s);
    }
    out
}
