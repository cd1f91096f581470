//! Relay placement for multi-agent teams.
//!
//! Task agents exchange information over links whose capacity decays with
//! distance. Relay agents only forward traffic and may be moved. The team
//! utility is the optimum of a multi-commodity flow LP; its capacity prices
//! give an ascent direction for the relay positions.
//!
//! ```
//! use relaynav::{ascend, fixtures, AscentConfig, UtilityWeights};
//!
//! let s = fixtures::pair();
//! let trace = ascend(&s, &UtilityWeights::ones(2), &AscentConfig::default()).unwrap();
//! assert!(trace.final_phi().unwrap() >= trace.initial_phi().unwrap());
//! ```

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod ascent;
pub mod bench;
pub mod capacity;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod fixtures;
pub mod lp;
pub mod mcfp;
pub mod network;

pub use ascent::{
    ascend, finite_difference_phi, gradient_check, gradient_from_duals, AscentConfig, AscentRecord,
    AscentTrace, GradientCheck,
};
pub use bench::{bench_csv, run_bench, BenchConfig, BenchRow};
pub use capacity::{capacity, capacity_gradient, CapacityModel, LinkModel, Position, Vec2};
pub use dynamics::{
    run_simulation, step_relay, step_task, MotionConfig, SimMode, SimState, SimTimeline,
};
pub use error::{Error, Result};
pub use exec::Execution;
pub use lp::{LpSolver, LpStatus, SolverOptions};
pub use mcfp::{
    build_instance, build_lp, solve_mcfp, verify_solution, FlowSolution, McfpInstance,
    VerificationReport,
};
pub use network::{
    default_commodities, spawn_scenario, weight_preset, CommoditySpec, Scenario, ScenarioConfig,
    ScenarioFile, UtilityWeights, WeightPreset,
};
