//! Named scenarios used by the tests, the CLI and the documentation.

use crate::capacity::{CapacityModel, Position};
use crate::dynamics::MotionConfig;
use crate::error::{Error, Result};
use crate::network::{spawn_scenario, Scenario, ScenarioConfig};

fn pts(v: &[(f64, f64)]) -> Vec<Position> {
    v.iter().map(|&(x, y)| Position::new(x, y)).collect()
}

fn build(tasks: &[(f64, f64)], relays: &[(f64, f64)]) -> Scenario {
    Scenario::new(pts(tasks), pts(relays), CapacityModel::default()).expect("fixture is valid")
}

/// Two task agents one kilometre apart.
pub fn two_agents() -> Scenario {
    build(&[(0.0, 0.0), (1.0, 0.0)], &[])
}

/// Two task agents two kilometres apart with a relay halfway.
pub fn midpoint_relay() -> Scenario {
    build(&[(0.0, 0.0), (2.0, 0.0)], &[(1.0, 0.0)])
}

/// Relay already at the centre of a symmetric pair.
pub fn symmetric_midpoint() -> Scenario {
    build(&[(-1.0, 0.0), (1.0, 0.0)], &[(0.0, 0.0)])
}

/// Two task agents, one relay off the connecting segment.
pub fn pair() -> Scenario {
    build(&[(-1.0, 0.0), (1.0, 0.0)], &[(0.3, 0.4)])
}

/// Four task agents on the corners of a square, two relays inside.
pub fn square() -> Scenario {
    build(
        &[(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)],
        &[(0.3, -0.2), (-0.4, 0.5)],
    )
}

/// Three clustered task agents and one far away, two relays by the cluster.
pub fn separated() -> Scenario {
    build(
        &[(0.0, 0.0), (0.4, 0.0), (0.2, 0.35), (2.2, 0.0)],
        &[(0.5, 0.3), (0.3, -0.2)],
    )
}

/// The small-team suite, in order.
pub fn small_team_suite() -> Vec<(&'static str, Scenario)> {
    vec![
        ("pair", pair()),
        ("square", square()),
        ("separated", separated()),
    ]
}

pub const FLEXIBILITY_SEED: u64 = 7;

/// Five task agents and four relays spawned at unit density.
pub fn flexibility() -> Scenario {
    spawn_scenario(
        &ScenarioConfig {
            num_task: 5,
            num_relay: 4,
            density: 1.0,
            rng_seed: FLEXIBILITY_SEED,
        },
        CapacityModel::default(),
    )
    .expect("fixture is valid")
}

/// Motion seed whose 20 s run from the optimised [`flexibility`] layout,
/// with task 0 as the fixed access point, loses about half its utility near
/// t = 8 s and then recovers above the starting value.
pub const DYNAMIC_DEMO_SEED: u64 = 8;

/// Default motion over the [`flexibility`] spawn box with task 0 pinned.
pub fn flexibility_motion(rng_seed: u64) -> MotionConfig {
    MotionConfig {
        box_side: (5.0f64).sqrt(),
        rng_seed,
        pinned_task: Some(0),
        ..MotionConfig::default()
    }
}

pub const NAMES: &[&str] = &[
    "two-agents",
    "midpoint-relay",
    "symmetric-midpoint",
    "pair",
    "square",
    "separated",
    "flexibility",
];

pub fn by_name(name: &str) -> Result<Scenario> {
    Ok(match name {
        "two-agents" => two_agents(),
        "midpoint-relay" => midpoint_relay(),
        "symmetric-midpoint" => symmetric_midpoint(),
        "pair" => pair(),
        "square" => square(),
        "separated" => separated(),
        "flexibility" => flexibility(),
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown fixture {other:?}; known: {}",
                NAMES.join(", ")
            )))
        }
    })
}
