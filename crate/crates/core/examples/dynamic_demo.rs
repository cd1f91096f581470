//! Prints the utility over time for the committed dynamic demo seed.
//!
//! cargo run --release -p relaynav --example dynamic_demo

use relaynav::{ascend, fixtures, run_simulation, AscentConfig, SimMode, WeightPreset};

fn main() -> relaynav::Result<()> {
    let s = fixtures::flexibility();
    let w = s.preset_weights(&WeightPreset::ApRouting(0))?;
    let start = ascend(&s, &w, &AscentConfig::default())?;
    let s0 = s.with_relays(start.final_relays);
    let cfg = fixtures::flexibility_motion(fixtures::DYNAMIC_DEMO_SEED);
    let timeline = run_simulation(&s0, &w, &cfg, SimMode::Lockstep)?;
    for snap in timeline.snapshots.iter().step_by(5) {
        let bar = "#".repeat((snap.phi * 40.0).round() as usize);
        println!("{:5.1} s  {:.4}  {bar}", snap.time, snap.phi);
    }
    Ok(())
}
