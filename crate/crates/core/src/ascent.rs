//! Shadow price ascent on relay positions.

use std::fmt::Write as _;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::capacity::{LinkModel, Position, Vec2};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::lp::SolverOptions;
use crate::mcfp::{build_instance, solve_mcfp, FlowSolution};
use crate::network::{Scenario, UtilityWeights};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AscentConfig {
    pub alpha0: f64,
    pub decay: f64,
    /// Stop once `|phi_t - phi_{t-1}| < tol`.
    pub tol: f64,
    pub max_iters: usize,
    /// Halve the step (up to [`MAX_HALVINGS`] times) until the utility does
    /// not decrease; stay put if it still does.
    pub backtracking: bool,
    pub solver: SolverOptions,
}

pub const MAX_HALVINGS: usize = 20;

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            alpha0: 0.4,
            decay: 0.97,
            tol: 1e-5,
            max_iters: 500,
            backtracking: false,
            solver: SolverOptions::default(),
        }
    }
}

impl AscentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return bad("alpha0 must be positive");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("decay must lie in (0, 1]");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AscentRecord {
    pub iteration: usize,
    pub phi: f64,
    /// Step size applied after this solve.
    pub alpha: f64,
    /// Relay positions at which `phi` was evaluated.
    pub relays: Vec<Position>,
    pub gradients: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AscentTrace {
    pub records: Vec<AscentRecord>,
    /// Positions of the last solve once converged; after the last step
    /// when the iteration cap ends the run.
    pub final_relays: Vec<Position>,
    pub converged: bool,
}

impl AscentTrace {
    pub fn initial_phi(&self) -> Option<f64> {
        self.records.first().map(|r| r.phi)
    }

    pub fn final_phi(&self) -> Option<f64> {
        self.records.last().map(|r| r.phi)
    }

    pub fn phis(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.phi).collect()
    }

    /// `iteration,phi,alpha,x0,y0,x1,y1,...`
    pub fn to_csv(&self) -> String {
        let relays = self.records.first().map_or(0, |r| r.relays.len());
        let mut out = String::from("iteration,phi,alpha");
        for i in 0..relays {
            let _ = write!(out, ",x{i},y{i}");
        }
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{},{:e},{:e}", r.iteration, r.phi, r.alpha);
            for p in &r.relays {
                let _ = write!(out, ",{:e},{:e}", p.x, p.y);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialises")
    }
}

/// `sum_{j != i} (mu_ij + mu_ji) grad_{x_i} c(x_i, x_j)` for every relay `i`.
pub fn gradient_from_duals(sol: &FlowSolution, s: &Scenario) -> Vec<Vec2> {
    gradient_from_duals_with(sol, s, &s.capacity_model)
}

pub fn gradient_from_duals_with(
    sol: &FlowSolution,
    s: &Scenario,
    model: &dyn LinkModel,
) -> Vec<Vec2> {
    let n = s.num_agents();
    (s.num_task()..n)
        .map(|i| {
            let xi = s.position(i);
            let mut g = Vec2::ZERO;
            for j in (0..n).filter(|&j| j != i) {
                let w = sol.mu.get(i, j) + sol.mu.get(j, i);
                if w != 0.0 {
                    g += w * model.capacity_gradient(xi, s.position(j));
                }
            }
            g
        })
        .collect()
}

/// Solves the flow LP at the scenario's current positions.
pub fn solve_at(s: &Scenario, w: &UtilityWeights, opts: &SolverOptions) -> Result<FlowSolution> {
    solve_mcfp(&build_instance(s, w)?, opts)
}

pub fn phi_at(s: &Scenario, w: &UtilityWeights, opts: &SolverOptions) -> Result<f64> {
    Ok(solve_at(s, w, opts)?.phi)
}

fn stepped(relays: &[Position], dir: &[Vec2], alpha: f64) -> Vec<Position> {
    relays
        .iter()
        .zip(dir)
        .map(|(&p, &d)| p + alpha * d)
        .collect()
}

/// Runs the ascent loop. Each iteration solves at the current relay
/// positions, records the utility, steps along the dual direction and
/// decays the step size; the loop ends when the change in recorded utility
/// drops below `cfg.tol` or after `cfg.max_iters` solves. The converged
/// configuration is the one last solved, so no step follows that solve.
pub fn ascend(s: &Scenario, w: &UtilityWeights, cfg: &AscentConfig) -> Result<AscentTrace> {
    cfg.validate()?;
    s.validate()?;
    s.check_weights(w)?;
    let mut trace = AscentTrace {
        records: Vec::new(),
        final_relays: s.relay_positions.clone(),
        converged: false,
    };
    let mut current = s.clone();
    let mut alpha = cfg.alpha0;
    let mut prev_phi = f64::NEG_INFINITY;
    let mut pending: Option<FlowSolution> = None;

    let fail = |e: Error, trace: &AscentTrace| Error::Ascent {
        source: Box::new(e),
        trace: Box::new(trace.clone()),
    };

    for iteration in 0..cfg.max_iters {
        let sol = match pending.take() {
            Some(sol) => sol,
            None => solve_at(&current, w, &cfg.solver).map_err(|e| fail(e, &trace))?,
        };
        let grad = gradient_from_duals(&sol, &current);
        let delta = sol.phi - prev_phi;
        prev_phi = sol.phi;
        debug!(
            "iteration {iteration}: phi {:.9} delta {delta:.3e}",
            sol.phi
        );
        if delta.abs() < cfg.tol {
            trace.records.push(AscentRecord {
                iteration,
                phi: sol.phi,
                alpha: 0.0,
                relays: current.relay_positions.clone(),
                gradients: grad,
            });
            trace.converged = true;
            break;
        }

        let mut step = alpha;
        let mut next = stepped(&current.relay_positions, &grad, step);
        if cfg.backtracking {
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                let cand = current.with_relays(next.clone());
                let cand_sol = solve_at(&cand, w, &cfg.solver).map_err(|e| fail(e, &trace))?;
                if cand_sol.phi >= sol.phi {
                    pending = Some(cand_sol);
                    accepted = true;
                    break;
                }
                step *= 0.5;
                next = stepped(&current.relay_positions, &grad, step);
            }
            if !accepted {
                debug!("iteration {iteration}: no improving step, holding position");
                step = 0.0;
                next = current.relay_positions.clone();
                pending = Some(sol.clone());
            }
        }

        trace.records.push(AscentRecord {
            iteration,
            phi: sol.phi,
            alpha: step,
            relays: current.relay_positions.clone(),
            gradients: grad,
        });
        current = current.with_relays(next);
        trace.final_relays = current.relay_positions.clone();
        alpha *= cfg.decay;
    }
    if !trace.converged {
        warn!("ascent hit the iteration cap of {}", cfg.max_iters);
    }
    Ok(trace)
}

/// Central differences of the optimal utility in every relay coordinate.
pub fn finite_difference_phi(s: &Scenario, w: &UtilityWeights, h: f64) -> Result<Vec<Vec2>> {
    finite_difference_phi_with(s, w, h, &SolverOptions::precise(), Execution::default())
}

pub fn finite_difference_phi_with(
    s: &Scenario,
    w: &UtilityWeights,
    h: f64,
    opts: &SolverOptions,
    exec: Execution,
) -> Result<Vec<Vec2>> {
    let probes = probe_solves(s, w, h, opts, exec)?;
    Ok(probes
        .chunks(2)
        .collect::<Vec<_>>()
        .chunks(2)
        .map(|xy| {
            let d = |pair: &[FlowSolution]| (pair[0].phi - pair[1].phi) / (2.0 * h);
            Vec2::new(d(xy[0]), d(xy[1]))
        })
        .collect())
}

/// Solutions at `x_i +/- h e_c` ordered relay, axis, then sign (+ first).
fn probe_solves(
    s: &Scenario,
    w: &UtilityWeights,
    h: f64,
    opts: &SolverOptions,
    exec: Execution,
) -> Result<Vec<FlowSolution>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "step h = {h} must be positive"
        )));
    }
    s.check_weights(w)?;
    let relays = s.num_relay();
    exec.map_range(4 * relays, |q| {
        let (relay, axis, sign) = (q / 4, (q / 2) % 2, if q % 2 == 0 { 1.0 } else { -1.0 });
        let mut moved = s.relay_positions.clone();
        let e = if axis == 0 {
            Vec2::new(h, 0.0)
        } else {
            Vec2::new(0.0, h)
        };
        moved[relay] += sign * e;
        solve_at(&s.with_relays(moved), w, opts)
    })
    .into_iter()
    .collect()
}

/// Below this norm a gradient is treated as zero when forming relative
/// errors.
pub const GRADIENT_FLOOR: f64 = 1e-4;

/// Relative change of the dual direction across the probe solves above
/// which a configuration is flagged as degenerate.
pub const STABILITY_TOL: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub dual: Vec<Vec2>,
    pub finite_difference: Vec<Vec2>,
    /// `||dual - fd|| / max(||fd||, GRADIENT_FLOOR)` over the stacked
    /// relay coordinates.
    pub relative_error: f64,
    pub max_abs: f64,
    /// Largest relative change of the dual direction between the base
    /// solve and any probe solve.
    pub instability: f64,
    pub degenerate: bool,
}

fn stacked_norm(v: &[Vec2]) -> f64 {
    v.iter().map(|g| g.dot(*g)).sum::<f64>().sqrt()
}

fn stacked_diff(a: &[Vec2], b: &[Vec2]) -> Vec<Vec2> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// Compares the dual direction with central differences of the utility.
/// Configurations whose optimal prices move discontinuously within `h` are
/// flagged degenerate: there the dual direction is one of several valid
/// ascent directions and need not match the difference quotient.
pub fn gradient_check(
    s: &Scenario,
    w: &UtilityWeights,
    h: f64,
    opts: &SolverOptions,
    exec: Execution,
) -> Result<GradientCheck> {
    let base = solve_at(s, w, opts)?;
    let dual = gradient_from_duals(&base, s);
    let probes = probe_solves(s, w, h, opts, exec)?;
    let relays = s.num_relay();
    let mut fd = Vec::with_capacity(relays);
    let mut instability = 0.0f64;
    let scale = stacked_norm(&dual).max(GRADIENT_FLOOR);
    for relay in 0..relays {
        let q = &probes[4 * relay..4 * relay + 4];
        let d = |a: &FlowSolution, b: &FlowSolution| (a.phi - b.phi) / (2.0 * h);
        fd.push(Vec2::new(d(&q[0], &q[1]), d(&q[2], &q[3])));
        for (k, probe) in q.iter().enumerate() {
            let mut moved = s.relay_positions.clone();
            let sign = if k % 2 == 0 { h } else { -h };
            moved[relay] += if k < 2 {
                Vec2::new(sign, 0.0)
            } else {
                Vec2::new(0.0, sign)
            };
            let g = gradient_from_duals(probe, &s.with_relays(moved));
            instability = instability.max(stacked_norm(&stacked_diff(&g, &dual)) / scale);
        }
    }
    let diff = stacked_diff(&dual, &fd);
    let relative_error = stacked_norm(&diff) / stacked_norm(&fd).max(GRADIENT_FLOOR);
    let max_abs = diff
        .iter()
        .fold(0.0f64, |m, d| m.max(d.x.abs()).max(d.y.abs()));
    let degenerate = instability > STABILITY_TOL;
    if degenerate {
        debug!("degenerate prices: direction moves by {instability:.3e} within h");
    }
    Ok(GradientCheck {
        dual,
        finite_difference: fd,
        relative_error,
        max_abs,
        instability,
        degenerate,
    })
}
