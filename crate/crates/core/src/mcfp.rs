//! The generalized multi-commodity flow LP over a scenario.
//!
//! Variables are flows `r[i][j][k]` on every ordered pair `i != j`,
//! injections `a[k][i]` for every source `i` of commodity `k`, and an
//! epigraph variable `t[k]` standing for `min_i a[k][i]`. The LP is
//!
//! ```text
//! maximize   sum_k w_k t_k
//!   t_k - a_ik                           <= 0   (epigraph, dual theta)
//!   a_ik - sum_j r_ijk + sum_j r_jik     <= 0   (source,   dual lambda)
//!   sum_j r_ijk - sum_j r_jik             = 0   (relay,    dual nu)
//!   sum_k r_ijk                          <= C_ij (capacity, dual mu)
//!   0 <= r <= 1, a >= 0, t >= 0
//! ```
//!
//! The capacity rows are kept verbatim so `mu` is the sensitivity of the
//! optimal utility to each link capacity.

use serde::{Deserialize, Serialize};

use crate::capacity::LinkModel;
use crate::error::{Error, Result};
use crate::lp::{
    InteriorPoint, LpResult, LpSolver, LpStatus, SolverOptions, SparseMatrix, StandardFormLp,
};
use crate::network::{CommoditySpec, Scenario, UtilityWeights};

/// Tolerance applied by [`verify_solution`].
pub const VERIFY_TOL: f64 = 1e-6;

/// Capacity rows with at least this much slack must carry a zero price.
pub const SLACK_ROW_THRESHOLD: f64 = 1e-2;

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.n.max(1))
            .map(<[f64]>::to_vec)
            .take(self.n)
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McfpInstance {
    /// `C[i][j] = c(x_i, x_j)`, zero diagonal.
    pub capacity: SquareMatrix,
    pub num_task: usize,
    pub commodities: Vec<CommoditySpec>,
    pub weights: UtilityWeights,
}

impl McfpInstance {
    pub fn num_agents(&self) -> usize {
        self.capacity.dim()
    }

    pub fn num_relay(&self) -> usize {
        self.num_agents() - self.num_task
    }

    pub fn is_relay(&self, agent: usize) -> bool {
        agent >= self.num_task
    }
}

pub fn build_instance(s: &Scenario, w: &UtilityWeights) -> Result<McfpInstance> {
    build_instance_with(s, w, &s.capacity_model)
}

/// Like [`build_instance`] with an arbitrary link model in place of the
/// scenario's own.
pub fn build_instance_with(
    s: &Scenario,
    w: &UtilityWeights,
    model: &dyn LinkModel,
) -> Result<McfpInstance> {
    s.validate()?;
    s.check_weights(w)?;
    let positions: Vec<_> = s.positions().collect();
    let n = positions.len();
    let mut capacity = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                capacity.set(i, j, model.capacity(positions[i], positions[j]));
            }
        }
    }
    Ok(McfpInstance {
        capacity,
        num_task: s.num_task(),
        commodities: s.commodities.clone(),
        weights: w.clone(),
    })
}

/// Where each variable and constraint of the flow LP lives.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexMap {
    num_agents: usize,
    num_task: usize,
    /// Commodities (indices into the instance) present in the LP.
    included: Vec<usize>,
    /// Per included commodity, first `a` variable.
    a_start: Vec<usize>,
    t_start: usize,
    num_vars: usize,
    /// Per included commodity, first epigraph / source row.
    epigraph_rows: Vec<usize>,
    source_rows: Vec<usize>,
    capacity_row_start: usize,
    /// Per included commodity, first relay row in the equality block.
    relay_rows: Vec<usize>,
    num_ineq: usize,
    num_eq: usize,
}

impl IndexMap {
    fn new(inst: &McfpInstance, included: Vec<usize>) -> Self {
        let n = inst.num_agents();
        let kc = included.len();
        let r_count = n * n.saturating_sub(1) * kc;
        let mut a_start = Vec::with_capacity(kc);
        let mut next = r_count;
        for &c in &included {
            a_start.push(next);
            next += inst.commodities[c].sources.len();
        }
        let t_start = next;
        let num_vars = t_start + kc;

        let mut row = 0;
        let mut epigraph_rows = Vec::with_capacity(kc);
        for &c in &included {
            epigraph_rows.push(row);
            row += inst.commodities[c].sources.len();
        }
        let mut source_rows = Vec::with_capacity(kc);
        for &c in &included {
            source_rows.push(row);
            row += inst.commodities[c].sources.len();
        }
        let capacity_row_start = row;
        let num_ineq = row + n * n.saturating_sub(1);
        let relays = inst.num_relay();
        let relay_rows = (0..kc).map(|p| p * relays).collect();
        Self {
            num_agents: n,
            num_task: inst.num_task,
            included,
            a_start,
            t_start,
            num_vars,
            epigraph_rows,
            source_rows,
            capacity_row_start,
            relay_rows,
            num_ineq,
            num_eq: kc * relays,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_ineq_rows(&self) -> usize {
        self.num_ineq
    }

    pub fn num_eq_rows(&self) -> usize {
        self.num_eq
    }

    pub fn included(&self) -> &[usize] {
        &self.included
    }

    /// Ordered pairs are enumerated by `i`, then `j != i`.
    fn pair(&self, i: usize, j: usize) -> usize {
        debug_assert!(i != j);
        i * (self.num_agents - 1) + if j < i { j } else { j - 1 }
    }

    /// Variable of `r[i][j]` for the `p`-th included commodity; ordered by
    /// source agent, then destination, then commodity.
    pub fn flow_var(&self, i: usize, j: usize, p: usize) -> usize {
        self.pair(i, j) * self.included.len() + p
    }

    /// Variable of the injection of the `s`-th source of the `p`-th
    /// included commodity.
    pub fn injection_var(&self, p: usize, s: usize) -> usize {
        self.a_start[p] + s
    }

    pub fn epigraph_var(&self, p: usize) -> usize {
        self.t_start + p
    }

    pub fn epigraph_row(&self, p: usize, s: usize) -> usize {
        self.epigraph_rows[p] + s
    }

    pub fn source_row(&self, p: usize, s: usize) -> usize {
        self.source_rows[p] + s
    }

    /// Inequality row of the capacity constraint on `(i, j)`.
    pub fn capacity_row(&self, i: usize, j: usize) -> Option<usize> {
        (i != j).then(|| self.capacity_row_start + self.pair(i, j))
    }

    /// Equality row of flow conservation at relay agent `agent`.
    pub fn relay_row(&self, p: usize, agent: usize) -> usize {
        debug_assert!(agent >= self.num_task);
        self.relay_rows[p] + (agent - self.num_task)
    }
}

/// Emits the flow LP over every commodity of the instance.
pub fn build_lp(inst: &McfpInstance) -> (StandardFormLp, IndexMap) {
    build_lp_over(inst, (0..inst.commodities.len()).collect())
}

/// Commodities with zero weight cannot raise the utility and are left out;
/// their optimal flows are zero and their multipliers vanish.
fn build_active_lp(inst: &McfpInstance) -> (StandardFormLp, IndexMap) {
    let active = (0..inst.commodities.len())
        .filter(|&c| inst.weights.as_slice()[c] > 0.0)
        .collect();
    build_lp_over(inst, active)
}

fn build_lp_over(inst: &McfpInstance, included: Vec<usize>) -> (StandardFormLp, IndexMap) {
    let map = IndexMap::new(inst, included);
    let n = inst.num_agents();
    let nv = map.num_vars;

    let mut objective = vec![0.0; nv];
    let mut lower = vec![0.0; nv];
    let mut upper = vec![f64::INFINITY; nv];
    let mut ineq = Vec::new();
    let mut ineq_rhs = vec![0.0; map.num_ineq];
    let mut eq = Vec::new();

    for (p, &c) in map.included.iter().enumerate() {
        let spec = &inst.commodities[c];
        let t = map.epigraph_var(p);
        objective[t] = inst.weights.as_slice()[c];
        lower[t] = 0.0;
        for (s, &src) in spec.sources.iter().enumerate() {
            let a = map.injection_var(p, s);
            let er = map.epigraph_row(p, s);
            ineq.push((er, t, 1.0));
            ineq.push((er, a, -1.0));
            let sr = map.source_row(p, s);
            ineq.push((sr, a, 1.0));
            for j in (0..n).filter(|&j| j != src) {
                ineq.push((sr, map.flow_var(src, j, p), -1.0));
                ineq.push((sr, map.flow_var(j, src, p), 1.0));
            }
        }
        for relay in inst.num_task..n {
            let rr = map.relay_row(p, relay);
            for j in (0..n).filter(|&j| j != relay) {
                eq.push((rr, map.flow_var(relay, j, p), 1.0));
                eq.push((rr, map.flow_var(j, relay, p), -1.0));
            }
        }
    }
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let row = map.capacity_row(i, j).expect("off-diagonal");
            ineq_rhs[row] = inst.capacity.get(i, j);
            for p in 0..map.included.len() {
                let v = map.flow_var(i, j, p);
                ineq.push((row, v, 1.0));
                upper[v] = 1.0;
            }
        }
    }

    let lp = StandardFormLp {
        objective,
        ineq: SparseMatrix::from_triplets(map.num_ineq, nv, &ineq),
        ineq_rhs,
        eq: SparseMatrix::from_triplets(map.num_eq, nv, &eq),
        eq_rhs: vec![0.0; map.num_eq],
        lower,
        upper,
    };
    (lp, map)
}

/// Optimal flows together with the multipliers of every constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    /// Optimal team utility.
    pub phi: f64,
    num_agents: usize,
    num_commodities: usize,
    /// Dense `r[(i * N + j) * C + k]`, zero on the diagonal.
    flows: Vec<f64>,
    /// `a[k][s]` for the `s`-th source of commodity `k`.
    pub a: Vec<Vec<f64>>,
    pub t: Vec<f64>,
    /// Source-row multipliers, aligned with `a`.
    pub lambda: Vec<Vec<f64>>,
    /// Epigraph-row multipliers, aligned with `a`.
    pub theta: Vec<Vec<f64>>,
    /// `nu[k][i - K]` for relay agent `i`.
    pub nu: Vec<Vec<f64>>,
    /// Capacity prices `mu[i][j]`, zero on the diagonal.
    pub mu: SquareMatrix,
    /// Relative duality gap reported by the solver.
    pub gap: f64,
    pub status: LpStatus,
    pub iterations: usize,
}

impl FlowSolution {
    fn zeros(inst: &McfpInstance) -> Self {
        let n = inst.num_agents();
        let kc = inst.commodities.len();
        let per_source = |v: f64| {
            inst.commodities
                .iter()
                .map(|c| vec![v; c.sources.len()])
                .collect::<Vec<_>>()
        };
        Self {
            phi: 0.0,
            num_agents: n,
            num_commodities: kc,
            flows: vec![0.0; n * n * kc],
            a: per_source(0.0),
            t: vec![0.0; kc],
            lambda: per_source(0.0),
            theta: per_source(0.0),
            nu: vec![vec![0.0; inst.num_relay()]; kc],
            mu: SquareMatrix::zeros(n),
            gap: 0.0,
            status: LpStatus::Optimal,
            iterations: 0,
        }
    }

    pub fn flow(&self, i: usize, j: usize, k: usize) -> f64 {
        self.flows[(i * self.num_agents + j) * self.num_commodities + k]
    }

    pub fn set_flow(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.flows[(i * self.num_agents + j) * self.num_commodities + k] = v;
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    pub fn num_commodities(&self) -> usize {
        self.num_commodities
    }

    /// Total flow on the directed link `(i, j)`.
    pub fn link_load(&self, i: usize, j: usize) -> f64 {
        (0..self.num_commodities).map(|k| self.flow(i, j, k)).sum()
    }

    pub fn to_file(&self) -> FlowSolutionFile {
        let mut r = Vec::new();
        for i in 0..self.num_agents {
            for j in 0..self.num_agents {
                for k in 0..self.num_commodities {
                    let v = self.flow(i, j, k);
                    if v.abs() > 1e-12 {
                        r.push(FlowEntry { i, j, k, value: v });
                    }
                }
            }
        }
        FlowSolutionFile {
            phi: self.phi,
            status: self.status,
            gap: self.gap,
            iterations: self.iterations,
            mu: self.mu.rows(),
            r,
            a: self.a.clone(),
            t: self.t.clone(),
            lambda: self.lambda.clone(),
            nu: self.nu.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub value: f64,
}

/// On-disk flow solution: dense prices, sparse flows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSolutionFile {
    pub phi: f64,
    pub status: LpStatus,
    pub gap: f64,
    pub iterations: usize,
    pub mu: Vec<Vec<f64>>,
    pub r: Vec<FlowEntry>,
    pub a: Vec<Vec<f64>>,
    pub t: Vec<f64>,
    pub lambda: Vec<Vec<f64>>,
    pub nu: Vec<Vec<f64>>,
}

/// Solves with the in-repo interior-point engine and verifies the result.
pub fn solve_mcfp(inst: &McfpInstance, opts: &SolverOptions) -> Result<FlowSolution> {
    solve_mcfp_with(inst, opts, &InteriorPoint)
}

/// Solves with any [`LpSolver`]. Output that fails [`verify_solution`] is
/// returned as an error, never as a solution.
pub fn solve_mcfp_with(
    inst: &McfpInstance,
    opts: &SolverOptions,
    solver: &dyn LpSolver,
) -> Result<FlowSolution> {
    let (lp, map) = build_active_lp(inst);
    let mut sol = FlowSolution::zeros(inst);
    if map.included.is_empty() {
        return Ok(sol);
    }
    let res = solver.solve(&lp, opts)?;
    if res.status != LpStatus::Optimal {
        return Err(Error::NotOptimal(res.status));
    }
    scatter(inst, &map, &res, &mut sol);
    let report = verify_solution(inst, &sol);
    if !report.passes {
        return Err(Error::Verification(Box::new(report)));
    }
    Ok(sol)
}

fn scatter(inst: &McfpInstance, map: &IndexMap, res: &LpResult, sol: &mut FlowSolution) {
    let n = inst.num_agents();
    sol.phi = res.objective;
    sol.gap = res.gap;
    sol.status = res.status;
    sol.iterations = res.iterations;
    for (p, &c) in map.included.iter().enumerate() {
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                sol.set_flow(i, j, c, res.x[map.flow_var(i, j, p)]);
            }
        }
        for s in 0..inst.commodities[c].sources.len() {
            sol.a[c][s] = res.x[map.injection_var(p, s)];
            sol.theta[c][s] = res.ineq_duals[map.epigraph_row(p, s)];
            sol.lambda[c][s] = res.ineq_duals[map.source_row(p, s)];
        }
        sol.t[c] = res.x[map.epigraph_var(p)];
        for relay in inst.num_task..n {
            sol.nu[c][relay - inst.num_task] = res.eq_duals[map.relay_row(p, relay)];
        }
    }
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let row = map.capacity_row(i, j).expect("off-diagonal");
            sol.mu.set(i, j, res.ineq_duals[row]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Largest violation of any flow constraint or variable bound.
    pub primal_residual: f64,
    /// Largest violation of dual sign or stationarity conditions.
    pub dual_residual: f64,
    /// `max |mu_ij (C_ij - sum_k r_ijk)|`.
    pub complementarity: f64,
    /// Largest price on a capacity row with at least
    /// [`SLACK_ROW_THRESHOLD`] of slack.
    pub slack_row_price: f64,
    /// `(D - phi) / (1 + |phi|)` with `D` the Lagrange dual function
    /// evaluated at the reported multipliers.
    pub gap: f64,
    pub dual_value: f64,
    pub passes: bool,
}

impl std::fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "primal {:.3e}, dual {:.3e}, complementarity {:.3e}, slack-row price {:.3e}, gap {:.3e} ({})",
            self.primal_residual,
            self.dual_residual,
            self.complementarity,
            self.slack_row_price,
            self.gap,
            if self.passes { "pass" } else { "FAIL" }
        )
    }
}

/// Independently re-derives feasibility, dual feasibility, capacity
/// complementarity and the duality gap from the flow solution.
pub fn verify_solution(inst: &McfpInstance, sol: &FlowSolution) -> VerificationReport {
    let n = inst.num_agents();
    let kc = inst.commodities.len();
    let w = inst.weights.as_slice();
    let mut pres = 0.0f64;
    let mut dres = 0.0f64;

    let net_out = |i: usize, k: usize| -> f64 {
        (0..n)
            .filter(|&j| j != i)
            .map(|j| sol.flow(i, j, k) - sol.flow(j, i, k))
            .sum()
    };

    // Primal.
    for i in 0..n {
        for j in 0..n {
            for k in 0..kc {
                let r = sol.flow(i, j, k);
                if i == j {
                    pres = pres.max(r.abs());
                } else {
                    pres = pres.max(-r).max(r - 1.0);
                }
            }
        }
    }
    for (k, spec) in inst.commodities.iter().enumerate() {
        pres = pres.max(-sol.t[k]);
        for (s, &src) in spec.sources.iter().enumerate() {
            let a = sol.a[k][s];
            pres = pres.max(-a).max(sol.t[k] - a).max(a - net_out(src, k));
        }
        for relay in inst.num_task..n {
            pres = pres.max(net_out(relay, k).abs());
        }
    }
    let mut comp = 0.0f64;
    let mut slack_price = 0.0f64;
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let slack = inst.capacity.get(i, j) - sol.link_load(i, j);
            pres = pres.max(-slack);
            let mu = sol.mu.get(i, j);
            dres = dres.max(-mu);
            comp = comp.max((mu * slack).abs());
            if slack >= SLACK_ROW_THRESHOLD {
                slack_price = slack_price.max(mu.abs());
            }
        }
    }
    let utility: f64 = (0..kc).map(|k| w[k] * sol.t[k]).sum();
    pres = pres.max((utility - sol.phi).abs());

    // Dual function: maximise the Lagrangian over r in [0,1], a >= 0, t >= 0.
    let mut dual_value = 0.0;
    for (k, spec) in inst.commodities.iter().enumerate() {
        let mut potential = vec![0.0; n];
        let mut theta_sum = 0.0;
        for (s, &src) in spec.sources.iter().enumerate() {
            let (lam, th) = (sol.lambda[k][s], sol.theta[k][s]);
            dres = dres.max(-lam).max(-th).max(th - lam);
            potential[src] = lam;
            theta_sum += th;
        }
        dres = dres.max(w[k] - theta_sum);
        for relay in inst.num_task..n {
            potential[relay] = -sol.nu[k][relay - inst.num_task];
        }
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let reduced = potential[i] - potential[j] - sol.mu.get(i, j);
                dual_value += reduced.max(0.0);
            }
        }
    }
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            dual_value += sol.mu.get(i, j) * inst.capacity.get(i, j);
        }
    }
    let gap = (dual_value - sol.phi) / (1.0 + sol.phi.abs());
    let passes = pres <= VERIFY_TOL
        && dres <= VERIFY_TOL
        && comp <= VERIFY_TOL
        && slack_price <= VERIFY_TOL
        && gap.abs() <= VERIFY_TOL;
    VerificationReport {
        primal_residual: pres,
        dual_residual: dres,
        complementarity: comp,
        slack_row_price: slack_price,
        gap,
        dual_value,
        passes,
    }
}
