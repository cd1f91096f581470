//! Linear programs in a canonical maximisation form, solved to a verified
//! primal-dual pair.
//!
//! ```text
//!     maximize    c^T z
//!     subject to  A z <= b      (duals y  >= 0)
//!                 G z  = h      (duals nu free)
//!                 lo <= z <= hi (duals zl, zu >= 0)
//! ```
//!
//! Dual multipliers follow the Lagrangian
//! `c^T z - y^T (A z - b) - nu^T (G z - h) + zl^T (z - lo) + zu^T (hi - z)`,
//! so at an optimum `c - A^T y - G^T nu + zl - zu = 0` and each `y_i` is the
//! rate of change of the optimal value with respect to `b_i`.

mod cholesky;
mod external;
mod ipm;
mod sparse;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use external::{ProcessSolver, SolveRequest};
pub use ipm::InteriorPoint;
pub use sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardFormLp {
    pub objective: Vec<f64>,
    pub ineq: SparseMatrix,
    pub ineq_rhs: Vec<f64>,
    pub eq: SparseMatrix,
    pub eq_rhs: Vec<f64>,
    /// `-inf` allowed; serialised as `null`.
    #[serde(with = "lower_bounds")]
    pub lower: Vec<f64>,
    /// `+inf` allowed; serialised as `null`.
    #[serde(with = "upper_bounds")]
    pub upper: Vec<f64>,
}

impl StandardFormLp {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        let bad = |msg: String| Err(LpError::Malformed(msg));
        if self.ineq.ncols() != n || self.eq.ncols() != n {
            return bad(format!(
                "constraint matrices have {} / {} columns, expected {n}",
                self.ineq.ncols(),
                self.eq.ncols()
            ));
        }
        if self.ineq.nrows() != self.ineq_rhs.len() {
            return bad("inequality block and rhs differ in length".into());
        }
        if self.eq.nrows() != self.eq_rhs.len() {
            return bad("equality block and rhs differ in length".into());
        }
        if self.lower.len() != n || self.upper.len() != n {
            return bad("bound vectors differ in length from the objective".into());
        }
        if !self.ineq.is_consistent() || !self.eq.is_consistent() {
            return bad("constraint matrix storage is inconsistent".into());
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.objective) || !finite(&self.ineq_rhs) || !finite(&self.eq_rhs) {
            return bad("non-finite objective or right-hand side".into());
        }
        for (j, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return bad(format!("variable {j} has invalid bounds [{lo}, {hi}]"));
            }
            if lo > hi {
                return bad(format!("variable {j} has empty bounds [{lo}, {hi}]"));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, z: &[f64]) -> f64 {
        dot(&self.objective, z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl std::fmt::Display for LpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub ineq_duals: Vec<f64>,
    pub eq_duals: Vec<f64>,
    pub lower_duals: Vec<f64>,
    pub upper_duals: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    /// `|primal - dual| / (1 + |primal|)`.
    pub gap: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Relative duality gap required for an optimal status.
    pub gap_tol: f64,
    /// Relative primal and dual residual required for an optimal status.
    pub feas_tol: f64,
    /// Looser level at which the best iterate is returned when the run
    /// stagnates or breaks down before reaching `gap_tol` and `feas_tol`.
    pub acceptable_tol: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            feas_tol: 1e-9,
            acceptable_tol: 1e-7,
            max_iters: 200,
        }
    }
}

impl SolverOptions {
    /// Tight settings for difference-quotient oracles, where solver noise is
    /// amplified by `1/h`.
    pub fn precise() -> Self {
        Self {
            gap_tol: 1e-12,
            feas_tol: 1e-12,
            acceptable_tol: 1e-9,
            max_iters: 300,
        }
    }
}

/// Residual snapshot attached to solver failures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub mu: f64,
    pub tau: f64,
    pub kappa: f64,
}

impl std::fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "iter {} pres {:.3e} dres {:.3e} gap {:.3e} mu {:.3e} tau {:.3e} kappa {:.3e}",
            self.iterations,
            self.primal_residual,
            self.dual_residual,
            self.gap,
            self.mu,
            self.tau,
            self.kappa
        )
    }
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed LP: {0}")]
    Malformed(String),
    #[error("iteration limit reached ({0})")]
    IterationLimit(Diagnostics),
    #[error("numerical breakdown ({0})")]
    NumericalBreakdown(Diagnostics),
    #[error("external solver: {0}")]
    External(String),
}

/// Pluggable solver boundary. The in-repo [`InteriorPoint`] is the default.
pub trait LpSolver: Send + Sync {
    fn solve(&self, lp: &StandardFormLp, opts: &SolverOptions) -> Result<LpResult, LpError>;
}

/// Solves with the default interior-point engine.
pub fn solve(lp: &StandardFormLp, opts: &SolverOptions) -> Result<LpResult, LpError> {
    InteriorPoint.solve(lp, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// Largest violation of `A z <= b`, `G z = h` or the bounds.
    pub primal_residual: f64,
    /// Largest stationarity or dual-sign violation.
    pub dual_residual: f64,
    /// Largest product of a multiplier and its constraint slack.
    pub complementarity: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `(dual - primal) / (1 + |primal|)`; positive when `z` is suboptimal.
    pub gap: f64,
}

impl KktReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.primal_residual <= tol
            && self.dual_residual <= tol
            && self.complementarity <= tol
            && self.gap.abs() <= tol
    }
}

/// Recomputes all optimality conditions of `result` against `lp` from
/// scratch. Pure; never fails.
pub fn check_kkt(lp: &StandardFormLp, result: &LpResult) -> KktReport {
    let z = &result.x;
    let y = &result.ineq_duals;
    let nu = &result.eq_duals;
    let zl = &result.lower_duals;
    let zu = &result.upper_duals;

    let az = lp.ineq.mul_vec(z);
    let gz = lp.eq.mul_vec(z);
    let mut pres = 0.0f64;
    for (v, b) in az.iter().zip(&lp.ineq_rhs) {
        pres = pres.max(v - b);
    }
    for (v, h) in gz.iter().zip(&lp.eq_rhs) {
        pres = pres.max((v - h).abs());
    }
    for j in 0..z.len() {
        pres = pres.max(lp.lower[j] - z[j]).max(z[j] - lp.upper[j]);
    }

    let aty = lp.ineq.tmul_vec(y);
    let gtn = lp.eq.tmul_vec(nu);
    let mut dres = 0.0f64;
    for j in 0..z.len() {
        let stat = lp.objective[j] - aty[j] - gtn[j] + zl[j] - zu[j];
        dres = dres.max(stat.abs()).max(-zl[j]).max(-zu[j]);
        // multipliers on infinite bounds must vanish
        if lp.lower[j] == f64::NEG_INFINITY {
            dres = dres.max(zl[j].abs());
        }
        if lp.upper[j] == f64::INFINITY {
            dres = dres.max(zu[j].abs());
        }
    }
    for &yi in y {
        dres = dres.max(-yi);
    }

    let mut comp = 0.0f64;
    for (i, &yi) in y.iter().enumerate() {
        comp = comp.max((yi * (lp.ineq_rhs[i] - az[i])).abs());
    }
    for j in 0..z.len() {
        if lp.lower[j].is_finite() {
            comp = comp.max((zl[j] * (z[j] - lp.lower[j])).abs());
        }
        if lp.upper[j].is_finite() {
            comp = comp.max((zu[j] * (lp.upper[j] - z[j])).abs());
        }
    }

    let primal_objective = lp.objective_value(z);
    let dual_objective = dual_objective(lp, y, nu, zl, zu);
    KktReport {
        primal_residual: pres,
        dual_residual: dres,
        complementarity: comp,
        primal_objective,
        dual_objective,
        gap: (dual_objective - primal_objective) / (1.0 + primal_objective.abs()),
    }
}

pub(crate) fn dual_objective(
    lp: &StandardFormLp,
    y: &[f64],
    nu: &[f64],
    zl: &[f64],
    zu: &[f64],
) -> f64 {
    let mut d = dot(&lp.ineq_rhs, y) + dot(&lp.eq_rhs, nu);
    for j in 0..lp.num_vars() {
        if lp.lower[j].is_finite() {
            d -= lp.lower[j] * zl[j];
        }
        if lp.upper[j].is_finite() {
            d += lp.upper[j] * zu[j];
        }
    }
    d
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

mod lower_bounds {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let opt: Vec<Option<f64>> = v.iter().map(|&x| x.is_finite().then_some(x)).collect();
        opt.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let opt = Vec::<Option<f64>>::deserialize(d)?;
        Ok(opt
            .into_iter()
            .map(|x| x.unwrap_or(f64::NEG_INFINITY))
            .collect())
    }
}

mod upper_bounds {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let opt: Vec<Option<f64>> = v.iter().map(|&x| x.is_finite().then_some(x)).collect();
        opt.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let opt = Vec::<Option<f64>>::deserialize(d)?;
        Ok(opt
            .into_iter()
            .map(|x| x.unwrap_or(f64::INFINITY))
            .collect())
    }
}
