//! Homogeneous self-dual interior-point method with Mehrotra
//! predictor-corrector steps.
//!
//! The canonical LP is rewritten as `min c^T x, A x = b, 0 <= x, x_U <= u`
//! (slacks for inequalities, shifted or mirrored columns for bounds, split
//! columns for free variables) and embedded as
//!
//! ```text
//!     A x - b tau             = 0
//!     x_U + w - u tau         = 0
//!     A^T y + s - E v - c tau = 0
//!     -c^T x + b^T y - u^T v - kappa = 0
//! ```
//!
//! A strictly complementary solution with `tau > 0` yields the optimum;
//! `kappa > 0` yields a Farkas certificate of infeasibility or
//! unboundedness. Each Newton step is reduced to one set of normal
//! equations `A D A^T`, factored densely.

use log::{debug, trace};

use super::cholesky::Cholesky;
use super::{
    dot, Diagnostics, LpError, LpResult, LpSolver, LpStatus, SolverOptions, StandardFormLp,
};

/// Default in-repo LP engine.
#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPoint;

impl LpSolver for InteriorPoint {
    fn solve(&self, lp: &StandardFormLp, opts: &SolverOptions) -> Result<LpResult, LpError> {
        lp.validate()?;
        if !(opts.gap_tol > 0.0 && opts.feas_tol > 0.0 && opts.acceptable_tol > 0.0) {
            return Err(LpError::Malformed("tolerances must be positive".into()));
        }
        let internal = Internal::build(lp);
        let mut state = Hsd::new(&internal);
        state.run(&internal, lp, opts)
    }
}

#[derive(Debug, Clone, Copy)]
enum ColMap {
    /// `z = x[col] + lo`
    Shift {
        col: usize,
        lo: f64,
    },
    /// `z = hi - x[col]`
    Mirror {
        col: usize,
        hi: f64,
    },
    /// `z = x[pos] - x[neg]`
    Split {
        pos: usize,
        neg: usize,
    },
    Fixed {
        value: f64,
    },
}

struct Internal {
    m: usize,
    n: usize,
    m_ineq: usize,
    /// Column-major storage of the internal constraint matrix.
    cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    c: Vec<f64>,
    /// Columns carrying a finite upper bound, with that bound.
    bounded: Vec<(usize, f64)>,
    /// `bound_slot[j]` indexes `bounded` for column `j`.
    bound_slot: Vec<Option<usize>>,
    map: Vec<ColMap>,
}

impl Internal {
    fn build(lp: &StandardFormLp) -> Self {
        let n_orig = lp.num_vars();
        let m_ineq = lp.ineq.nrows();
        let m = m_ineq + lp.eq.nrows();

        // Original columns as (row, value) lists over the stacked rows.
        let mut orig_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_orig];
        for r in 0..m_ineq {
            for (j, v) in lp.ineq.row(r) {
                orig_cols[j].push((r, v));
            }
        }
        for r in 0..lp.eq.nrows() {
            for (j, v) in lp.eq.row(r) {
                orig_cols[j].push((m_ineq + r, v));
            }
        }

        let mut b: Vec<f64> = lp.ineq_rhs.iter().chain(&lp.eq_rhs).copied().collect();
        let mut cols = Vec::with_capacity(n_orig + m_ineq);
        let mut c = Vec::with_capacity(n_orig + m_ineq);
        let mut upper: Vec<f64> = Vec::with_capacity(n_orig + m_ineq);
        let mut map = Vec::with_capacity(n_orig);

        for (j, col) in orig_cols.into_iter().enumerate() {
            let (lo, hi, cj) = (lp.lower[j], lp.upper[j], lp.objective[j]);
            if lo == hi {
                for &(r, v) in &col {
                    b[r] -= v * lo;
                }
                map.push(ColMap::Fixed { value: lo });
            } else if lo.is_finite() {
                if lo != 0.0 {
                    for &(r, v) in &col {
                        b[r] -= v * lo;
                    }
                }
                map.push(ColMap::Shift {
                    col: cols.len(),
                    lo,
                });
                cols.push(col);
                c.push(-cj);
                upper.push(hi - lo);
            } else if hi.is_finite() {
                for &(r, v) in &col {
                    b[r] -= v * hi;
                }
                map.push(ColMap::Mirror {
                    col: cols.len(),
                    hi,
                });
                cols.push(col.iter().map(|&(r, v)| (r, -v)).collect());
                c.push(cj);
                upper.push(f64::INFINITY);
            } else {
                let pos = cols.len();
                map.push(ColMap::Split { pos, neg: pos + 1 });
                cols.push(col.clone());
                cols.push(col.iter().map(|&(r, v)| (r, -v)).collect());
                c.push(-cj);
                c.push(cj);
                upper.push(f64::INFINITY);
                upper.push(f64::INFINITY);
            }
        }
        for r in 0..m_ineq {
            cols.push(vec![(r, 1.0)]);
            c.push(0.0);
            upper.push(f64::INFINITY);
        }

        let n = cols.len();
        let mut bounded = Vec::new();
        let mut bound_slot = vec![None; n];
        for (j, &u) in upper.iter().enumerate() {
            if u.is_finite() {
                bound_slot[j] = Some(bounded.len());
                bounded.push((j, u));
            }
        }
        Self {
            m,
            n,
            m_ineq,
            cols,
            b,
            c,
            bounded,
            bound_slot,
            map,
        }
    }

    fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (col, &xj) in self.cols.iter().zip(x) {
            if xj != 0.0 {
                for &(r, v) in col {
                    out[r] += v * xj;
                }
            }
        }
        out
    }

    fn tmul(&self, y: &[f64]) -> Vec<f64> {
        self.cols
            .iter()
            .map(|col| col.iter().map(|&(r, v)| v * y[r]).sum())
            .collect()
    }

    /// Lower triangle of `A diag(d) A^T`, row-major.
    fn normal_matrix(&self, d: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m * m];
        for (col, &dj) in self.cols.iter().zip(d) {
            for (a, &(ra, va)) in col.iter().enumerate() {
                let scaled = dj * va;
                for &(rb, vb) in &col[..=a] {
                    let (hi, lo) = if ra >= rb { (ra, rb) } else { (rb, ra) };
                    out[hi * m + lo] += scaled * vb;
                }
            }
        }
        out
    }
}

/// Falls back to the best iterate seen when it meets the acceptable
/// tolerance; otherwise reports `fail`.
fn accept_best(
    best: Option<(Hsd, Measures, usize)>,
    p: &Internal,
    lp: &StandardFormLp,
    opts: &SolverOptions,
    fail: impl FnOnce() -> LpError,
) -> Result<LpResult, LpError> {
    if let Some((state, m, iter)) = best {
        let tol = opts.acceptable_tol;
        if m.pres <= tol && m.dres <= tol && m.gap <= tol {
            let result = state.extract(p, lp, iter);
            if result.gap <= tol {
                debug!(
                    "ipm accepted iterate {iter}: pres {:.2e} dres {:.2e} gap {:.2e}",
                    m.pres, m.dres, m.gap
                );
                return Ok(result);
            }
        }
    }
    Err(fail())
}

/// Symmetric product using only the stored lower triangle.
fn sym_lower_mul(m: usize, a: &[f64], x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m];
    for i in 0..m {
        let row = &a[i * m..i * m + i];
        let mut s = a[i * m + i] * x[i];
        for (j, &aij) in row.iter().enumerate() {
            s += aij * x[j];
            out[j] += aij * x[i];
        }
        out[i] += s;
    }
    out
}

#[derive(Clone)]
struct Hsd {
    x: Vec<f64>,
    w: Vec<f64>,
    s: Vec<f64>,
    v: Vec<f64>,
    y: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Residuals {
    p: Vec<f64>,
    u: Vec<f64>,
    d: Vec<f64>,
    g: f64,
}

/// Per-iteration quantities shared by the predictor and corrector solves.
struct Factored {
    dinv_d: Vec<f64>,
    chol: Cholesky,
    normal: Vec<f64>,
    dx_q: Vec<f64>,
    dv_q: Vec<f64>,
    q: Vec<f64>,
    denom: f64,
}

struct Direction {
    dx: Vec<f64>,
    dw: Vec<f64>,
    ds: Vec<f64>,
    dv: Vec<f64>,
    dy: Vec<f64>,
    dtau: f64,
    dkappa: f64,
}

#[derive(Clone, Copy)]
struct Measures {
    pres: f64,
    dres: f64,
    gap: f64,
    mu: f64,
}

const STEP_FRACTION: f64 = 0.995;

const MAX_REFINEMENTS: usize = 10;

const PRIMAL_CORRECTIONS: usize = 2;

/// Iterations without halving the best convergence score before the run
/// is declared stagnant.
const STAGNATION_ITERS: usize = 8;

impl Hsd {
    fn new(p: &Internal) -> Self {
        Self {
            x: vec![1.0; p.n],
            w: vec![1.0; p.bounded.len()],
            s: vec![1.0; p.n],
            v: vec![1.0; p.bounded.len()],
            y: vec![0.0; p.m],
            tau: 1.0,
            kappa: 1.0,
        }
    }

    fn complementarity(&self) -> f64 {
        (dot(&self.x, &self.s) + dot(&self.w, &self.v) + self.tau * self.kappa)
            / (self.x.len() + self.w.len() + 1) as f64
    }

    fn residuals(&self, p: &Internal) -> Residuals {
        let ax = p.mul(&self.x);
        let rp = p.b.iter().zip(&ax).map(|(b, a)| b * self.tau - a).collect();
        let ru = p
            .bounded
            .iter()
            .zip(&self.w)
            .map(|(&(j, u), w)| u * self.tau - self.x[j] - w)
            .collect();
        let aty = p.tmul(&self.y);
        let mut rd: Vec<f64> = (0..p.n)
            .map(|j| p.c[j] * self.tau - aty[j] - self.s[j])
            .collect();
        for (t, &(j, _)) in p.bounded.iter().enumerate() {
            rd[j] += self.v[t];
        }
        let uv: f64 = p
            .bounded
            .iter()
            .zip(&self.v)
            .map(|(&(_, u), v)| u * v)
            .sum();
        let rg = -(dot(&p.c, &self.x) - dot(&p.b, &self.y) + uv + self.kappa);
        Residuals {
            p: rp,
            u: ru,
            d: rd,
            g: rg,
        }
    }

    fn run(
        &mut self,
        p: &Internal,
        lp: &StandardFormLp,
        opts: &SolverOptions,
    ) -> Result<LpResult, LpError> {
        let mut last = Measures {
            pres: f64::INFINITY,
            dres: f64::INFINITY,
            gap: f64::INFINITY,
            mu: f64::INFINITY,
        };
        let mut stalls = 0;
        let mut best: Option<(Hsd, Measures, usize)> = None;
        let mut best_score = f64::INFINITY;
        let mut last_progress = 0;

        for iter in 0..=opts.max_iters {
            let res = self.residuals(p);
            last = self.measures(p, &res);
            let Measures {
                pres,
                dres,
                gap,
                mu,
            } = last;
            trace!(
                "ipm {iter}: pres {pres:.2e} dres {dres:.2e} gap {gap:.2e} mu {mu:.2e} tau {:.2e} kappa {:.2e}",
                self.tau,
                self.kappa
            );

            if pres <= opts.feas_tol && dres <= opts.feas_tol && gap <= opts.gap_tol {
                let result = self.extract(p, lp, iter);
                if result.gap <= opts.gap_tol {
                    debug!("ipm converged in {iter} iterations, gap {:.2e}", result.gap);
                    return Ok(result);
                }
            }
            if let Some(status) = self.certificate(p, &res, opts) {
                debug!("ipm detected {status} after {iter} iterations");
                return Ok(self.certificate_result(p, lp, status, iter));
            }
            let score = pres.max(dres).max(gap);
            if score < best_score {
                if score < 0.5 * best_score {
                    last_progress = iter;
                }
                best_score = score;
                best = Some((self.clone(), last, iter));
            }
            if iter == opts.max_iters {
                break;
            }
            if iter - last_progress >= STAGNATION_ITERS {
                debug!("ipm stagnant after {iter} iterations");
                return accept_best(best, p, lp, opts, || {
                    LpError::NumericalBreakdown(self.diagnostics(iter, &last))
                });
            }

            let factored = match self.factor(p) {
                Some(f) => f,
                None => {
                    return accept_best(best, p, lp, opts, || {
                        LpError::NumericalBreakdown(self.diagnostics(iter, &last))
                    })
                }
            };

            // Predictor.
            let r_xs: Vec<f64> = self.x.iter().zip(&self.s).map(|(x, s)| -x * s).collect();
            let r_wv: Vec<f64> = self.w.iter().zip(&self.v).map(|(w, v)| -w * v).collect();
            let r_tk = -self.tau * self.kappa;
            let aff = self.direction(p, &factored, &res, 1.0, &r_xs, &r_wv, r_tk);
            let alpha_aff = self.max_step(&aff).min(1.0);
            let mu_aff = self.complementarity_after(&aff, alpha_aff);
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // Corrector.
            let target = sigma * mu;
            let r_xs: Vec<f64> = (0..p.n)
                .map(|j| target - self.x[j] * self.s[j] - aff.dx[j] * aff.ds[j])
                .collect();
            let r_wv: Vec<f64> = (0..self.w.len())
                .map(|t| target - self.w[t] * self.v[t] - aff.dw[t] * aff.dv[t])
                .collect();
            let r_tk = target - self.tau * self.kappa - aff.dtau * aff.dkappa;
            let dir = self.direction(p, &factored, &res, 1.0 - sigma, &r_xs, &r_wv, r_tk);
            let alpha = (STEP_FRACTION * self.max_step(&dir)).min(1.0);
            if !alpha.is_finite() || alpha < 1e-12 {
                stalls += 1;
                if stalls >= 3 {
                    return accept_best(best, p, lp, opts, || {
                        LpError::NumericalBreakdown(self.diagnostics(iter, &last))
                    });
                }
                continue;
            }
            self.apply(&dir, alpha);
            if !self.is_finite() {
                return accept_best(best, p, lp, opts, || {
                    LpError::NumericalBreakdown(self.diagnostics(iter, &last))
                });
            }
        }
        accept_best(best, p, lp, opts, || {
            LpError::IterationLimit(self.diagnostics(opts.max_iters, &last))
        })
    }

    fn measures(&self, p: &Internal, res: &Residuals) -> Measures {
        let inf_norm = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let bnorm = inf_norm(&p.b);
        let cnorm = inf_norm(&p.c);
        let unorm = p.bounded.iter().fold(0.0f64, |a, &(_, u)| a.max(u));
        let tau = self.tau;
        let pres = inf_norm(&res.p).max(inf_norm(&res.u)) / tau / (1.0 + bnorm.max(unorm));
        let dres = inf_norm(&res.d) / tau / (1.0 + cnorm);
        let uv: f64 = p
            .bounded
            .iter()
            .zip(&self.v)
            .map(|(&(_, u), v)| u * v)
            .sum();
        let pobj = dot(&p.c, &self.x) / tau;
        let dobj = (dot(&p.b, &self.y) - uv) / tau;
        Measures {
            pres,
            dres,
            gap: (pobj - dobj).abs() / (1.0 + pobj.abs()),
            mu: self.complementarity(),
        }
    }

    fn diagnostics(&self, iterations: usize, m: &Measures) -> Diagnostics {
        Diagnostics {
            iterations,
            primal_residual: m.pres,
            dual_residual: m.dres,
            gap: m.gap,
            mu: m.mu,
            tau: self.tau,
            kappa: self.kappa,
        }
    }

    fn is_finite(&self) -> bool {
        let ok = |v: &[f64]| v.iter().all(|x| x.is_finite());
        ok(&self.x)
            && ok(&self.w)
            && ok(&self.s)
            && ok(&self.v)
            && ok(&self.y)
            && self.tau.is_finite()
            && self.kappa.is_finite()
    }

    fn factor(&self, p: &Internal) -> Option<Factored> {
        let mut dinv = vec![0.0; p.n];
        for j in 0..p.n {
            dinv[j] = self.s[j] / self.x[j];
        }
        for (t, &(j, _)) in p.bounded.iter().enumerate() {
            dinv[j] += self.v[t] / self.w[t];
        }
        let d: Vec<f64> = dinv.iter().map(|v| 1.0 / v).collect();
        if d.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let normal = p.normal_matrix(&d);
        let chol = Cholesky::factor(p.m, normal.clone());
        if chol.dropped() > 0 {
            trace!("normal equations: {} dependent rows", chol.dropped());
        }

        // c_hat = c - E W^-1 V u
        let mut c_hat = p.c.clone();
        for (t, &(j, u)) in p.bounded.iter().enumerate() {
            c_hat[j] -= self.v[t] / self.w[t] * u;
        }
        let dc: Vec<f64> = d.iter().zip(&c_hat).map(|(d, c)| d * c).collect();
        let mut rhs = p.mul(&dc);
        for (r, b) in rhs.iter_mut().zip(&p.b) {
            *r += b;
        }
        let q = solve_refined(&chol, &normal, &rhs);
        let atq = p.tmul(&q);
        let dx_q: Vec<f64> = (0..p.n).map(|j| d[j] * (atq[j] - c_hat[j])).collect();
        let dv_q: Vec<f64> = p
            .bounded
            .iter()
            .enumerate()
            .map(|(t, &(j, u))| self.v[t] / self.w[t] * (dx_q[j] - u))
            .collect();
        let uv: f64 = p.bounded.iter().zip(&dv_q).map(|(&(_, u), v)| u * v).sum();
        let denom = dot(&p.c, &dx_q) - dot(&p.b, &q) + uv - self.kappa / self.tau;
        if !denom.is_finite() || denom == 0.0 {
            return None;
        }
        Some(Factored {
            dinv_d: d,
            chol,
            normal,
            dx_q,
            dv_q,
            q,
            denom,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        p: &Internal,
        f: &Factored,
        res: &Residuals,
        eta: f64,
        r_xs: &[f64],
        r_wv: &[f64],
        r_tk: f64,
    ) -> Direction {
        let d = &f.dinv_d;
        // f = eta r_D - X^-1 r_xs + E W^-1 (r_wv - eta V r_U)
        let mut fvec: Vec<f64> = (0..p.n)
            .map(|j| eta * res.d[j] - r_xs[j] / self.x[j])
            .collect();
        let wv_part: Vec<f64> = (0..p.bounded.len())
            .map(|t| (r_wv[t] - eta * self.v[t] * res.u[t]) / self.w[t])
            .collect();
        for (t, &(j, _)) in p.bounded.iter().enumerate() {
            fvec[j] += wv_part[t];
        }
        let df: Vec<f64> = d.iter().zip(&fvec).map(|(d, f)| d * f).collect();
        let mut rhs = p.mul(&df);
        for (r, rp) in rhs.iter_mut().zip(&res.p) {
            *r += eta * rp;
        }
        let pvec = solve_refined(&f.chol, &f.normal, &rhs);
        let atp = p.tmul(&pvec);
        let dx_p: Vec<f64> = (0..p.n).map(|j| d[j] * (atp[j] - fvec[j])).collect();
        let dv_p: Vec<f64> = p
            .bounded
            .iter()
            .enumerate()
            .map(|(t, &(j, _))| wv_part[t] + self.v[t] / self.w[t] * dx_p[j])
            .collect();
        let uv: f64 = p.bounded.iter().zip(&dv_p).map(|(&(_, u), v)| u * v).sum();
        let num = eta * res.g - dot(&p.c, &dx_p) + dot(&p.b, &pvec) - uv - r_tk / self.tau;
        let dtau = num / f.denom;

        let mut dy: Vec<f64> = pvec.iter().zip(&f.q).map(|(a, b)| a + b * dtau).collect();
        let mut dx: Vec<f64> = dx_p
            .iter()
            .zip(&f.dx_q)
            .map(|(a, b)| a + b * dtau)
            .collect();
        let mut dv: Vec<f64> = dv_p
            .iter()
            .zip(&f.dv_q)
            .map(|(a, b)| a + b * dtau)
            .collect();

        // Forming dx = D (A^T dy - f) cancels badly once D spans many
        // decades. Correct the primal equation with steps along D A^T,
        // which leave the dual and complementarity equations intact.
        let target: Vec<f64> = (0..p.m).map(|i| eta * res.p[i] + p.b[i] * dtau).collect();
        let scale = target
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()))
            .max(1e-300);
        for _ in 0..PRIMAL_CORRECTIONS {
            let adx = p.mul(&dx);
            let err: Vec<f64> = target.iter().zip(&adx).map(|(t, a)| t - a).collect();
            if err.iter().all(|e| e.abs() <= 1e-15 * scale) {
                break;
            }
            let dyc = solve_refined(&f.chol, &f.normal, &err);
            let atc = p.tmul(&dyc);
            for j in 0..p.n {
                dx[j] += d[j] * atc[j];
            }
            for (t, &(j, _)) in p.bounded.iter().enumerate() {
                dv[t] += self.v[t] / self.w[t] * d[j] * atc[j];
            }
            for (a, b) in dy.iter_mut().zip(&dyc) {
                *a += b;
            }
        }
        let ds: Vec<f64> = (0..p.n)
            .map(|j| (r_xs[j] - self.s[j] * dx[j]) / self.x[j])
            .collect();
        let dw: Vec<f64> = p
            .bounded
            .iter()
            .enumerate()
            .map(|(t, &(j, u))| eta * res.u[t] - dx[j] + u * dtau)
            .collect();
        let dkappa = (r_tk - self.kappa * dtau) / self.tau;
        Direction {
            dx,
            dw,
            ds,
            dv,
            dy,
            dtau,
            dkappa,
        }
    }

    fn max_step(&self, d: &Direction) -> f64 {
        let mut alpha = f64::INFINITY;
        let mut limit = |val: f64, dval: f64| {
            if dval < 0.0 {
                alpha = alpha.min(-val / dval);
            }
        };
        for (x, dx) in self.x.iter().zip(&d.dx) {
            limit(*x, *dx);
        }
        for (s, ds) in self.s.iter().zip(&d.ds) {
            limit(*s, *ds);
        }
        for (w, dw) in self.w.iter().zip(&d.dw) {
            limit(*w, *dw);
        }
        for (v, dv) in self.v.iter().zip(&d.dv) {
            limit(*v, *dv);
        }
        limit(self.tau, d.dtau);
        limit(self.kappa, d.dkappa);
        alpha
    }

    fn complementarity_after(&self, d: &Direction, a: f64) -> f64 {
        let xs: f64 = (0..self.x.len())
            .map(|j| (self.x[j] + a * d.dx[j]) * (self.s[j] + a * d.ds[j]))
            .sum();
        let wv: f64 = (0..self.w.len())
            .map(|t| (self.w[t] + a * d.dw[t]) * (self.v[t] + a * d.dv[t]))
            .sum();
        let tk = (self.tau + a * d.dtau) * (self.kappa + a * d.dkappa);
        (xs + wv + tk) / (self.x.len() + self.w.len() + 1) as f64
    }

    fn apply(&mut self, d: &Direction, a: f64) {
        let axpy = |v: &mut [f64], dv: &[f64]| {
            for (x, dx) in v.iter_mut().zip(dv) {
                *x += a * dx;
            }
        };
        axpy(&mut self.x, &d.dx);
        axpy(&mut self.w, &d.dw);
        axpy(&mut self.s, &d.ds);
        axpy(&mut self.v, &d.dv);
        axpy(&mut self.y, &d.dy);
        self.tau += a * d.dtau;
        self.kappa += a * d.dkappa;
    }

    /// Farkas certificates, normalised by the objective they prove.
    fn certificate(&self, p: &Internal, res: &Residuals, opts: &SolverOptions) -> Option<LpStatus> {
        let tol = opts.feas_tol.max(1e-10);
        // Primal infeasible: A^T y - E v <= 0 and b^T y - u^T v > 0.
        let uv: f64 = p
            .bounded
            .iter()
            .zip(&self.v)
            .map(|(&(_, u), v)| u * v)
            .sum();
        let by = dot(&p.b, &self.y) - uv;
        if by > 0.0 && self.tau < self.kappa {
            // A^T y + s - E v = c tau - r_D
            let ray = (0..p.n)
                .map(|j| (p.c[j] * self.tau - res.d[j]).abs())
                .fold(0.0f64, f64::max);
            if ray <= tol * by {
                return Some(LpStatus::Infeasible);
            }
        }
        // Dual infeasible: A x = 0, x_U = 0, x >= 0 and c^T x < 0.
        let cx = dot(&p.c, &self.x);
        if cx < 0.0 && self.tau < self.kappa {
            let ax = res
                .p
                .iter()
                .zip(&p.b)
                .map(|(rp, b)| (b * self.tau - rp).abs())
                .fold(0.0f64, f64::max);
            let xu = p
                .bounded
                .iter()
                .zip(&res.u)
                .map(|(&(_, u), ru)| (u * self.tau - ru).abs())
                .fold(0.0f64, f64::max);
            if ax.max(xu) <= tol * -cx {
                return Some(LpStatus::Unbounded);
            }
        }
        None
    }

    fn certificate_result(
        &self,
        p: &Internal,
        lp: &StandardFormLp,
        status: LpStatus,
        iterations: usize,
    ) -> LpResult {
        let n = lp.num_vars();
        let scale = match status {
            LpStatus::Infeasible => {
                let uv: f64 = p
                    .bounded
                    .iter()
                    .zip(&self.v)
                    .map(|(&(_, u), v)| u * v)
                    .sum();
                dot(&p.b, &self.y) - uv
            }
            _ => -dot(&p.c, &self.x),
        };
        let (ineq_duals, eq_duals) = if status == LpStatus::Infeasible {
            let y: Vec<f64> = self.y.iter().map(|v| -v / scale).collect();
            (y[..p.m_ineq].to_vec(), y[p.m_ineq..].to_vec())
        } else {
            (vec![0.0; p.m_ineq], vec![0.0; p.m - p.m_ineq])
        };
        let x = if status == LpStatus::Unbounded {
            self.map_primal(
                p,
                &self.x.iter().map(|v| v / scale).collect::<Vec<_>>(),
                true,
            )
        } else {
            vec![0.0; n]
        };
        LpResult {
            status,
            x,
            ineq_duals,
            eq_duals,
            lower_duals: vec![0.0; n],
            upper_duals: vec![0.0; n],
            objective: 0.0,
            dual_objective: 0.0,
            gap: 0.0,
            iterations,
        }
    }

    /// `ray` drops the bound offsets, giving a direction rather than a point.
    fn map_primal(&self, p: &Internal, x: &[f64], ray: bool) -> Vec<f64> {
        let off = |v: f64| if ray { 0.0 } else { v };
        p.map
            .iter()
            .map(|m| match *m {
                ColMap::Shift { col, lo } => x[col] + off(lo),
                ColMap::Mirror { col, hi } => off(hi) - x[col],
                ColMap::Split { pos, neg } => x[pos] - x[neg],
                ColMap::Fixed { value } => off(value),
            })
            .collect()
    }

    fn extract(&self, p: &Internal, lp: &StandardFormLp, iterations: usize) -> LpResult {
        let inv = 1.0 / self.tau;
        let x: Vec<f64> = self.x.iter().map(|v| v * inv).collect();
        let s: Vec<f64> = self.s.iter().map(|v| v * inv).collect();
        let v: Vec<f64> = self.v.iter().map(|v| v * inv).collect();
        let y: Vec<f64> = self.y.iter().map(|v| -v * inv).collect();

        let z = self.map_primal(p, &x, false);
        let n = lp.num_vars();
        let mut lower_duals = vec![0.0; n];
        let mut upper_duals = vec![0.0; n];
        let ineq_duals = y[..p.m_ineq].to_vec();
        let eq_duals = y[p.m_ineq..].to_vec();

        let mut fixed_any = false;
        for (j, m) in p.map.iter().enumerate() {
            match *m {
                ColMap::Shift { col, .. } => {
                    lower_duals[j] = s[col];
                    if let Some(t) = p.bound_slot[col] {
                        upper_duals[j] = v[t];
                    }
                }
                ColMap::Mirror { col, .. } => upper_duals[j] = s[col],
                ColMap::Split { .. } => {}
                ColMap::Fixed { .. } => fixed_any = true,
            }
        }
        if fixed_any {
            // Fixed columns never entered the iteration; their bound
            // multipliers absorb whatever stationarity requires.
            let aty = lp.ineq.tmul_vec(&ineq_duals);
            let gtn = lp.eq.tmul_vec(&eq_duals);
            for (j, m) in p.map.iter().enumerate() {
                if let ColMap::Fixed { .. } = m {
                    let reduced = lp.objective[j] - aty[j] - gtn[j];
                    upper_duals[j] = reduced.max(0.0);
                    lower_duals[j] = (-reduced).max(0.0);
                }
            }
        }

        let objective = lp.objective_value(&z);
        let dual_objective =
            super::dual_objective(lp, &ineq_duals, &eq_duals, &lower_duals, &upper_duals);
        LpResult {
            status: LpStatus::Optimal,
            x: z,
            ineq_duals,
            eq_duals,
            lower_duals,
            upper_duals,
            objective,
            dual_objective,
            gap: (objective - dual_objective).abs() / (1.0 + objective.abs()),
            iterations,
        }
    }
}

fn solve_refined(chol: &Cholesky, normal: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = rhs.len();
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let target = 10.0 * f64::EPSILON * norm(rhs);
    let mut sol = rhs.to_vec();
    chol.solve_in_place(&mut sol);
    let residual = |sol: &[f64]| -> Vec<f64> {
        let applied = sym_lower_mul(m, normal, sol);
        rhs.iter().zip(&applied).map(|(r, a)| r - a).collect()
    };
    let mut res = residual(&sol);
    let mut res_norm = norm(&res);
    for _ in 0..MAX_REFINEMENTS {
        if res_norm <= target {
            break;
        }
        let mut corr = res;
        chol.solve_in_place(&mut corr);
        let trial: Vec<f64> = sol.iter().zip(&corr).map(|(s, c)| s + c).collect();
        let trial_res = residual(&trial);
        let trial_norm = norm(&trial_res);
        if !(trial_norm < res_norm) {
            break;
        }
        sol = trial;
        res = trial_res;
        res_norm = trial_norm;
    }
    sol
}
