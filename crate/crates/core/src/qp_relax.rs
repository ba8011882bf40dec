//! Continuous relaxation of the model over the box `[lo, hi]`.
//!
//! Fixed variables (`lo == hi`) are eliminated; the rest is solved by an
//! operator-splitting ADMM on `½xᵀPx + qᵀx` s.t. `l ≤ Ax ≤ u` (box rows
//! included in `A`), followed by an equality-constrained solve on the
//! identified active set. The reported bound is a Lagrangian lower bound
//! evaluated at the returned primal/dual pair, so it never exceeds the true
//! relaxation optimum whatever the solver accuracy.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::convexify::QuadraticCost;
use crate::model::{LinearConstraint, QpModel, Relation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxSettings {
    pub max_iter: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_infeasible: f64,
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub check_every: usize,
    pub polish: bool,
    /// Primal residual accepted as feasible.
    pub feas_tol: f64,
    /// Scaled stationarity residual accepted as optimal.
    pub stat_tol: f64,
}

impl Default for RelaxSettings {
    fn default() -> Self {
        Self {
            max_iter: 4000,
            eps_abs: 1e-6,
            eps_rel: 1e-6,
            eps_infeasible: 1e-7,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            check_every: 25,
            polish: true,
            feas_tol: 1e-7,
            stat_tol: 1e-6,
        }
    }
}

pub struct RelaxationProblem<'a> {
    /// `None` for a pure feasibility problem.
    pub quad: Option<&'a QuadraticCost>,
    pub num_vars: usize,
    pub rows: &'a [LinearConstraint],
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub warm_start: Option<Vec<f64>>,
}

impl<'a> RelaxationProblem<'a> {
    /// The model's relaxation with every binary in `[0, 1]`.
    pub fn from_model(model: &'a QpModel) -> Self {
        let n = model.num_vars();
        Self {
            quad: Some(model.quadratic()),
            num_vars: n,
            rows: model.constraints(),
            lo: vec![0.0; n],
            hi: vec![1.0; n],
            warm_start: None,
        }
    }

    pub fn fix(&mut self, var: usize, value: f64) {
        self.lo[var] = value;
        self.hi[var] = value;
    }

    /// `xᵀQ̃x − dᵀx + constant` on the permutation part of `x`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.quad.map_or(0.0, |q| q.objective(&x[..q.dim()]))
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.num_vars];
        if let Some(q) = self.quad {
            let nx = q.dim();
            let qx = q.mul_vec(&x[..nx]);
            for j in 0..nx {
                g[j] = 2.0 * qx[j] - q.d()[j];
            }
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

/// Multipliers `λ` (nonnegative on `≤` rows) with
/// `min_{lo ≤ x ≤ hi} λᵀ(Ax − b) = gap > 0`, so no point of the box meets
/// every row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FarkasCertificate {
    pub multipliers: Vec<f64>,
    pub gap: f64,
}

impl FarkasCertificate {
    /// Recomputes the certificate gap from scratch.
    pub fn verify(&self, rows: &[LinearConstraint], lo: &[f64], hi: &[f64]) -> f64 {
        farkas_gap(rows, &self.multipliers, lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelaxationResult {
    pub status: RelaxStatus,
    pub x: Vec<f64>,
    /// Objective at `x`.
    pub objective: f64,
    /// Valid lower bound on every point of the relaxation.
    pub lower_bound: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub polished: bool,
    pub certificate: Option<FarkasCertificate>,
}

fn farkas_gap(rows: &[LinearConstraint], lambda: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut r = vec![0.0; lo.len()];
    let mut lb = 0.0;
    for (row, &l) in rows.iter().zip(lambda) {
        let l = if row.relation == Relation::Le {
            l.max(0.0)
        } else {
            l
        };
        if l == 0.0 {
            continue;
        }
        for &(j, a) in &row.terms {
            r[j] += l * a;
        }
        lb -= l * row.rhs;
    }
    lb + r
        .iter()
        .enumerate()
        .map(|(j, &rj)| (rj * lo[j]).min(rj * hi[j]))
        .sum::<f64>()
}

/// `f(x̂) − gᵀx̂ − λᵀb + Σ_j min(r_j lo_j, r_j hi_j)` with `r = g + Aᵀλ`.
fn lagrangian_bound(p: &RelaxationProblem, x: &[f64], lambda: &[f64]) -> f64 {
    let g = p.gradient(x);
    let mut r = g.clone();
    let mut value = p.objective(x) - g.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    for (row, &l) in p.rows.iter().zip(lambda) {
        let l = if row.relation == Relation::Le {
            l.max(0.0)
        } else {
            l
        };
        if l == 0.0 {
            continue;
        }
        for &(j, a) in &row.terms {
            r[j] += l * a;
        }
        value -= l * row.rhs;
    }
    value += r
        .iter()
        .enumerate()
        .map(|(j, &rj)| (rj * p.lo[j]).min(rj * p.hi[j]))
        .sum::<f64>();
    // floating-point slack on O(n²) sums
    value - 1e-9 * (1.0 + value.abs())
}

/// Problem after removing fixed variables.
struct Reduced {
    free: Vec<usize>,
    x_fixed: Vec<f64>,
    p: DMatrix<f64>,
    q: DVector<f64>,
    a: DMatrix<f64>,
    l: DVector<f64>,
    u: DVector<f64>,
    /// Model row index for each of the first `row_map.len()` rows of `a`;
    /// the remaining rows are the box.
    row_map: Vec<usize>,
    is_eq: Vec<bool>,
}

enum Reduction {
    Ready(Reduced),
    /// Some row has no free variable and is broken by the fixings.
    Broken(usize, f64),
}

fn reduce(pr: &RelaxationProblem) -> Reduction {
    let n = pr.num_vars;
    let free: Vec<usize> = (0..n).filter(|&j| pr.lo[j] < pr.hi[j]).collect();
    let mut col = vec![usize::MAX; n];
    for (c, &j) in free.iter().enumerate() {
        col[j] = c;
    }
    let x_fixed: Vec<f64> = (0..n)
        .map(|j| if pr.lo[j] == pr.hi[j] { pr.lo[j] } else { 0.0 })
        .collect();
    let nf = free.len();

    let mut p = DMatrix::zeros(nf, nf);
    let mut q = DVector::zeros(nf);
    if let Some(quad) = pr.quad {
        let nx = quad.dim();
        let qx = quad.mul_vec(&x_fixed[..nx]);
        for (a, &i) in free.iter().enumerate() {
            if i >= nx {
                continue;
            }
            q[a] = 2.0 * qx[i] - quad.d()[i];
            for (b, &j) in free.iter().enumerate() {
                if j < nx {
                    p[(a, b)] = 2.0 * quad.entry(i, j);
                }
            }
        }
    }

    let mut rows: Vec<(usize, Vec<(usize, f64)>, f64)> = Vec::new();
    for (r, row) in pr.rows.iter().enumerate() {
        let mut rhs = row.rhs;
        let mut terms = Vec::new();
        for &(j, a) in &row.terms {
            if col[j] == usize::MAX {
                rhs -= a * x_fixed[j];
            } else {
                terms.push((col[j], a));
            }
        }
        if terms.is_empty() {
            let excess = -rhs;
            let broken = match row.relation {
                Relation::Le => excess > 1e-9,
                Relation::Eq => excess.abs() > 1e-9,
            };
            if broken {
                return Reduction::Broken(r, excess.signum());
            }
            continue;
        }
        rows.push((r, terms, rhs));
    }
    let m = rows.len() + nf;
    let mut a = DMatrix::zeros(m, nf);
    let mut l = DVector::zeros(m);
    let mut u = DVector::zeros(m);
    let mut row_map = Vec::with_capacity(rows.len());
    let mut is_eq = Vec::with_capacity(m);
    for (i, (r, terms, rhs)) in rows.into_iter().enumerate() {
        for (c, v) in terms {
            a[(i, c)] += v;
        }
        let eq = pr.rows[r].relation == Relation::Eq;
        l[i] = if eq { rhs } else { f64::NEG_INFINITY };
        u[i] = rhs;
        row_map.push(r);
        is_eq.push(eq);
    }
    let off = row_map.len();
    for (c, &j) in free.iter().enumerate() {
        a[(off + c, c)] = 1.0;
        l[off + c] = pr.lo[j];
        u[off + c] = pr.hi[j];
        is_eq.push(false);
    }
    Reduction::Ready(Reduced {
        free,
        x_fixed,
        p,
        q,
        a,
        l,
        u,
        row_map,
        is_eq,
    })
}

impl Reduced {
    fn full_x(&self, xr: &DVector<f64>, lo: &[f64], hi: &[f64]) -> Vec<f64> {
        let mut x = self.x_fixed.clone();
        for (c, &j) in self.free.iter().enumerate() {
            x[j] = xr[c].clamp(lo[j], hi[j]);
        }
        x
    }

    /// Row multipliers in model indexing.
    fn full_lambda(&self, y: &DVector<f64>, nrows: usize) -> Vec<f64> {
        let mut lam = vec![0.0; nrows];
        for (i, &r) in self.row_map.iter().enumerate() {
            lam[r] = y[i];
        }
        lam
    }

    fn residuals(&self, x: &DVector<f64>, y: &DVector<f64>) -> (f64, f64, f64, f64) {
        let ax = &self.a * x;
        let mut prim: f64 = 0.0;
        for i in 0..ax.len() {
            let viol = (self.l[i] - ax[i]).max(ax[i] - self.u[i]).max(0.0);
            prim = prim.max(viol);
        }
        let px = &self.p * x;
        let aty = self.a.transpose() * y;
        let dual = (&px + &self.q + &aty).amax();
        let scale_p = ax.amax().max(finite_amax(&self.u)).max(1.0);
        let scale_d = px.amax().max(aty.amax()).max(self.q.amax()).max(1.0);
        (prim, dual, scale_p, scale_d)
    }
}

fn finite_amax(v: &DVector<f64>) -> f64 {
    v.iter()
        .filter(|x| x.is_finite())
        .fold(0.0, |m, x| m.max(x.abs()))
}

fn infeasible_result(
    p: &RelaxationProblem,
    lambda: Vec<f64>,
    gap: f64,
    iterations: usize,
) -> RelaxationResult {
    RelaxationResult {
        status: RelaxStatus::Infeasible,
        x: p.lo.clone(),
        objective: f64::INFINITY,
        lower_bound: f64::INFINITY,
        primal_residual: f64::INFINITY,
        dual_residual: 0.0,
        iterations,
        polished: false,
        certificate: Some(FarkasCertificate {
            multipliers: lambda,
            gap,
        }),
    }
}

/// Solves the relaxation; see the module docs for the method.
pub fn solve_relaxation(p: &RelaxationProblem, s: &RelaxSettings) -> RelaxationResult {
    let nrows = p.rows.len();
    let red = match reduce(p) {
        Reduction::Ready(r) => r,
        Reduction::Broken(r, sign) => {
            let mut lam = vec![0.0; nrows];
            lam[r] = sign;
            let gap = farkas_gap(p.rows, &lam, &p.lo, &p.hi);
            return infeasible_result(p, lam, gap, 0);
        }
    };
    let nf = red.free.len();
    if nf == 0 {
        let x = red.x_fixed.clone();
        let obj = p.objective(&x);
        return RelaxationResult {
            status: RelaxStatus::Optimal,
            objective: obj,
            lower_bound: obj,
            x,
            primal_residual: 0.0,
            dual_residual: 0.0,
            iterations: 0,
            polished: false,
            certificate: None,
        };
    }

    let m = red.a.nrows();
    let mut rho_base = s.rho;
    let rho_vec =
        |base: f64| DVector::from_fn(m, |i, _| if red.is_eq[i] { 1e3 * base } else { base });
    let mut rho = rho_vec(rho_base);
    let factor = |rho: &DVector<f64>| {
        let mut k = red.p.clone();
        for i in 0..nf {
            k[(i, i)] += s.sigma;
        }
        let scaled = DMatrix::from_fn(m, nf, |i, j| red.a[(i, j)] * rho[i]);
        k += red.a.transpose() * scaled;
        k.cholesky()
    };
    let Some(mut chol) = factor(&rho) else {
        return iteration_limit(p, &red, DVector::zeros(nf), DVector::zeros(m), 0);
    };

    let mut x = match &p.warm_start {
        Some(w) => DVector::from_fn(nf, |c, _| w[red.free[c]]),
        None => DVector::from_fn(nf, |c, _| 0.5 * (p.lo[red.free[c]] + p.hi[red.free[c]])),
    };
    let project = |v: &DVector<f64>| DVector::from_fn(m, |i, _| v[i].clamp(red.l[i], red.u[i]));
    let mut z = project(&(&red.a * &x));
    let mut y = DVector::zeros(m);
    let at = red.a.transpose();

    let mut best_polish: Option<RelaxationResult> = None;
    for it in 1..=s.max_iter {
        let y_prev = y.clone();
        let rhs = &x * s.sigma - &red.q + &at * (rho.component_mul(&z) - &y);
        let x_t = chol.solve(&rhs);
        let z_t = &red.a * &x_t;
        let x_new = &x_t * s.alpha + &x * (1.0 - s.alpha);
        let z_relax = &z_t * s.alpha + &z * (1.0 - s.alpha);
        let z_new = project(&(&z_relax + y.component_div(&rho)));
        y += rho.component_mul(&(&z_relax - &z_new));
        x = x_new;
        z = z_new;

        if it % s.check_every != 0 && it != s.max_iter {
            continue;
        }
        // infeasibility from the change in duals
        let dy = &y - &y_prev;
        let dy_norm = dy.amax();
        if dy_norm > 1e-12 {
            let atdy = (&at * &dy).amax();
            let mut support = 0.0;
            for i in 0..m {
                support += if dy[i] > 0.0 {
                    red.u[i] * dy[i]
                } else if dy[i] < 0.0 {
                    red.l[i] * dy[i]
                } else {
                    0.0
                };
            }
            if atdy <= s.eps_infeasible * dy_norm && support < -s.eps_infeasible * dy_norm {
                let lam = red.full_lambda(&dy, nrows);
                let gap = farkas_gap(p.rows, &lam, &p.lo, &p.hi);
                if gap > 1e-9 * lam.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1.0) {
                    return infeasible_result(p, lam, gap, it);
                }
            }
        }
        let (prim, dual, sp, sd) = red.residuals(&x, &y);
        let converged = prim <= s.eps_abs + s.eps_rel * sp && dual <= s.eps_abs + s.eps_rel * sd;
        if s.polish && (converged || it % (8 * s.check_every) == 0) {
            if let Some(res) = polish(p, &red, &x, &z, &y, s, it) {
                return res;
            }
        }
        if converged && !s.polish {
            return finish(p, &red, &x, &y, it, RelaxStatus::Optimal, false);
        }
        if converged {
            // polishing failed; accept the ADMM point if it meets the tolerances
            if prim <= s.feas_tol && dual <= s.stat_tol * sd {
                return finish(p, &red, &x, &y, it, RelaxStatus::Optimal, false);
            }
            best_polish = Some(finish(
                p,
                &red,
                &x,
                &y,
                it,
                RelaxStatus::IterationLimit,
                false,
            ));
        }
        // adapt the step size
        let ratio = ((prim / sp.max(1e-12)) / (dual / sd.max(1e-12)).max(1e-12)).sqrt();
        let new_base = (rho_base * ratio).clamp(1e-6, 1e6);
        if new_base > 5.0 * rho_base || new_base < 0.2 * rho_base {
            rho_base = new_base;
            let new_rho = rho_vec(rho_base);
            if let Some(c) = factor(&new_rho) {
                // y is kept; z stays consistent
                rho = new_rho;
                chol = c;
            }
        }
    }
    best_polish.unwrap_or_else(|| iteration_limit(p, &red, x, y, s.max_iter))
}

fn iteration_limit(
    p: &RelaxationProblem,
    red: &Reduced,
    x: DVector<f64>,
    y: DVector<f64>,
    it: usize,
) -> RelaxationResult {
    finish(p, red, &x, &y, it, RelaxStatus::IterationLimit, false)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    p: &RelaxationProblem,
    red: &Reduced,
    x: &DVector<f64>,
    y: &DVector<f64>,
    it: usize,
    status: RelaxStatus,
    polished: bool,
) -> RelaxationResult {
    let (prim, dual, _, sd) = red.residuals(x, y);
    let full = red.full_x(x, &p.lo, &p.hi);
    let lam = red.full_lambda(y, p.rows.len());
    let objective = p.objective(&full);
    let lower_bound = lagrangian_bound(p, &full, &lam).min(objective);
    RelaxationResult {
        status,
        x: full,
        objective,
        lower_bound,
        primal_residual: prim,
        dual_residual: dual / sd,
        iterations: it,
        polished,
        certificate: None,
    }
}

/// Solves the KKT system on the active set read off `(z, y)`: box-active
/// variables are pinned to their bound, active rows held with equality.
#[allow(clippy::too_many_arguments)]
fn polish(
    p: &RelaxationProblem,
    red: &Reduced,
    x: &DVector<f64>,
    z: &DVector<f64>,
    y: &DVector<f64>,
    s: &RelaxSettings,
    it: usize,
) -> Option<RelaxationResult> {
    let nf = red.free.len();
    let nr = red.row_map.len();
    // +1 upper, -1 lower, 0 inactive
    let side = |i: usize| -> i8 {
        if red.is_eq[i] {
            return 1;
        }
        if red.u[i].is_finite() && red.u[i] - z[i] < y[i] {
            1
        } else if red.l[i].is_finite() && z[i] - red.l[i] < -y[i] {
            -1
        } else {
            0
        }
    };
    let mut pinned = vec![None; nf];
    for c in 0..nf {
        match side(nr + c) {
            1 => pinned[c] = Some(red.u[nr + c]),
            -1 => pinned[c] = Some(red.l[nr + c]),
            _ => {}
        }
    }
    let loose: Vec<usize> = (0..nf).filter(|&c| pinned[c].is_none()).collect();
    let active: Vec<(usize, f64)> = (0..nr)
        .filter_map(|i| match side(i) {
            1 => Some((i, red.u[i])),
            -1 => Some((i, red.l[i])),
            _ => None,
        })
        .collect();
    let mut xp = DVector::from_fn(nf, |c, _| pinned[c].unwrap_or(x[c]));
    let nl = loose.len();
    let na = active.len();
    if nl + na > 0 {
        let dim = nl + na;
        let delta = 1e-10;
        let mut kkt = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        let pinned_part = DVector::from_fn(nf, |c, _| pinned[c].unwrap_or(0.0));
        let ppin = &red.p * &pinned_part;
        let apin = &red.a * &pinned_part;
        for (a, &c) in loose.iter().enumerate() {
            for (b, &d) in loose.iter().enumerate() {
                kkt[(a, b)] = red.p[(c, d)];
            }
            kkt[(a, a)] += delta;
            rhs[a] = -red.q[c] - ppin[c];
            for (b, &(i, _)) in active.iter().enumerate() {
                kkt[(a, nl + b)] = red.a[(i, c)];
                kkt[(nl + b, a)] = red.a[(i, c)];
            }
        }
        for (b, &(i, bound)) in active.iter().enumerate() {
            kkt[(nl + b, nl + b)] = -delta;
            rhs[nl + b] = bound - apin[i];
        }
        let lu = kkt.clone().lu();
        let mut sol = lu.solve(&rhs)?;
        // refine against the unregularized system
        let mut exact = kkt.clone();
        for a in 0..nl {
            exact[(a, a)] -= delta;
        }
        for b in 0..na {
            exact[(nl + b, nl + b)] += delta;
        }
        for _ in 0..3 {
            let r = &rhs - &exact * &sol;
            sol += lu.solve(&r)?;
        }
        for (a, &c) in loose.iter().enumerate() {
            xp[c] = sol[a];
        }
        let mut yp = DVector::zeros(red.a.nrows());
        for (b, &(i, _)) in active.iter().enumerate() {
            yp[i] = sol[nl + b];
        }
        return check_polish(p, red, xp, yp, &pinned, s, it);
    }
    let yp = DVector::zeros(red.a.nrows());
    check_polish(p, red, xp, yp, &pinned, s, it)
}

#[allow(clippy::too_many_arguments)]
fn check_polish(
    p: &RelaxationProblem,
    red: &Reduced,
    xp: DVector<f64>,
    mut yp: DVector<f64>,
    pinned: &[Option<f64>],
    s: &RelaxSettings,
    it: usize,
) -> Option<RelaxationResult> {
    let nr = red.row_map.len();
    // box multipliers from stationarity
    let grad = &red.p * &xp + &red.q + red.a.transpose() * &yp;
    for (c, pin) in pinned.iter().enumerate() {
        if let Some(b) = pin {
            let mu = -grad[c];
            let upper = *b == red.u[nr + c];
            let lower = *b == red.l[nr + c];
            // sign must match the bound side
            if (upper && !lower && mu < -s.stat_tol) || (lower && !upper && mu > s.stat_tol) {
                return None;
            }
            yp[nr + c] = mu;
        }
    }
    for i in 0..nr {
        if !red.is_eq[i] && yp[i] < -s.stat_tol {
            return None;
        }
    }
    let (prim, dual, _, sd) = red.residuals(&xp, &yp);
    if prim <= s.feas_tol && dual <= s.stat_tol * sd {
        return Some(finish(p, red, &xp, &yp, it, RelaxStatus::Optimal, true));
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Feasibility {
    Point(Vec<f64>),
    Infeasible(FarkasCertificate),
}

/// Finds a point meeting every row and the box to `1e-8`, or a Farkas
/// certificate that none exists. If the iteration budget runs out first the
/// last iterate is returned.
pub fn feasibility_phase(rows: &[LinearConstraint], lo: &[f64], hi: &[f64]) -> Feasibility {
    let n = lo.len();
    let origin: Vec<f64> = (0..n).map(|j| 0.0f64.clamp(lo[j], hi[j])).collect();
    if rows.iter().all(|r| r.violation(&origin) <= 1e-8) {
        return Feasibility::Point(origin);
    }
    let p = RelaxationProblem {
        quad: None,
        num_vars: n,
        rows,
        lo: lo.to_vec(),
        hi: hi.to_vec(),
        warm_start: None,
    };
    let s = RelaxSettings {
        feas_tol: 1e-9,
        eps_abs: 1e-9,
        eps_rel: 1e-9,
        max_iter: 20_000,
        ..Default::default()
    };
    let res = solve_relaxation(&p, &s);
    match res.certificate {
        Some(c) => Feasibility::Infeasible(c),
        None => Feasibility::Point(res.x),
    }
}
