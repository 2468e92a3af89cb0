//! State solves for the relaxed p-Laplacian problem
//!
//! ```text
//! -div(|grad u|^{p-2} grad u) + beta |u|^{p-2} u = f,   u = 0 on the
//! Dirichlet set,
//! ```
//!
//! posed as minimization of the convex energy
//!
//! ```text
//! E(u) = int (1/p)|grad u|^p + int (1/p) beta |u|^p - int f u
//! ```
//!
//! over nodal values, with hard zero constraints on the Dirichlet mask.
//! Infinite beta entries are folded into the Dirichlet mask before solving.
//!
//! The minimizer is found by gradient descent with a Barzilai-Borwein step
//! and monotone Armijo backtracking, on the regularized integrand
//! ((|grad u|^2 + eps^2)^{p/2} - eps^p)/p so the energy stays twice
//! differentiable for p != 2. Descent directions are taken in a fixed
//! stiffness metric (the p = 2 Laplacian plus the beta mass term, factored
//! once per solve by banded Cholesky): without it, plain gradient steps
//! inherit the O(n^2) grid conditioning and stall far above the stopping
//! tolerance. The metric only shapes the path — the fixed point is still a
//! zero of the energy gradient. Reported residuals and energies are always
//! the *unregularized* ones. At p = 2 the regularization drops out
//! identically and the Euler-Lagrange system is exactly the 5-point
//! Laplacian, which is what the independent oracle in the test suite checks
//! against.

use crate::capmeasure::MeasureField;
use crate::error::{Error, Result};
use crate::grid::{DomainMask, Grid, GridFunction};

/// Data of one relaxed state problem. Build with [`StateProblem::on_domain`]
/// so the Dirichlet mask always covers the complement of the design region.
#[derive(Debug, Clone)]
pub struct StateProblem {
    pub p: f64,
    pub f: GridFunction,
    pub beta: MeasureField,
    /// Nodes forced to u = 0. Always contains the complement of the design
    /// region; infinite-beta nodes are added at solve time.
    pub dirichlet: DomainMask,
}

impl StateProblem {
    /// Problem on a design region: Dirichlet set = complement of `domain`.
    pub fn on_domain(
        domain: &DomainMask,
        f: GridFunction,
        p: f64,
        beta: MeasureField,
    ) -> Result<StateProblem> {
        let prob = StateProblem { p, f, beta, dirichlet: domain.complement() };
        prob.validate()?;
        Ok(prob)
    }

    pub fn grid(&self) -> &Grid {
        &self.f.grid
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::invalid(format!("state problem requires finite p > 1 (got {})", self.p)));
        }
        if self.f.grid != self.beta.grid || self.f.grid != self.dirichlet.grid {
            return Err(Error::invalid("state problem: f, beta and dirichlet must share one grid"));
        }
        if !self.f.is_finite() {
            return Err(Error::invalid("state problem: f contains NaN or infinite values"));
        }
        for &b in &self.beta.beta {
            if b.is_nan() || b < 0.0 {
                return Err(Error::invalid("state problem: beta must be >= 0 (NaN not allowed; +inf is)"));
            }
        }
        Ok(())
    }

    /// Dirichlet mask with infinite-beta nodes folded in.
    pub fn effective_dirichlet(&self) -> DomainMask {
        let mut d = self.dirichlet.clone();
        for (k, &b) in self.beta.beta.iter().enumerate() {
            if b.is_infinite() {
                d.inside[k] = true;
            }
        }
        d
    }
}

/// Solver controls. The stopping rule is
/// `sup-norm residual <= tolerance x max(1, ||f||_inf)` on free nodes.
#[derive(Debug, Clone, Copy)]
pub struct SolveOpts {
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for SolveOpts {
    fn default() -> Self {
        SolveOpts { tolerance: 1e-8, max_iters: 50_000 }
    }
}

impl SolveOpts {
    pub fn with_tolerance(tol: f64) -> SolveOpts {
        SolveOpts { tolerance: tol, ..Default::default() }
    }
}

/// Outcome of one state solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Accepted descent iterations.
    pub iterations: usize,
    /// Unregularized energy of the returned iterate.
    pub final_energy: f64,
    /// Unregularized sup-norm Euler-Lagrange residual on free nodes.
    pub residual: f64,
    /// True iff the residual met the stopping tolerance.
    pub converged: bool,
    /// Gradient-regularization epsilon used by the descent.
    pub eps_reg: f64,
}

/// Unregularized energy of a given nodal function.
///
/// Nodes with beta = +inf contribute zero but require u = 0 there;
/// a nonzero value would have infinite energy and is rejected.
pub fn energy(u: &GridFunction, prob: &StateProblem) -> Result<f64> {
    prob.validate()?;
    if u.grid != *prob.grid() {
        return Err(Error::invalid("energy: u lives on a different grid than the problem"));
    }
    if !u.is_finite() {
        return Err(Error::invalid("energy: u contains NaN or infinite values"));
    }
    for (k, &b) in prob.beta.beta.iter().enumerate() {
        if b.is_infinite() && u.values[k] != 0.0 {
            return Err(Error::invalid(format!(
                "energy: u is nonzero ({}) at node {} where beta = inf",
                u.values[k], k
            )));
        }
    }
    let sys = System::build(prob, 0.0);
    Ok(sys.energy_only(&u.values, 0.0))
}

/// Solve the relaxed state problem from the zero initial guess.
pub fn solve_state(prob: &StateProblem, opts: &SolveOpts) -> Result<(GridFunction, SolveReport)> {
    prob.validate()?;
    let u0 = vec![0.0; prob.grid().node_count()];
    solve_from(prob, opts, u0)
}

/// Internal warm-started entry point; `init` is projected onto the
/// constraint set (zeroed on Dirichlet nodes) before descending.
pub(crate) fn solve_state_warm(
    prob: &StateProblem,
    opts: &SolveOpts,
    init: &GridFunction,
) -> Result<(GridFunction, SolveReport)> {
    prob.validate()?;
    solve_from(prob, opts, init.values.clone())
}

/// Torsion-type solve on a plain set: beta = 0 on `omega`, Dirichlet
/// everywhere else.
pub fn solve_on_set(
    omega: &DomainMask,
    f: &GridFunction,
    p: f64,
) -> Result<(GridFunction, SolveReport)> {
    solve_on_set_opts(omega, f, p, &SolveOpts::default())
}

pub fn solve_on_set_opts(
    omega: &DomainMask,
    f: &GridFunction,
    p: f64,
    opts: &SolveOpts,
) -> Result<(GridFunction, SolveReport)> {
    if omega.grid != f.grid {
        return Err(Error::invalid("solve_on_set: omega and f live on different grids"));
    }
    let prob = StateProblem::on_domain(omega, f.clone(), p, MeasureField::zeros(&f.grid))?;
    solve_state(&prob, opts)
}

fn solve_from(
    prob: &StateProblem,
    opts: &SolveOpts,
    mut u0: Vec<f64>,
) -> Result<(GridFunction, SolveReport)> {
    let norm_f = prob.f.max_abs();
    let eps_reg = eps_regularization(prob.p, norm_f);
    let sys = System::build(prob, eps_reg);
    for (k, v) in u0.iter_mut().enumerate() {
        if !sys.free[k] {
            *v = 0.0;
        }
    }
    let tol = opts.tolerance * norm_f.max(1.0);
    let (u, report) = descend(&sys, u0, opts.max_iters, tol, eps_reg);
    Ok((GridFunction { grid: *prob.grid(), values: u }, report))
}

/// Regularization epsilon: 1e-6 times the gradient scale of the data.
/// Solutions scale like ||f||^{1/(p-1)}, hence the exponent.
pub(crate) fn eps_regularization(p: f64, norm_f: f64) -> f64 {
    1e-6 * norm_f.max(1.0).powf(1.0 / (p - 1.0))
}

/// Assembled per-solve data: free mask, node weights, finite beta.
pub(crate) struct System {
    pub grid: Grid,
    pub p: f64,
    pub free: Vec<bool>,
    pub w: Vec<f64>,
    pub beta_fin: Vec<f64>,
    pub f: Vec<f64>,
}

impl System {
    pub(crate) fn build(prob: &StateProblem, _eps: f64) -> System {
        let grid = *prob.grid();
        let dir = prob.effective_dirichlet();
        let free: Vec<bool> = dir.inside.iter().map(|&d| !d).collect();
        let w = grid.node_weights();
        let beta_fin: Vec<f64> =
            prob.beta.beta.iter().map(|&b| if b.is_finite() { b } else { 0.0 }).collect();
        System { grid, p: prob.p, free, w, beta_fin, f: prob.f.values.clone() }
    }

    /// Regularized energy (eps = 0 gives the unregularized value).
    pub(crate) fn energy_only(&self, u: &[f64], eps: f64) -> f64 {
        let g = &self.grid;
        let p = self.p;
        let vol = g.cell_vol();
        let eps2 = eps * eps;
        let eps_pow = if eps > 0.0 { eps.powf(p) } else { 0.0 };
        let mut e = 0.0;
        if g.dim == 1 {
            let h = g.h[0];
            for c in 0..g.cell_count() {
                let gx = (u[c + 1] - u[c]) / h;
                let r2 = gx * gx + eps2;
                e += vol * (pow_half(r2, p) - eps_pow) / p;
            }
        } else {
            let nx = g.n[0];
            let (hx, hy) = (g.h[0], g.h[1]);
            for cj in 0..g.n[1] - 1 {
                for ci in 0..nx - 1 {
                    let k00 = cj * nx + ci;
                    let gx = (u[k00 + 1] - u[k00]) / hx;
                    let gy = (u[k00 + nx] - u[k00]) / hy;
                    let r2 = gx * gx + gy * gy + eps2;
                    e += vol * (pow_half(r2, p) - eps_pow) / p;
                }
            }
        }
        for k in 0..u.len() {
            let uk = u[k];
            let node = self.beta_fin[k] / p * uk.abs().powf(p) - self.f[k] * uk;
            e += self.w[k] * node;
        }
        e
    }

    /// Regularized energy and its nodal gradient (zeroed on Dirichlet
    /// nodes). eps = 0 evaluates the unregularized first-order conditions.
    pub(crate) fn energy_grad(&self, u: &[f64], eps: f64, grad: &mut [f64]) -> f64 {
        let g = &self.grid;
        let p = self.p;
        let vol = g.cell_vol();
        let eps2 = eps * eps;
        let eps_pow = if eps > 0.0 { eps.powf(p) } else { 0.0 };
        let p_is_2 = p == 2.0;
        grad.fill(0.0);
        let mut e = 0.0;
        if g.dim == 1 {
            let h = g.h[0];
            for c in 0..g.cell_count() {
                let gx = (u[c + 1] - u[c]) / h;
                let r2 = gx * gx + eps2;
                let (psi, phi) = if p_is_2 {
                    ((r2 - eps2) * 0.5, 1.0)
                } else {
                    (
                        (pow_half(r2, p) - eps_pow) / p,
                        if r2 > 0.0 { pow_half(r2, p - 2.0) } else { 0.0 },
                    )
                };
                e += vol * psi;
                let flux = vol * phi * gx / h;
                grad[c] -= flux;
                grad[c + 1] += flux;
            }
        } else {
            let nx = g.n[0];
            let (hx, hy) = (g.h[0], g.h[1]);
            for cj in 0..g.n[1] - 1 {
                for ci in 0..nx - 1 {
                    let k00 = cj * nx + ci;
                    let gx = (u[k00 + 1] - u[k00]) / hx;
                    let gy = (u[k00 + nx] - u[k00]) / hy;
                    let r2 = gx * gx + gy * gy + eps2;
                    let (psi, phi) = if p_is_2 {
                        ((r2 - eps2) * 0.5, 1.0)
                    } else {
                        (
                            (pow_half(r2, p) - eps_pow) / p,
                            if r2 > 0.0 { pow_half(r2, p - 2.0) } else { 0.0 },
                        )
                    };
                    e += vol * psi;
                    let fx = vol * phi * gx / hx;
                    let fy = vol * phi * gy / hy;
                    grad[k00] -= fx + fy;
                    grad[k00 + 1] += fx;
                    grad[k00 + nx] += fy;
                }
            }
        }
        for k in 0..u.len() {
            let uk = u[k];
            let b = self.beta_fin[k];
            let du = if p_is_2 {
                b * uk
            } else if b > 0.0 {
                b * uk.abs().powf(p - 1.0) * uk.signum()
            } else {
                0.0
            };
            let node_e = if b > 0.0 { b / p * uk.abs().powf(p) } else { 0.0 };
            e += self.w[k] * (node_e - self.f[k] * uk);
            grad[k] += self.w[k] * (du - self.f[k]);
        }
        for k in 0..u.len() {
            if !self.free[k] {
                grad[k] = 0.0;
            }
        }
        e
    }

    /// Sup-norm of the gradient over free nodes, in PDE units (divided by
    /// the node weight).
    pub(crate) fn residual_sup(&self, grad: &[f64]) -> f64 {
        let mut r: f64 = 0.0;
        for k in 0..grad.len() {
            if self.free[k] && self.w[k] > 0.0 {
                r = r.max((grad[k] / self.w[k]).abs());
            }
        }
        r
    }

}

/// x^{p/2} for x >= 0 without the pow call in the common p = 2 case.
#[inline]
fn pow_half(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x
    } else {
        x.powf(0.5 * p)
    }
}

/// Symmetric banded matrix in lower packed storage with Cholesky
/// factorization. Entry (j + d, j) for d in 0..=bw lives at
/// `band[j * (bw + 1) + d]`.
pub(crate) struct BandedSpd {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandedSpd {
    fn new(n: usize, bw: usize) -> BandedSpd {
        BandedSpd { n, bw, band: vec![0.0; n * (bw + 1)] }
    }

    #[inline]
    fn at(&mut self, j: usize, d: usize) -> &mut f64 {
        &mut self.band[j * (self.bw + 1) + d]
    }

    /// In-place Cholesky. Nonpositive pivots (singular Neumann-type blocks)
    /// are clamped, which is harmless for use as a metric.
    fn factor(&mut self) {
        let (n, bw) = (self.n, self.bw);
        let idx = |j: usize, d: usize| j * (bw + 1) + d;
        let mut max_diag = 0.0f64;
        for j in 0..n {
            max_diag = max_diag.max(self.band[idx(j, 0)]);
        }
        let floor = (1e-12 * max_diag).max(1e-300);
        for j in 0..n {
            let start = j.saturating_sub(bw);
            let mut s = self.band[idx(j, 0)];
            for k in start..j {
                let l = self.band[idx(k, j - k)];
                s -= l * l;
            }
            let ljj = s.max(floor).sqrt();
            self.band[idx(j, 0)] = ljj;
            let iend = (j + bw).min(n - 1);
            for i in j + 1..=iend {
                let mut s = self.band[idx(j, i - j)];
                let kstart = i.saturating_sub(bw).max(start);
                for k in kstart..j {
                    s -= self.band[idx(k, i - k)] * self.band[idx(k, j - k)];
                }
                self.band[idx(j, i - j)] = s / ljj;
            }
        }
    }

    /// x = A^{-1} b via the stored factor.
    fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        let idx = |j: usize, d: usize| j * (bw + 1) + d;
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.band[idx(k, i - k)] * x[k];
            }
            x[i] = s / self.band[idx(i, 0)];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            let kend = (i + bw).min(n - 1);
            for k in i + 1..=kend {
                s -= self.band[idx(i, k - i)] * x[k];
            }
            x[i] = s / self.band[idx(i, 0)];
        }
    }
}

/// Metric for the descent direction: the p = 2 stiffness matrix (discrete
/// Laplacian from the cell energies plus the beta mass term) restricted to
/// free nodes, with identity on Dirichlet rows. Grids too large for banded
/// storage fall back to the matrix diagonal. Also serves as the
/// preconditioner for adjoint solves (exact at p = 2).
pub(crate) enum Metric {
    Band(BandedSpd),
    Diag(Vec<f64>),
}

const BAND_STORAGE_LIMIT: usize = 50_000_000;

impl Metric {
    pub(crate) fn build(sys: &System) -> Metric {
        let g = &sys.grid;
        let n = g.node_count();
        let bw = if g.dim == 1 { 1 } else { g.n[0] };
        if n * (bw + 1) <= BAND_STORAGE_LIMIT {
            let mut a = BandedSpd::new(n, bw);
            assemble_p2_stiffness(sys, &mut a);
            a.factor();
            Metric::Band(a)
        } else {
            let mut diag = vec![0.0; n];
            let vol = g.cell_vol();
            if g.dim == 1 {
                let c2 = vol / (g.h[0] * g.h[0]);
                for c in 0..g.cell_count() {
                    diag[c] += c2;
                    diag[c + 1] += c2;
                }
            } else {
                let nx = g.n[0];
                let cx = vol / (g.h[0] * g.h[0]);
                let cy = vol / (g.h[1] * g.h[1]);
                for cj in 0..g.n[1] - 1 {
                    for ci in 0..nx - 1 {
                        let k00 = cj * nx + ci;
                        diag[k00] += cx + cy;
                        diag[k00 + 1] += cx;
                        diag[k00 + nx] += cy;
                    }
                }
            }
            for k in 0..n {
                diag[k] += sys.w[k] * sys.beta_fin[k];
                if !sys.free[k] || diag[k] <= 0.0 {
                    diag[k] = 1.0;
                }
            }
            Metric::Diag(diag)
        }
    }

    /// out = M^{-1} r.
    pub(crate) fn apply_inverse(&self, r: &[f64], out: &mut [f64]) {
        match self {
            Metric::Band(a) => a.solve_into(r, out),
            Metric::Diag(m) => {
                for k in 0..r.len() {
                    out[k] = r[k] / m[k];
                }
            }
        }
    }

    /// d = -M^{-1} g, and returns <g, d> (always <= 0).
    fn direction(&self, g: &[f64], d: &mut [f64]) -> f64 {
        self.apply_inverse(g, d);
        let mut gd = 0.0;
        for k in 0..g.len() {
            d[k] = -d[k];
            gd += g[k] * d[k];
        }
        gd
    }

    /// <d, M d> given that d = -M^{-1} g_prev (so for the banded form it is
    /// just -<g_prev, d>).
    fn dmd(&self, d: &[f64], gd: f64) -> f64 {
        match self {
            Metric::Band(_) => -gd,
            Metric::Diag(m) => {
                let mut s = 0.0;
                for k in 0..d.len() {
                    s += d[k] * m[k] * d[k];
                }
                s
            }
        }
    }
}

/// Assemble the p = 2 cell-energy Hessian plus beta mass into banded
/// storage, with Dirichlet rows replaced by the identity.
fn assemble_p2_stiffness(sys: &System, a: &mut BandedSpd) {
    let g = &sys.grid;
    let vol = g.cell_vol();
    let free = &sys.free;
    if g.dim == 1 {
        let c2 = vol / (g.h[0] * g.h[0]);
        for c in 0..g.cell_count() {
            let (k0, k1) = (c, c + 1);
            if free[k0] {
                *a.at(k0, 0) += c2;
            }
            if free[k1] {
                *a.at(k1, 0) += c2;
            }
            if free[k0] && free[k1] {
                *a.at(k0, 1) -= c2;
            }
        }
    } else {
        let nx = g.n[0];
        let cx = vol / (g.h[0] * g.h[0]);
        let cy = vol / (g.h[1] * g.h[1]);
        for cj in 0..g.n[1] - 1 {
            for ci in 0..nx - 1 {
                let k00 = cj * nx + ci;
                let (k10, k01) = (k00 + 1, k00 + nx);
                if free[k00] {
                    *a.at(k00, 0) += cx + cy;
                }
                if free[k10] {
                    *a.at(k10, 0) += cx;
                }
                if free[k01] {
                    *a.at(k01, 0) += cy;
                }
                if free[k00] && free[k10] {
                    *a.at(k00, 1) -= cx;
                }
                if free[k00] && free[k01] {
                    *a.at(k00, nx) -= cy;
                }
            }
        }
    }
    for k in 0..sys.grid.node_count() {
        if free[k] {
            *a.at(k, 0) += sys.w[k] * sys.beta_fin[k];
        } else {
            *a.at(k, 0) = 1.0;
        }
    }
}

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: u32 = 60;

fn descend(
    sys: &System,
    mut u: Vec<f64>,
    max_iters: usize,
    tol: f64,
    eps: f64,
) -> (Vec<f64>, SolveReport) {
    let n = u.len();
    let p_is_2 = sys.p == 2.0;

    let mut g = vec![0.0; n];
    let mut gnew = vec![0.0; n];
    let mut gtmp = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut trial = vec![0.0; n];

    let mut e = sys.energy_grad(&u, eps, &mut g);
    let mut residual = unreg_residual(sys, &u, &g, &mut gtmp, p_is_2);
    let mut iterations = 0usize;
    let mut converged = residual <= tol;
    if converged {
        let final_energy = sys.energy_only(&u, 0.0);
        return (u, SolveReport { iterations, final_energy, residual, converged, eps_reg: eps });
    }

    let metric = Metric::build(sys);
    let mut t_trial = 1.0f64;

    while !converged && iterations < max_iters {
        let gd = metric.direction(&g, &mut d);
        if gd >= 0.0 {
            break; // zero gradient up to rounding: nothing left to do
        }

        // Monotone Armijo backtracking from the BB trial step.
        let mut t = t_trial.clamp(1e-14, 1e14);
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            for k in 0..n {
                trial[k] = u[k] + t * d[k];
            }
            let e_t = sys.energy_only(&trial, eps);
            if e_t <= e + ARMIJO_C * t * gd {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break; // stagnation: energy cannot be decreased further
        }

        let e_new = sys.energy_grad(&trial, eps, &mut gnew);
        debug_assert!(
            e_new <= e + 1e-12 * (1.0 + e.abs()),
            "energy must not increase on accepted steps ({} -> {})",
            e,
            e_new
        );

        // Barzilai-Borwein step in the metric: t_next = <s, M s> / <s, y>
        // with s = t*d, y = gnew - g.
        let smd = metric.dmd(&d, gd);
        let mut sy = 0.0;
        for k in 0..n {
            sy += d[k] * (gnew[k] - g[k]);
        }
        t_trial = if sy > 0.0 { (t * smd / sy).clamp(1e-14, 1e14) } else { t * 2.0 };

        std::mem::swap(&mut u, &mut trial);
        std::mem::swap(&mut g, &mut gnew);
        e = e_new;
        iterations += 1;

        residual = unreg_residual(sys, &u, &g, &mut gtmp, p_is_2);
        converged = residual <= tol;
    }

    let final_energy = sys.energy_only(&u, 0.0);
    (
        u,
        SolveReport { iterations, final_energy, residual, converged, eps_reg: eps },
    )
}

/// Unregularized sup-residual. At p = 2 the regularized gradient already is
/// the unregularized one; otherwise a second evaluation at eps = 0 is
/// required.
fn unreg_residual(
    sys: &System,
    u: &[f64],
    g_reg: &[f64],
    scratch: &mut [f64],
    p_is_2: bool,
) -> f64 {
    if p_is_2 {
        sys.residual_sup(g_reg)
    } else {
        sys.energy_grad(u, 0.0, scratch);
        sys.residual_sup(scratch)
    }
}

/// Linearization of the state operator at a solved state, for adjoint
/// solves: H v = D^2 E(u) v with the same regularization eps as the solve.
pub(crate) struct LinearizedOp {
    grid: Grid,
    free: Vec<bool>,
    /// Per-cell (|g|^2 + eps^2)^{(p-2)/2}.
    cell_phi: Vec<f64>,
    /// Per-cell (p-2)(|g|^2 + eps^2)^{(p-4)/2}.
    cell_psi: Vec<f64>,
    cell_gx: Vec<f64>,
    cell_gy: Vec<f64>,
    /// Per-node w_k beta_k (p-1) |u_k|^{p-2} (with |u| floored at eps).
    node_mass: Vec<f64>,
}

impl LinearizedOp {
    pub(crate) fn build(sys: &System, u: &[f64], eps: f64) -> LinearizedOp {
        let g = &sys.grid;
        let p = sys.p;
        let nc = g.cell_count();
        let mut cell_phi = vec![0.0; nc];
        let mut cell_psi = vec![0.0; nc];
        let mut cell_gx = vec![0.0; nc];
        let mut cell_gy = vec![0.0; nc];
        let eps2 = eps * eps;
        if g.dim == 1 {
            for c in 0..nc {
                let gx = (u[c + 1] - u[c]) / g.h[0];
                let r2 = gx * gx + eps2;
                cell_gx[c] = gx;
                cell_phi[c] = pow_half(r2.max(1e-300), p - 2.0);
                cell_psi[c] = (p - 2.0) * pow_half(r2.max(1e-300), p - 4.0);
            }
        } else {
            let nx = g.n[0];
            for cj in 0..g.n[1] - 1 {
                for ci in 0..nx - 1 {
                    let k00 = cj * nx + ci;
                    let c = cj * (nx - 1) + ci;
                    let gx = (u[k00 + 1] - u[k00]) / g.h[0];
                    let gy = (u[k00 + nx] - u[k00]) / g.h[1];
                    let r2 = gx * gx + gy * gy + eps2;
                    cell_gx[c] = gx;
                    cell_gy[c] = gy;
                    cell_phi[c] = pow_half(r2.max(1e-300), p - 2.0);
                    cell_psi[c] = (p - 2.0) * pow_half(r2.max(1e-300), p - 4.0);
                }
            }
        }
        let mut node_mass = vec![0.0; g.node_count()];
        for k in 0..node_mass.len() {
            let b = sys.beta_fin[k];
            if b > 0.0 {
                let au = u[k].abs().max(eps.max(1e-300));
                node_mass[k] = sys.w[k] * b * (p - 1.0) * pow_half(au * au, p - 2.0);
            }
        }
        LinearizedOp {
            grid: sys.grid,
            free: sys.free.clone(),
            cell_phi,
            cell_psi,
            cell_gx,
            cell_gy,
            node_mass,
        }
    }

    /// out = H v, with v implicitly zero on Dirichlet nodes.
    pub(crate) fn apply(&self, v: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let vol = g.cell_vol();
        out.fill(0.0);
        let val = |k: usize| if self.free[k] { v[k] } else { 0.0 };
        if g.dim == 1 {
            let h = g.h[0];
            for c in 0..g.cell_count() {
                let vx = (val(c + 1) - val(c)) / h;
                let gdotv = self.cell_gx[c] * vx;
                let flux = vol * (self.cell_phi[c] * vx + self.cell_psi[c] * gdotv * self.cell_gx[c]) / h;
                out[c] -= flux;
                out[c + 1] += flux;
            }
        } else {
            let nx = g.n[0];
            let (hx, hy) = (g.h[0], g.h[1]);
            for cj in 0..g.n[1] - 1 {
                for ci in 0..nx - 1 {
                    let k00 = cj * nx + ci;
                    let c = cj * (nx - 1) + ci;
                    let vx = (val(k00 + 1) - val(k00)) / hx;
                    let vy = (val(k00 + nx) - val(k00)) / hy;
                    let gdotv = self.cell_gx[c] * vx + self.cell_gy[c] * vy;
                    let fx = vol * (self.cell_phi[c] * vx + self.cell_psi[c] * gdotv * self.cell_gx[c]) / hx;
                    let fy = vol * (self.cell_phi[c] * vy + self.cell_psi[c] * gdotv * self.cell_gy[c]) / hy;
                    out[k00] -= fx + fy;
                    out[k00 + 1] += fx;
                    out[k00 + nx] += fy;
                }
            }
        }
        for k in 0..out.len() {
            if self.free[k] {
                out[k] += self.node_mass[k] * v[k];
            } else {
                out[k] = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{disc_mask, Grid, GridFunction};

    fn torsion_1d(p: f64, x: f64) -> f64 {
        // Closed form for -(|u'|^{p-2} u')' = 1 on (0,1), u(0) = u(1) = 0.
        let q = p / (p - 1.0);
        (p - 1.0) / p * (0.5f64.powf(q) - (x - 0.5).abs().powf(q))
    }

    #[test]
    fn energy_of_zero_is_zero() {
        let g = Grid::line(0.0, 1.0, 33).unwrap();
        let d = g.interior_mask();
        let prob = StateProblem::on_domain(
            &d,
            GridFunction::constant(&g, 1.0),
            2.0,
            MeasureField::zeros(&g),
        )
        .unwrap();
        let e = energy(&GridFunction::zeros(&g), &prob).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn energy_of_parabola_profile() {
        // (1/2) int u'^2 - int u with u = x(1-x)/2 equals 1/24 - 1/12 = -1/24.
        let g = Grid::line(0.0, 1.0, 257).unwrap();
        let d = g.interior_mask();
        let prob = StateProblem::on_domain(
            &d,
            GridFunction::constant(&g, 1.0),
            2.0,
            MeasureField::zeros(&g),
        )
        .unwrap();
        let u = GridFunction::from_fn(&g, |p| p[0] * (1.0 - p[0]) / 2.0);
        let e = energy(&u, &prob).unwrap();
        assert!((e + 1.0 / 24.0).abs() <= 1e-4, "energy {}", e);
    }

    #[test]
    fn energy_ignores_inf_nodes_where_u_vanishes() {
        let g = Grid::line(0.0, 1.0, 33).unwrap();
        let d = g.interior_mask();
        let mut u = GridFunction::from_fn(&g, |p| p[0] * (1.0 - p[0]));
        u.values[0] = 0.0;
        u.values[32] = 0.0;
        u.values[10] = 0.0;
        let f = GridFunction::constant(&g, 1.0);
        let prob0 =
            StateProblem::on_domain(&d, f.clone(), 2.0, MeasureField::zeros(&g)).unwrap();
        let mut beta = MeasureField::zeros(&g);
        beta.beta[10] = f64::INFINITY;
        let prob_inf = StateProblem::on_domain(&d, f, 2.0, beta).unwrap();
        let e0 = energy(&u, &prob0).unwrap();
        let e1 = energy(&u, &prob_inf).unwrap();
        assert_eq!(e0, e1);
    }

    #[test]
    fn energy_rejects_nonzero_u_on_inf_node() {
        let g = Grid::line(0.0, 1.0, 33).unwrap();
        let d = g.interior_mask();
        let mut beta = MeasureField::zeros(&g);
        beta.beta[16] = f64::INFINITY;
        let prob =
            StateProblem::on_domain(&d, GridFunction::constant(&g, 1.0), 2.0, beta).unwrap();
        let u = GridFunction::from_fn(&g, |p| p[0] * (1.0 - p[0]));
        assert!(energy(&u, &prob).is_err());
    }

    #[test]
    fn torsion_1d_p2_matches_closed_form() {
        let g = Grid::line(0.0, 1.0, 257).unwrap();
        let d = g.interior_mask();
        let f = GridFunction::constant(&g, 1.0);
        let (u, rep) = solve_on_set(&d, &f, 2.0).unwrap();
        assert!(rep.converged, "report: {:?}", rep);
        let mut sup = 0.0f64;
        for k in 0..g.node_count() {
            let x = g.node_pos(k)[0];
            sup = sup.max((u.values[k] - torsion_1d(2.0, x)).abs());
        }
        assert!(sup <= 2e-3, "sup error {}", sup);
        assert!((u.max() - 0.125).abs() <= 1e-3, "max {}", u.max());
        assert!((rep.final_energy + 1.0 / 24.0).abs() <= 1e-4);
    }

    #[test]
    fn torsion_1d_p3_matches_closed_form() {
        let g = Grid::line(0.0, 1.0, 257).unwrap();
        let d = g.interior_mask();
        let f = GridFunction::constant(&g, 1.0);
        let (u, _) = solve_on_set(&d, &f, 3.0).unwrap();
        let expected_max = 2.0 / 3.0 * 0.5f64.powf(1.5);
        assert!((u.max() - expected_max).abs() <= 2e-3, "max {} vs {}", u.max(), expected_max);
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let g = Grid::rect([0.0, 0.0], [1.0, 1.0], [17, 17]).unwrap();
        let d = g.interior_mask();
        let f = GridFunction::zeros(&g);
        let (u, rep) = solve_on_set(&d, &f, 2.5).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(rep.converged);
        assert!(u.max_abs() == 0.0);
    }

    #[test]
    fn maximum_principle_nonnegative() {
        let g = Grid::rect([0.0, 0.0], [1.0, 1.0], [33, 33]).unwrap();
        let d = disc_mask(&g, [0.5, 0.5], 0.4).unwrap();
        let f = GridFunction::from_fn(&g, |p| 1.0 + (6.0 * p[0]).sin().abs());
        let (u, _) = solve_on_set(&d, &f, 2.0).unwrap();
        assert!(u.min() >= -1e-8, "min {}", u.min());
    }

    #[test]
    fn solution_scale_stable_under_refinement() {
        // L^infinity bound behaves like a bounded quantity: max u at n and
        // 2n-1 agree to 10%.
        let f_fun = |p: [f64; 2]| 1.0 + p[0];
        let mut maxes = Vec::new();
        for n in [33usize, 65] {
            let g = Grid::rect([0.0, 0.0], [1.0, 1.0], [n, n]).unwrap();
            let d = g.interior_mask();
            let f = GridFunction::from_fn(&g, f_fun);
            let (u, _) = solve_on_set(&d, &f, 2.0).unwrap();
            maxes.push(u.max());
        }
        let rel = (maxes[1] - maxes[0]).abs() / maxes[1];
        assert!(rel <= 0.10, "max u {} vs {}", maxes[0], maxes[1]);
    }

    #[test]
    fn set_monotonicity_of_solves() {
        // omega inside omega' with f >= 0 implies u <= u' nodewise.
        let g = Grid::line(0.0, 1.0, 129).unwrap();
        let big = g.interior_mask();
        let small = DomainMask::from_fn(&g, |p| p[0] > 0.25 && p[0] < 0.75);
        let f = GridFunction::constant(&g, 1.0);
        let opts = SolveOpts::with_tolerance(1e-10);
        let (u_small, _) = solve_on_set_opts(&small, &f, 2.0, &opts).unwrap();
        let (u_big, _) = solve_on_set_opts(&big, &f, 2.0, &opts).unwrap();
        let mut worst = f64::NEG_INFINITY;
        for k in 0..g.node_count() {
            worst = worst.max(u_small.values[k] - u_big.values[k]);
        }
        assert!(worst <= 1e-8, "violation {}", worst);
    }

    #[test]
    fn p2_interior_solve_matches_dense_oracle() {
        // Small 2D problem solved independently by dense Gaussian
        // elimination on the 5-point Laplacian system.
        let n = 9usize;
        let g = Grid::rect([0.0, 0.0], [1.0, 1.0], [n, n]).unwrap();
        let d = g.interior_mask();
        let f = GridFunction::from_fn(&g, |p| 1.0 + p[0] + 2.0 * p[1]);
        let opts = SolveOpts { tolerance: 1e-12, max_iters: 200_000 };
        let (u, rep) = solve_on_set_opts(&d, &f, 2.0, &opts).unwrap();
        assert!(rep.converged);

        // Oracle: assemble and solve (4u - sum of neighbors) = h^2 f on the
        // (n-2)^2 interior nodes.
        let m = n - 2;
        let h = g.h[0];
        let dim = m * m;
        let mut a = vec![0.0f64; dim * dim];
        let mut b = vec![0.0f64; dim];
        let at = |r: usize, c: usize| r * dim + c;
        for jj in 0..m {
            for ii in 0..m {
                let r = jj * m + ii;
                a[at(r, r)] = 4.0;
                if ii > 0 {
                    a[at(r, r - 1)] = -1.0;
                }
                if ii + 1 < m {
                    a[at(r, r + 1)] = -1.0;
                }
                if jj > 0 {
                    a[at(r, r - m)] = -1.0;
                }
                if jj + 1 < m {
                    a[at(r, r + m)] = -1.0;
                }
                b[r] = h * h * f.values[g.idx(ii + 1, jj + 1)];
            }
        }
        // Plain Gaussian elimination with partial pivoting.
        for col in 0..dim {
            let mut piv = col;
            for r in col + 1..dim {
                if a[at(r, col)].abs() > a[at(piv, col)].abs() {
                    piv = r;
                }
            }
            if piv != col {
                for c in 0..dim {
                    a.swap(at(col, c), at(piv, c));
                }
                b.swap(col, piv);
            }
            let pivval = a[at(col, col)];
            for r in col + 1..dim {
                let factor = a[at(r, col)] / pivval;
                if factor != 0.0 {
                    for c in col..dim {
                        a[at(r, c)] -= factor * a[at(col, c)];
                    }
                    b[r] -= factor * b[col];
                }
            }
        }
        let mut x = vec![0.0f64; dim];
        for r in (0..dim).rev() {
            let mut s = b[r];
            for c in r + 1..dim {
                s -= a[at(r, c)] * x[c];
            }
            x[r] = s / a[at(r, r)];
        }

        let mut sup = 0.0f64;
        for jj in 0..m {
            for ii in 0..m {
                let diff = (u.values[g.idx(ii + 1, jj + 1)] - x[jj * m + ii]).abs();
                sup = sup.max(diff);
            }
        }
        assert!(sup <= 1e-8, "sup deviation from direct solve {}", sup);
    }

    #[test]
    fn rejects_bad_problems() {
        let g = Grid::line(0.0, 1.0, 17).unwrap();
        let d = g.interior_mask();
        let f = GridFunction::constant(&g, 1.0);
        // p = 1 is outside the admissible range.
        assert!(StateProblem::on_domain(&d, f.clone(), 1.0, MeasureField::zeros(&g)).is_err());
        // NaN data.
        let mut f_bad = f.clone();
        f_bad.values[3] = f64::NAN;
        assert!(StateProblem::on_domain(&d, f_bad, 2.0, MeasureField::zeros(&g)).is_err());
        // Negative beta.
        let mut beta = MeasureField::zeros(&g);
        beta.beta[2] = -1.0;
        assert!(StateProblem::on_domain(&d, f, 2.0, beta).is_err());
    }
}
