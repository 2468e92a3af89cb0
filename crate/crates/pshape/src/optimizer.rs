//! The two shape optimization drivers and the hypothesis checker.
//!
//! Free-boundary path: minimize the penalized torsion energy
//! E(u) = (1/p) int |grad u|^p - int f u + Lambda |{u > 0}| by alternating
//! state solves on the current support with truncation competitors
//! (u - eps)+ from a geometric schedule (augmented by the complete
//! truncation u = 0, without which the concave support-size profile can
//! trap the iteration on a local hump).
//!
//! Control path: minimize J(beta) = -int g u_beta + lambda |omega| over
//! nodal densities beta in [0, B_cap] under the volume budget
//! |{beta < B_cap}| <= m, by projected gradient with exact adjoint
//! sensitivities. Nodes at B_cap are converted to hard Dirichlet for a
//! final verification solve. The lambda |omega| term is handled by an
//! outer scalar search over volume budgets, each evaluated by the
//! lambda = 0 inner solver.

use crate::capmeasure::MeasureField;
use crate::error::{Error, Result};
use crate::geometry::{measure, superlevel_area, superlevel_mask};
use crate::grid::{DomainMask, GridFunction};
use crate::io::fmt_f64;
use crate::state::{
    self, energy, solve_on_set_opts, solve_state, solve_state_warm, LinearizedOp, Metric,
    SolveOpts, SolveReport, StateProblem, System,
};

/// Cost data for the control path: J(u, omega) = -int g u + lambda |omega|,
/// with the claimed integrability exponents of f (q) and g (ell) carried
/// along for hypothesis checking, and the volume budget m.
#[derive(Debug, Clone)]
pub struct CostSpec {
    pub g: GridFunction,
    pub lambda: f64,
    pub p: f64,
    pub q: f64,
    pub ell: f64,
    pub m: f64,
}

impl CostSpec {
    pub fn validate(&self, domain: &DomainMask) -> Result<()> {
        if self.g.grid != domain.grid {
            return Err(Error::invalid("cost: g and domain live on different grids"));
        }
        if !self.g.is_finite() || self.g.values.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("cost: g must be finite and >= 0"));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid("cost: lambda must be >= 0"));
        }
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::invalid("cost: p must be > 1"));
        }
        let vol_d = measure(domain);
        if !(self.m > 0.0) || self.m > vol_d + 1e-12 {
            return Err(Error::invalid(format!(
                "cost: volume budget m must be in (0, |D|] (m = {}, |D| = {})",
                self.m, vol_d
            )));
        }
        Ok(())
    }
}

/// Support threshold for floating-point support detection.
pub fn support_threshold(u: &GridFunction) -> f64 {
    1e-8 * u.max().max(0.0)
}

/// Sub-cell measure of the support {u > threshold}.
pub fn support_measure(u: &GridFunction) -> f64 {
    superlevel_area(u, support_threshold(u))
}

/// Outcome of the free-boundary minimization.
#[derive(Debug, Clone)]
pub struct FbOutcome {
    pub u: GridFunction,
    /// Support of the returned u within the design region.
    pub omega: DomainMask,
    /// Report of the final state solve.
    pub report: SolveReport,
    /// Final value of the penalized objective.
    pub objective: f64,
    /// Objective after every accepted step (never increasing).
    pub history: Vec<f64>,
}

const FB_OUTER_MAX: usize = 40;
const FB_TRUNCATION_OCTAVES: u32 = 12;

/// Minimize E(u) = (1/p) int |grad u|^p - int f u + lambda_coef |{u > 0}|
/// over the design region. `lambda_coef` is the whole coefficient of the
/// support term.
pub fn free_boundary_minimize(
    f: &GridFunction,
    p: f64,
    lambda_coef: f64,
    domain: &DomainMask,
    opts: &SolveOpts,
) -> Result<FbOutcome> {
    if f.grid != domain.grid {
        return Err(Error::invalid("free_boundary_minimize: f and domain grids differ"));
    }
    if f.values.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::invalid("free_boundary_minimize: f must be >= 0"));
    }
    if !(lambda_coef >= 0.0) || !lambda_coef.is_finite() {
        return Err(Error::invalid("free_boundary_minimize: Lambda must be >= 0"));
    }

    // Fixed problem for objective evaluation (the energy integrand does not
    // depend on the support mask).
    let eval_prob =
        StateProblem::on_domain(domain, f.clone(), p, MeasureField::zeros(&f.grid))?;
    let objective =
        |u: &GridFunction| -> Result<f64> { Ok(energy(u, &eval_prob)? + lambda_coef * support_measure(u)) };

    let mut support = domain.clone();
    let (mut u, mut report) = solve_on_set_opts(&support, f, p, opts)?;
    let mut e_obj = report.final_energy + lambda_coef * support_measure(&u);
    let mut history = vec![e_obj];

    for _ in 0..FB_OUTER_MAX {
        let mut accepted_truncation = false;

        // Truncation sweep: (u - eps)+ over a geometric schedule, then the
        // complete truncation.
        let umax = u.max();
        if umax > 0.0 {
            let eps0 = 0.1 * umax;
            for k in 0..FB_TRUNCATION_OCTAVES {
                let eps = eps0 / (1u64 << k) as f64;
                let v = GridFunction {
                    grid: u.grid,
                    values: u.values.iter().map(|&x| (x - eps).max(0.0)).collect(),
                };
                let e_v = objective(&v)?;
                if e_v < e_obj {
                    u = v;
                    e_obj = e_v;
                    history.push(e_obj);
                    accepted_truncation = true;
                }
            }
            // Complete truncation: E(0) = 0 exactly.
            if 0.0 < e_obj {
                u = GridFunction::zeros(&u.grid);
                e_obj = 0.0;
                history.push(e_obj);
                accepted_truncation = true;
            }
        }

        let new_support = superlevel_mask(&u, support_threshold(&u)).intersect(&support);
        let support_changed = new_support.inside != support.inside;
        if !accepted_truncation && !support_changed {
            break;
        }

        // Re-solve the state on the (possibly shrunk) support; accept only
        // if the objective does not increase.
        support = new_support;
        let (u_new, rep_new) = solve_on_set_opts(&support, f, p, opts)?;
        let e_new = rep_new.final_energy + lambda_coef * support_measure(&u_new);
        if e_new <= e_obj + 1e-14 * (1.0 + e_obj.abs()) {
            u = u_new;
            report = rep_new;
            if e_new < e_obj {
                history.push(e_new);
            }
            e_obj = e_new;
        } else {
            break;
        }
    }

    let omega = superlevel_mask(&u, support_threshold(&u)).intersect(domain);
    Ok(FbOutcome { u, omega, report, objective: e_obj, history })
}

/// Outcome of the density-control optimization.
#[derive(Debug, Clone)]
pub struct ControlOutcome {
    /// Final relaxed density: 0 on kept nodes, B_cap on removed nodes and
    /// outside the design region.
    pub beta: MeasureField,
    /// Kept region: {beta < B_cap} intersected with {u > threshold}.
    pub omega: DomainMask,
    /// State on omega from the exact-Dirichlet verification solve.
    pub u: GridFunction,
    /// Report of the verification solve.
    pub report: SolveReport,
    /// J of the returned configuration: -int g u + lambda |omega|.
    pub objective: f64,
    /// Objective values in evaluation order (inner smooth objectives for
    /// lambda = 0; scanned totals for lambda > 0).
    pub history: Vec<f64>,
    /// False if any adjoint solve failed to reach its tolerance.
    pub adjoint_converged: bool,
    /// The finite stand-in for +inf used during the smooth phase.
    pub b_cap: f64,
}

const CONTROL_INNER_MAX: usize = 60;
const ADJOINT_TOL: f64 = 1e-10;
const ADJOINT_MAX_ITERS: usize = 2_000;

fn b_cap_for(f: &GridFunction) -> f64 {
    1e6 * f.max_abs().max(1.0)
}

/// Discrete smooth cost term -int g u with trapezoid node weights.
fn smooth_cost(g: &GridFunction, u: &GridFunction) -> f64 {
    let w = u.grid.node_weights();
    let mut j = 0.0;
    for k in 0..u.values.len() {
        j -= w[k] * g.values[k] * u.values[k];
    }
    j
}

/// One adjoint solve: H zeta = w (.) g at the linearization point u, by
/// preconditioned conjugate gradients. Returns (zeta, converged).
fn adjoint_solve(
    sys: &System,
    u: &[f64],
    eps: f64,
    g_cost: &GridFunction,
) -> (Vec<f64>, bool) {
    let n = u.len();
    let mut b = vec![0.0; n];
    for k in 0..n {
        if sys.free[k] {
            b[k] = sys.w[k] * g_cost.values[k];
        }
    }
    let norm_b = b.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let mut x = vec![0.0; n];
    if norm_b == 0.0 {
        return (x, true);
    }
    let op = LinearizedOp::build(sys, u, eps);
    let pre = Metric::build(sys);

    let mut r = b.clone();
    let mut z = vec![0.0; n];
    pre.apply_inverse(&r, &mut z);
    for k in 0..n {
        if !sys.free[k] {
            z[k] = 0.0;
        }
    }
    let mut p = z.clone();
    let mut hp = vec![0.0; n];
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let mut rz = dot(&r, &z);
    let tol = ADJOINT_TOL * norm_b;
    for _ in 0..ADJOINT_MAX_ITERS {
        op.apply(&p, &mut hp);
        let php = dot(&p, &hp);
        if php <= 0.0 {
            return (x, false);
        }
        let alpha = rz / php;
        let mut rmax = 0.0f64;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * hp[k];
            rmax = rmax.max(r[k].abs());
        }
        if rmax <= tol {
            return (x, true);
        }
        pre.apply_inverse(&r, &mut z);
        for k in 0..n {
            if !sys.free[k] {
                z[k] = 0.0;
            }
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    (x, false)
}

/// Volume projection: keep the nodes with the smallest shifted values
/// (ties by node index) whose prefix cell-measure stays within the budget;
/// all other design-region nodes go to B_cap. This is the exact limit of
/// bisecting on an additive shift of the projection threshold.
fn project_volume(
    x: &[f64],
    domain: &DomainMask,
    budget: f64,
    b_cap: f64,
) -> (Vec<f64>, DomainMask) {
    let g = &domain.grid;
    let n = g.node_count();
    let mut order: Vec<usize> = (0..n).filter(|&k| domain.inside[k]).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));

    let needed = if g.dim == 1 { 2usize } else { 4 };
    let vol = g.cell_vol();
    let mut cell_count = vec![0u8; g.cell_count()];
    let mut alive = vec![false; n];
    let mut used = 0.0;

    // Cells adjacent to node (i, j).
    let cells_of = |k: usize| -> [Option<usize>; 4] {
        let (i, j) = g.coords(k);
        let mut out = [None; 4];
        if g.dim == 1 {
            if i > 0 {
                out[0] = Some(i - 1);
            }
            if i + 1 < g.n[0] {
                out[1] = Some(i);
            }
        } else {
            let ncx = g.n[0] - 1;
            let mut slot = 0;
            for dj in 0..2usize {
                for di in 0..2usize {
                    if i + di >= 1 && i + di <= ncx && j + dj >= 1 && j + dj < g.n[1] {
                        out[slot] = Some((j + dj - 1) * ncx + (i + di - 1));
                    }
                    slot += 1;
                }
            }
        }
        out
    };

    'sweep: for &k in &order {
        let mut completed = 0usize;
        for c in cells_of(k).iter().flatten() {
            if cell_count[*c] + 1 == needed as u8 {
                completed += 1;
            }
        }
        let new_used = used + completed as f64 * vol;
        if new_used > budget + 1e-12 {
            break 'sweep;
        }
        for c in cells_of(k).iter().flatten() {
            cell_count[*c] += 1;
        }
        alive[k] = true;
        used = new_used;
    }

    let mut beta = vec![b_cap; n];
    for k in 0..n {
        if alive[k] {
            beta[k] = x[k].clamp(0.0, b_cap);
        }
    }
    (beta, DomainMask { grid: *g, inside: alive })
}

struct InnerOutcome {
    beta: Vec<f64>,
    alive: DomainMask,
    u: GridFunction,
    j_smooth: f64,
    adjoint_ok: bool,
    history: Vec<f64>,
}

/// The lambda = 0 inner solver: projected-gradient descent on beta under a
/// fixed volume budget.
fn inner_volume_solve(
    f: &GridFunction,
    cost: &CostSpec,
    domain: &DomainMask,
    budget: f64,
    b_cap: f64,
    opts: &SolveOpts,
    warm: Option<&GridFunction>,
) -> Result<InnerOutcome> {
    let grid = f.grid;
    let n = grid.node_count();
    let p = cost.p;
    let mut history = Vec::new();
    let mut adjoint_ok = true;

    // Zero budget: nothing stays alive.
    if budget <= 0.0 {
        let beta = vec![b_cap; n];
        let alive = DomainMask { grid, inside: vec![false; n] };
        let mf = MeasureField { grid, beta: beta.clone() };
        let prob = StateProblem::on_domain(domain, f.clone(), p, mf)?;
        let (u, _) = solve_state(&prob, opts)?;
        let j_smooth = smooth_cost(&cost.g, &u);
        history.push(j_smooth);
        return Ok(InnerOutcome { beta, alive, u, j_smooth, adjoint_ok, history });
    }

    // Start from the unconstrained relaxed problem (beta = 0 inside the
    // region); the first projection makes it feasible.
    let mut beta = vec![0.0; n];
    for k in 0..n {
        if !domain.inside[k] {
            beta[k] = b_cap;
        }
    }
    let mut alive = domain.clone();
    let mut u_prev: Option<GridFunction> = warm.cloned();

    let solve_at = |beta: &[f64], start: Option<&GridFunction>| -> Result<(GridFunction, f64)> {
        let mf = MeasureField { grid, beta: beta.to_vec() };
        let prob = StateProblem::on_domain(domain, f.clone(), p, mf)?;
        let (u, _) = match start {
            Some(w) => solve_state_warm(&prob, opts, w)?,
            None => solve_state(&prob, opts)?,
        };
        let j = smooth_cost(&cost.g, &u);
        Ok((u, j))
    };

    let mut it = 0;
    let (u, j_smooth) = loop {
        let (u, j_smooth) = solve_at(&beta, u_prev.as_ref())?;
        history.push(j_smooth);
        u_prev = Some(u.clone());

        if it >= CONTROL_INNER_MAX {
            break (u, j_smooth);
        }
        it += 1;

        let mf = MeasureField { grid, beta: beta.clone() };
        let prob = StateProblem::on_domain(domain, f.clone(), p, mf)?;
        let sys = System::build(&prob, 0.0);
        let eps = state::eps_regularization(p, f.max_abs());
        let (zeta, cg_ok) = adjoint_solve(&sys, &u.values, eps, &cost.g);
        adjoint_ok &= cg_ok;

        // Sensitivity dJ/dbeta_k = w_k |u_k|^{p-2} u_k zeta_k.
        let mut s = vec![0.0; n];
        let mut s_max = 0.0f64;
        for k in 0..n {
            if domain.inside[k] {
                let uk = u.values[k];
                let up = if p == 2.0 { uk } else { uk.abs().powf(p - 1.0) * uk.signum() };
                s[k] = sys.w[k] * up * zeta[k];
                s_max = s_max.max(s[k].abs());
            }
        }

        let (beta_new, alive_new) = if s_max == 0.0 {
            // No signal (g = 0 or u = 0): any feasible density is optimal;
            // project the current one and stop.
            project_volume(&beta, domain, budget, b_cap)
        } else {
            let tau = b_cap / (4.0 * s_max);
            let mut x = beta.clone();
            for k in 0..n {
                if domain.inside[k] {
                    x[k] = beta[k] - tau * s[k];
                }
            }
            project_volume(&x, domain, budget, b_cap)
        };

        let stable = alive_new.inside == alive.inside;
        beta = beta_new;
        alive = alive_new;
        if (stable && it >= 2) || s_max == 0.0 {
            // Support settled; re-solve once at the final density.
            let (u, j) = solve_at(&beta, Some(&u))?;
            history.push(j);
            break (u, j);
        }
    };

    Ok(InnerOutcome { beta, alive, u, j_smooth, adjoint_ok, history })
}

/// Optimize the density control for the model cost. See the module docs
/// for the scheme; `cost.lambda > 0` adds an outer scalar search over
/// volume budgets.
pub fn control_optimize(
    f: &GridFunction,
    cost: &CostSpec,
    domain: &DomainMask,
    opts: &SolveOpts,
) -> Result<ControlOutcome> {
    if f.grid != domain.grid {
        return Err(Error::invalid("control_optimize: f and domain grids differ"));
    }
    if f.values.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::invalid("control_optimize: f must be >= 0"));
    }
    cost.validate(domain)?;
    let b_cap = b_cap_for(f);
    let mut history = Vec::new();

    let best = if cost.lambda == 0.0 {
        let inner = inner_volume_solve(f, cost, domain, cost.m, b_cap, opts, None)?;
        history.extend_from_slice(&inner.history);
        inner
    } else {
        // Outer scalar search over volume budgets v: the empty candidate
        // plus a coarse scan, then two refinement rounds around the best.
        let scan = 12usize;
        let mut evaluated: Vec<(f64, f64)> = Vec::new(); // (v, total)
        let mut best: Option<(f64, InnerOutcome)> = None;
        let mut warm: Option<GridFunction> = None;
        let try_budget = |v: f64,
                              warm: &mut Option<GridFunction>,
                              best: &mut Option<(f64, InnerOutcome)>,
                              history: &mut Vec<f64>,
                              evaluated: &mut Vec<(f64, f64)>|
         -> Result<()> {
            if evaluated.iter().any(|&(ev, _)| (ev - v).abs() <= 1e-12 * cost.m) {
                return Ok(());
            }
            let inner = inner_volume_solve(f, cost, domain, v, b_cap, opts, warm.as_ref())?;
            let total = inner.j_smooth + cost.lambda * measure(&inner.alive);
            history.push(total);
            evaluated.push((v, total));
            *warm = Some(inner.u.clone());
            let better = match best {
                None => true,
                Some((bt, _)) => total < *bt,
            };
            if better {
                *best = Some((total, inner));
            }
            Ok(())
        };

        try_budget(0.0, &mut warm, &mut best, &mut history, &mut evaluated)?;
        for j in 1..=scan {
            let v = cost.m * j as f64 / scan as f64;
            try_budget(v, &mut warm, &mut best, &mut history, &mut evaluated)?;
        }
        let mut step = cost.m / (2 * scan) as f64;
        for _ in 0..2 {
            let v_best = evaluated
                .iter()
                .cloned()
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .map(|(v, _)| v)
                .unwrap();
            for v in [v_best - step, v_best + step] {
                if v > 0.0 && v <= cost.m {
                    try_budget(v, &mut warm, &mut best, &mut history, &mut evaluated)?;
                }
            }
            step *= 0.5;
        }
        best.unwrap().1
    };

    // Verification phase: convert removed nodes to exact Dirichlet and
    // re-solve on the kept region.
    let thresh = support_threshold(&best.u);
    let omega = best.alive.intersect(&superlevel_mask(&best.u, thresh));
    let (u_final, report) = solve_on_set_opts(&omega, f, cost.p, opts)?;
    let objective = smooth_cost(&cost.g, &u_final) + cost.lambda * measure(&omega);

    Ok(ControlOutcome {
        beta: MeasureField { grid: f.grid, beta: best.beta },
        omega,
        u: u_final,
        report,
        objective,
        history,
        adjoint_converged: best.adjoint_ok,
        b_cap,
    })
}

/// Smooth part of the control objective at a given density (for derivative
/// checks): J_smooth(beta) = -int g u_beta.
pub fn control_smooth_objective(
    f: &GridFunction,
    cost: &CostSpec,
    domain: &DomainMask,
    beta: &MeasureField,
    opts: &SolveOpts,
) -> Result<f64> {
    let prob = StateProblem::on_domain(domain, f.clone(), cost.p, beta.clone())?;
    let (u, _) = solve_state(&prob, opts)?;
    Ok(smooth_cost(&cost.g, &u))
}

/// Adjoint-based gradient of the smooth control objective with respect to
/// the nodal density. Returns the sensitivity field and whether the
/// adjoint solve converged.
pub fn control_sensitivity(
    f: &GridFunction,
    cost: &CostSpec,
    domain: &DomainMask,
    beta: &MeasureField,
    opts: &SolveOpts,
) -> Result<(Vec<f64>, bool)> {
    let prob = StateProblem::on_domain(domain, f.clone(), cost.p, beta.clone())?;
    let (u, _) = solve_state(&prob, opts)?;
    let sys = System::build(&prob, 0.0);
    let eps = state::eps_regularization(cost.p, f.max_abs());
    let (zeta, ok) = adjoint_solve(&sys, &u.values, eps, &cost.g);
    let mut s = vec![0.0; u.values.len()];
    for k in 0..s.len() {
        let uk = u.values[k];
        let up = if cost.p == 2.0 { uk } else { uk.abs().powf(cost.p - 1.0) * uk.signum() };
        s[k] = sys.w[k] * up * zeta[k];
    }
    Ok((s, ok))
}

/// Which of the toolkit's solvability conditions the given data satisfies.
#[derive(Debug, Clone)]
pub struct HypothesisReport {
    /// p exceeds the dimension: optimal shapes exist and are open.
    pub existence_open_p_gt_d: bool,
    /// Cost data regular enough for existence among quasi-open sets.
    pub existence_quasiopen: bool,
    /// Strict penalization plus a positive lower bound g >= c f: the
    /// optimal set is open.
    pub openness: bool,
    /// Strict penalization with signs under control: the optimal set has
    /// finite perimeter.
    pub finite_perimeter: bool,
    /// One line per checked inequality, with computed margins.
    pub reasons: Vec<String>,
}

/// Evaluate the flags for the model cost in dimension d.
pub fn check_hypotheses(f: &GridFunction, cost: &CostSpec, d: usize) -> HypothesisReport {
    let mut reasons = Vec::new();
    let d_real = d as f64;

    let existence_open_p_gt_d = cost.p > d_real;
    reasons.push(if existence_open_p_gt_d {
        format!(
            "existence_open_p_gt_d: p = {} > d = {} (margin {})",
            fmt_f64(cost.p),
            d,
            fmt_f64(cost.p - d_real)
        )
    } else {
        format!("existence_open_p_gt_d: fails p > d (p = {}, d = {})", fmt_f64(cost.p), d)
    });

    let g_nonneg = cost.g.values.iter().all(|&v| v >= 0.0);
    let existence_quasiopen = g_nonneg && cost.ell > 1.0;
    reasons.push(if existence_quasiopen {
        format!(
            "existence_quasiopen: g >= 0 nodewise and ell = {} > 1 (margin {})",
            fmt_f64(cost.ell),
            fmt_f64(cost.ell - 1.0)
        )
    } else if !g_nonneg {
        "existence_quasiopen: fails g >= 0 (negative nodes present)".to_string()
    } else {
        format!("existence_quasiopen: fails ell > 1 (ell = {})", fmt_f64(cost.ell))
    });

    // Best constant c with g >= c f nodewise, over nodes where f > 0.
    let mut c_best = f64::INFINITY;
    for k in 0..f.values.len() {
        if f.values[k] > 0.0 {
            c_best = c_best.min(cost.g.values[k] / f.values[k]);
        }
    }
    let q_bound = d_real / cost.p;
    let openness = cost.lambda > 0.0 && cost.q > q_bound && c_best > 0.0;
    if openness {
        reasons.push(format!(
            "openness: lambda = {} > 0, q = {} > d/p = {}, best c with g >= c f is {}",
            fmt_f64(cost.lambda),
            fmt_f64(cost.q),
            fmt_f64(q_bound),
            if c_best.is_finite() { fmt_f64(c_best) } else { "inf (f = 0 wherever tested)".into() }
        ));
    } else if !(cost.lambda > 0.0) {
        reasons.push("openness: fails lambda > 0".to_string());
    } else if !(cost.q > q_bound) {
        reasons.push(format!(
            "openness: fails q > d/p (q = {}, d/p = {})",
            fmt_f64(cost.q),
            fmt_f64(q_bound)
        ));
    } else {
        reasons.push("openness: no finite c with f <= Cg (f > 0 where g = 0)".to_string());
    }

    let f_nonneg = f.values.iter().all(|&v| v >= 0.0);
    let finite_perimeter = cost.lambda > 0.0 && f_nonneg;
    reasons.push(if finite_perimeter {
        format!(
            "finite_perimeter: lambda = {} > 0 and f >= 0 with |g| as the comparison weight",
            fmt_f64(cost.lambda)
        )
    } else if !(cost.lambda > 0.0) {
        "finite_perimeter: fails lambda > 0".to_string()
    } else {
        "finite_perimeter: fails f >= 0 (negative nodes present)".to_string()
    });

    HypothesisReport {
        existence_open_p_gt_d,
        existence_quasiopen,
        openness,
        finite_perimeter,
        reasons,
    }
}
