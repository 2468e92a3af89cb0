//! Capacitary measures as nodal densities, the distance between them, and
//! the comparison-principle check.
//!
//! A measure is a per-node coefficient beta in [0, +inf]; +inf pins the
//! state to zero there (relaxed Dirichlet condition), finite values act as
//! an absorption term. The distance between two measures is defined through
//! the states they induce for unit right-hand side:
//!
//! ```text
//! d(mu, nu) = || u_mu - u_nu ||_{L^p}
//! ```
//!
//! which metrizes the variational convergence the state problem is
//! continuous under.

use crate::error::{Error, Result};
use crate::grid::{DomainMask, Grid, GridFunction};
use crate::state::{solve_state, SolveOpts, SolveReport, StateProblem};

/// Nonnegative nodal density with +inf allowed (hard Dirichlet nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureField {
    pub grid: Grid,
    pub beta: Vec<f64>,
}

impl MeasureField {
    pub fn zeros(grid: &Grid) -> MeasureField {
        MeasureField { grid: *grid, beta: vec![0.0; grid.node_count()] }
    }

    pub fn constant(grid: &Grid, value: f64) -> Result<MeasureField> {
        let m = MeasureField { grid: *grid, beta: vec![value; grid.node_count()] };
        m.validate()?;
        Ok(m)
    }

    /// +inf on the nodes of `mask`, zero elsewhere.
    pub fn infinity_on(mask: &DomainMask) -> MeasureField {
        let beta = mask
            .inside
            .iter()
            .map(|&inside| if inside { f64::INFINITY } else { 0.0 })
            .collect();
        MeasureField { grid: mask.grid, beta }
    }

    /// The measure representing a plain open set: zero on `omega`, +inf on
    /// its complement.
    pub fn of_domain(omega: &DomainMask) -> MeasureField {
        MeasureField::infinity_on(&omega.complement())
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.len() != self.grid.node_count() {
            return Err(Error::invalid("measure field length does not match its grid"));
        }
        for &b in &self.beta {
            if b.is_nan() || b < 0.0 {
                return Err(Error::invalid("measure entries must be in [0, +inf]"));
            }
        }
        Ok(())
    }

    /// Mask of nodes carrying an infinite density.
    pub fn inf_mask(&self) -> DomainMask {
        DomainMask {
            grid: self.grid,
            inside: self.beta.iter().map(|b| b.is_infinite()).collect(),
        }
    }

    /// Mask of nodes where the density is finite.
    pub fn finite_mask(&self) -> DomainMask {
        DomainMask {
            grid: self.grid,
            inside: self.beta.iter().map(|b| b.is_finite()).collect(),
        }
    }

    /// Nodewise comparison self >= other (with inf >= anything).
    pub fn ge(&self, other: &MeasureField) -> Result<bool> {
        if self.grid != other.grid {
            return Err(Error::invalid("cannot compare measures on different grids"));
        }
        Ok(self
            .beta
            .iter()
            .zip(&other.beta)
            .all(|(&a, &b)| a >= b || (a.is_infinite() && b.is_infinite())))
    }
}

pub(crate) fn env_thread_count() -> usize {
    std::env::var("PSHAPE_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// Solve two independent state problems, side by side when `threads >= 2`.
pub(crate) fn solve_pair(
    prob_a: &StateProblem,
    prob_b: &StateProblem,
    opts: &SolveOpts,
    threads: usize,
) -> Result<((GridFunction, SolveReport), (GridFunction, SolveReport))> {
    if threads >= 2 {
        let (ra, rb) = std::thread::scope(|s| {
            let handle = s.spawn(|| solve_state(prob_a, opts));
            let rb = solve_state(prob_b, opts);
            (handle.join().expect("state solve thread panicked"), rb)
        });
        Ok((ra?, rb?))
    } else {
        Ok((solve_state(prob_a, opts)?, solve_state(prob_b, opts)?))
    }
}

/// Distance between two measures on the design region `domain`, through
/// the states they induce for unit right-hand side.
pub fn gamma_distance(
    mu: &MeasureField,
    nu: &MeasureField,
    p: f64,
    domain: &DomainMask,
) -> Result<f64> {
    let f = GridFunction::constant(&domain.grid, 1.0);
    gamma_distance_with(mu, nu, p, domain, &f)
}

/// Same distance with a caller-supplied right-hand side.
pub fn gamma_distance_with(
    mu: &MeasureField,
    nu: &MeasureField,
    p: f64,
    domain: &DomainMask,
    f: &GridFunction,
) -> Result<f64> {
    gamma_distance_full(mu, nu, p, domain, f).map(|(d, _, _)| d)
}

/// Distance plus the two state-solve reports (for callers that must act on
/// non-convergence).
pub fn gamma_distance_full(
    mu: &MeasureField,
    nu: &MeasureField,
    p: f64,
    domain: &DomainMask,
    f: &GridFunction,
) -> Result<(f64, SolveReport, SolveReport)> {
    mu.validate()?;
    nu.validate()?;
    if mu.grid != domain.grid || nu.grid != domain.grid || f.grid != domain.grid {
        return Err(Error::invalid("gamma_distance: all inputs must share one grid"));
    }
    let prob_mu = StateProblem::on_domain(domain, f.clone(), p, mu.clone())?;
    let prob_nu = StateProblem::on_domain(domain, f.clone(), p, nu.clone())?;
    let opts = SolveOpts::default();
    let ((u_mu, rep_mu), (u_nu, rep_nu)) =
        solve_pair(&prob_mu, &prob_nu, &opts, env_thread_count())?;
    let diff = GridFunction {
        grid: domain.grid,
        values: u_mu
            .values
            .iter()
            .zip(&u_nu.values)
            .map(|(a, b)| a - b)
            .collect(),
    };
    // Both states vanish outside the design region, so the L^p norm over
    // the whole box is the L^p norm over the region.
    let d = crate::grid::lp_norm(&diff, p, &domain.grid.full_mask())?;
    Ok((d, rep_mu, rep_nu))
}

/// Outcome of a comparison-principle check: both solves plus the largest
/// signed violation of u1 <= u2.
#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    /// max over nodes of (u1 - u2); nonpositive means the principle holds.
    pub max_violation: f64,
    /// Node index attaining the maximum.
    pub worst_node: usize,
    pub report1: SolveReport,
    pub report2: SolveReport,
}

/// Comparison principle: a larger measure and a smaller right-hand side
/// must produce a smaller state. Requires mu1 >= mu2 and f1 <= f2
/// nodewise; solves both problems and reports the worst violation of
/// u1 <= u2.
pub fn check_monotonicity(
    mu1: &MeasureField,
    mu2: &MeasureField,
    f1: &GridFunction,
    f2: &GridFunction,
    p: f64,
    domain: &DomainMask,
) -> Result<MonotonicityReport> {
    if !mu1.ge(mu2)? {
        return Err(Error::invalid("check_monotonicity: requires mu1 >= mu2 nodewise"));
    }
    if f1.grid != f2.grid || f1.grid != domain.grid {
        return Err(Error::invalid("check_monotonicity: inputs must share one grid"));
    }
    if !f1.values.iter().zip(&f2.values).all(|(a, b)| a <= b) {
        return Err(Error::invalid("check_monotonicity: requires f1 <= f2 nodewise"));
    }
    let prob1 = StateProblem::on_domain(domain, f1.clone(), p, mu1.clone())?;
    let prob2 = StateProblem::on_domain(domain, f2.clone(), p, mu2.clone())?;
    let opts = SolveOpts::default();
    let ((u1, report1), (u2, report2)) =
        solve_pair(&prob1, &prob2, &opts, env_thread_count())?;
    let mut max_violation = f64::NEG_INFINITY;
    let mut worst_node = 0;
    for k in 0..u1.values.len() {
        let v = u1.values[k] - u2.values[k];
        if v > max_violation {
            max_violation = v;
            worst_node = k;
        }
    }
    Ok(MonotonicityReport { max_violation, worst_node, report1, report2 })
}
