//! End-to-end acceptance suite. Each test covers one numbered criterion,
//! prints a single `criterion N: PASS/FAIL — ...` line with the measured
//! values (run with `-- --nocapture` to see them on success), and then
//! asserts. Tolerances and runtime budgets are pinned as constants next to
//! each criterion.

use std::sync::OnceLock;
use std::time::Instant;

use pshape::capmeasure::{check_monotonicity, gamma_distance, MeasureField};
use pshape::cli;
use pshape::geometry::{finite_perimeter_diagnostic, mask_perimeter, measure};
use pshape::grid::{disc_mask, Grid, GridFunction};
use pshape::optimizer::{self, CostSpec, FbOutcome};
use pshape::state::{solve_on_set, SolveOpts};
use pshape::supremal;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reference solver for the p = 2 problem, kept deliberately independent of
/// the library: it assembles the classic five-point matrix on the interior
/// of the unit square and solves it with its own banded Cholesky
/// factorization. Nothing here touches the crate under test.
mod oracle {
    /// Solve A u = h^2 f on the (n-2)^2 interior nodes of an n x n grid on
    /// [0,1]^2, where A is the five-point Laplacian stencil (diagonal 4,
    /// neighbors -1) and u = 0 on the boundary. Returns the interior values
    /// in row-major order (x fastest).
    pub fn solve_p2_dirichlet(n: usize, f: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
        let h = 1.0 / (n - 1) as f64;
        let m = n - 2;
        let nn = m * m;
        let bw = m; // lower bandwidth of the row-major interior ordering
        let stride = bw + 1;
        // band[r * stride + d] holds entry (r, r - d) of the matrix, then of
        // its Cholesky factor L.
        let mut band = vec![0.0f64; nn * stride];
        let mut rhs = vec![0.0f64; nn];
        for j in 0..m {
            for i in 0..m {
                let r = j * m + i;
                band[r * stride] = 4.0;
                if i > 0 {
                    band[r * stride + 1] = -1.0;
                }
                if j > 0 {
                    band[r * stride + bw] = -1.0;
                }
                let (x, y) = ((i + 1) as f64 * h, (j + 1) as f64 * h);
                rhs[r] = h * h * f(x, y);
            }
        }
        // In-place banded Cholesky, column by column: A = L L^T.
        for c in 0..nn {
            let mut diag = band[c * stride];
            for k in c.saturating_sub(bw)..c {
                let l = band[c * stride + (c - k)];
                diag -= l * l;
            }
            assert!(diag > 0.0, "oracle matrix must be positive definite");
            let diag = diag.sqrt();
            band[c * stride] = diag;
            for r in c + 1..(c + bw + 1).min(nn) {
                let mut sum = band[r * stride + (r - c)];
                let lo = r.saturating_sub(bw).max(c.saturating_sub(bw));
                for k in lo..c {
                    sum -= band[r * stride + (r - k)] * band[c * stride + (c - k)];
                }
                band[r * stride + (r - c)] = sum / diag;
            }
        }
        // Forward then back substitution.
        let mut y = rhs;
        for r in 0..nn {
            let mut sum = y[r];
            for k in r.saturating_sub(bw)..r {
                sum -= band[r * stride + (r - k)] * y[k];
            }
            y[r] = sum / band[r * stride];
        }
        let mut u = y;
        for r in (0..nn).rev() {
            let mut sum = u[r];
            for c in r + 1..(r + bw + 1).min(nn) {
                sum -= band[c * stride + (c - r)] * u[c];
            }
            u[r] = sum / band[r * stride];
        }
        u
    }
}

/// The oracle must stand on its own: for a right-hand side built from a
/// discrete Laplacian eigenvector, the banded solve has to reproduce that
/// eigenvector to near machine precision.
#[test]
fn oracle_self_check() {
    let n = 33;
    let h = 1.0 / (n - 1) as f64;
    let mu = 4.0 - 4.0 * (std::f64::consts::PI * h).cos();
    let f = move |x: f64, y: f64| {
        mu / (h * h) * (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin()
    };
    let u = oracle::solve_p2_dirichlet(n, &f);
    let m = n - 2;
    let mut worst = 0.0f64;
    for j in 0..m {
        for i in 0..m {
            let (x, y) = ((i + 1) as f64 * h, (j + 1) as f64 * h);
            let exact = (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin();
            worst = worst.max((u[j * m + i] - exact).abs());
        }
    }
    assert!(worst < 1e-11, "oracle self-check error {worst:.3e}");
}

fn verdict(criterion: usize, ok: bool, detail: &str) {
    println!("criterion {}: {} — {}", criterion, if ok { "PASS" } else { "FAIL" }, detail);
    assert!(ok, "criterion {criterion} failed: {detail}");
}

/// Criterion 1: the supremal example. The closed-form lens radius for
/// volume 2 is 1.351 to three decimals, the grid comparison at n = 257
/// declares the lens the winner, its sup cost is within 2h of -r_m, and
/// the margin over the centered disc is at least 0.5.
#[test]
fn criterion_01_lens_example() {
    const BUDGET_S: f64 = 30.0;
    const R_REF: f64 = 1.351;
    let t0 = Instant::now();

    let dir = tempfile::tempdir().unwrap();
    let out = cli::run_inf_lens(2.0, 257, dir.path()).unwrap();
    let stdout = out.stdout.unwrap_or_default();

    let cmp = supremal::verify_lens_optimality(2.0, 257).unwrap();
    let h = 2.0 / 256.0;
    let v_best = cmp
        .candidates
        .iter()
        .find(|(name, _)| *name == cmp.winner)
        .map(|&(_, v)| v)
        .unwrap();
    let sup_gap = (v_best + cmp.r_m).abs();
    let dt = t0.elapsed().as_secs_f64();

    let ok = out.exit == 0
        && stdout.contains("\"winner\": \"lens\"")
        && (cmp.r_m - R_REF).abs() <= 1e-3
        && cmp.winner == "lens"
        && sup_gap <= 2.0 * h
        && cmp.margin_over_centered >= 0.5
        && dt <= BUDGET_S;
    verdict(
        1,
        ok,
        &format!(
            "r_m = {:.6} (ref {} ± 1e-3), winner = {}, |sup + r_m| = {:.2e} (≤ 2h = {:.2e}), \
             margin over centered disc = {:.4} (≥ 0.5), {:.1}s (≤ {}s)",
            cmp.r_m, R_REF, cmp.winner, sup_gap, 2.0 * h, cmp.margin_over_centered, dt, BUDGET_S
        ),
    );
}

/// Criterion 2: state-solver oracles. 1D torsion against the closed form
/// for p in {1.5, 2, 3} at n = 257 (sup error ≤ 2e-3), and the p = 2 2D
/// solve against the independent banded-Cholesky oracle at n = 65
/// (nodewise ≤ 1e-8).
#[test]
fn criterion_02_state_oracles() {
    const BUDGET_S: f64 = 60.0;
    const TOL_1D: f64 = 2e-3;
    const TOL_2D: f64 = 1e-8;
    let t0 = Instant::now();

    let g1 = Grid::line(0.0, 1.0, 257).unwrap();
    let d1 = g1.interior_mask();
    let f1 = GridFunction::constant(&g1, 1.0);
    let mut sup_1d = Vec::new();
    for &p in &[1.5, 2.0, 3.0] {
        let (u, _) = solve_on_set(&d1, &f1, p).unwrap();
        let q = p / (p - 1.0);
        let mut worst = 0.0f64;
        for k in 0..g1.node_count() {
            let x = g1.node_pos(k)[0];
            let exact = (p - 1.0) / p * (0.5f64.powf(q) - (x - 0.5).abs().powf(q));
            worst = worst.max((u.values[k] - exact).abs());
        }
        sup_1d.push((p, worst));
    }

    let n = 65;
    let g2 = Grid::rect([0.0, 0.0], [1.0, 1.0], [n, n]).unwrap();
    let d2 = g2.interior_mask();
    let f_fn = |x: f64, y: f64| 1.0 + x * x + 0.5 * (3.0 * y).sin();
    let f2 = GridFunction::from_fn(&g2, |pos| f_fn(pos[0], pos[1]));
    let (u2, rep2) = solve_on_set(&d2, &f2, 2.0).unwrap();
    let reference = oracle::solve_p2_dirichlet(n, &f_fn);
    let m = n - 2;
    let mut worst_2d = 0.0f64;
    for j in 0..m {
        for i in 0..m {
            let lib = u2.values[g2.idx(i + 1, j + 1)];
            worst_2d = worst_2d.max((lib - reference[j * m + i]).abs());
        }
    }
    let dt = t0.elapsed().as_secs_f64();

    let ok = sup_1d.iter().all(|&(_, e)| e <= TOL_1D)
        && worst_2d <= TOL_2D
        && rep2.converged
        && dt <= BUDGET_S;
    verdict(
        2,
        ok,
        &format!(
            "1D torsion sup errors {} (≤ {:.0e}); 2D p=2 vs banded oracle {:.2e} (≤ {:.0e}); \
             {:.1}s (≤ {}s)",
            sup_1d
                .iter()
                .map(|&(p, e)| format!("p={p}: {e:.2e}"))
                .collect::<Vec<_>>()
                .join(", "),
            TOL_1D,
            worst_2d,
            TOL_2D,
            dt,
            BUDGET_S
        ),
    );
}

/// Criterion 3: comparison principle. 50 randomized measure-ordered pairs
/// (beta1 >= beta2, shared f >= 0) and 50 load-ordered pairs (f1 <= f2,
/// shared beta) on 65^2 grids; the positive part of max(u1 - u2) stays
/// below 1e-6 in every case.
#[test]
fn criterion_03_monotonicity_suite() {
    const BUDGET_S: f64 = 300.0;
    const TOL: f64 = 1e-6;
    let t0 = Instant::now();

    let g = Grid::rect([0.0, 0.0], [1.0, 1.0], [65, 65]).unwrap();
    let domain = g.interior_mask();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);

    let inf_patch = |mu: &mut MeasureField, rng: &mut ChaCha8Rng| {
        let c = [0.2 + 0.6 * rng.gen::<f64>(), 0.2 + 0.6 * rng.gen::<f64>()];
        let r = 0.08 + 0.15 * rng.gen::<f64>();
        for k in 0..mu.grid.node_count() {
            let pos = mu.grid.node_pos(k);
            if (pos[0] - c[0]).powi(2) + (pos[1] - c[1]).powi(2) < r * r {
                mu.beta[k] = f64::INFINITY;
            }
        }
    };

    let mut worst = f64::NEG_INFINITY;
    for pair in 0..100 {
        let p = 2.0;
        let (mu1, mu2, f_lo, f_hi);
        if pair < 50 {
            // Measure-ordered: beta1 = beta2 + bump (+ optional hard patch).
            let mut b2 = MeasureField::zeros(&g);
            for v in b2.beta.iter_mut() {
                *v = 5.0 * rng.gen::<f64>();
            }
            let mut b1 = b2.clone();
            for v in b1.beta.iter_mut() {
                *v += 3.0 * rng.gen::<f64>();
            }
            if pair % 5 == 0 {
                inf_patch(&mut b1, &mut rng);
            }
            if pair % 10 == 5 {
                // Shared hard patch on both sides.
                let save = b1.clone();
                inf_patch(&mut b1, &mut rng);
                for k in 0..g.node_count() {
                    if b1.beta[k].is_infinite() && save.beta[k].is_finite() {
                        b2.beta[k] = f64::INFINITY;
                    }
                }
            }
            let mut f = GridFunction::zeros(&g);
            for v in f.values.iter_mut() {
                *v = 2.0 * rng.gen::<f64>();
            }
            mu1 = b1;
            mu2 = b2;
            f_lo = f.clone();
            f_hi = f;
        } else {
            // Load-ordered: f2 = f1 + bump, shared beta.
            let mut b = MeasureField::zeros(&g);
            for v in b.beta.iter_mut() {
                *v = 4.0 * rng.gen::<f64>();
            }
            if pair % 5 == 0 {
                inf_patch(&mut b, &mut rng);
            }
            let mut f1 = GridFunction::zeros(&g);
            for v in f1.values.iter_mut() {
                *v = 2.0 * rng.gen::<f64>();
            }
            let mut f2 = f1.clone();
            for v in f2.values.iter_mut() {
                *v += 1.5 * rng.gen::<f64>();
            }
            mu1 = b.clone();
            mu2 = b;
            f_lo = f1;
            f_hi = f2;
        }
        let rep = check_monotonicity(&mu1, &mu2, &f_lo, &f_hi, p, &domain).unwrap();
        worst = worst.max(rep.max_violation);
        assert!(
            rep.max_violation.max(0.0) <= TOL,
            "pair {pair} (p = {p}) violated the comparison principle by {:.3e}",
            rep.max_violation
        );
    }
    let dt = t0.elapsed().as_secs_f64();

    let ok = worst.max(0.0) <= TOL && dt <= BUDGET_S;
    verdict(
        3,
        ok,
        &format!(
            "100 randomized pairs, worst signed violation {:.3e} (positive part ≤ {:.0e}), \
             {:.1}s (≤ {}s)",
            worst, TOL, dt, BUDGET_S
        ),
    );
}

/// Criterion 4: metric structure of the state-based distance. Identity of
/// indiscernibles at 1e-8, exact symmetry, triangle inequality within 1e-8
/// on 20 random triples, and the closed-form 1D reference value
/// 1/sqrt(120) for the pair (everything pinned to zero, free torsion).
#[test]
fn criterion_04_distance_metric() {
    const BUDGET_S: f64 = 120.0;
    let t0 = Instant::now();

    let g = Grid::line(0.0, 1.0, 129).unwrap();
    let domain = g.interior_mask();
    let mut rng = ChaCha8Rng::seed_from_u64(0xD4);

    let random_measure = |rng: &mut ChaCha8Rng, with_inf: bool| {
        let mut mu = MeasureField::zeros(&g);
        for v in mu.beta.iter_mut() {
            *v = 8.0 * rng.gen::<f64>();
        }
        if with_inf {
            let a = 0.1 + 0.5 * rng.gen::<f64>();
            let w = 0.05 + 0.2 * rng.gen::<f64>();
            for k in 0..g.node_count() {
                let x = g.node_pos(k)[0];
                if x >= a && x <= a + w {
                    mu.beta[k] = f64::INFINITY;
                }
            }
        }
        mu
    };

    let mut max_self = 0.0f64;
    for i in 0..5 {
        let mu = random_measure(&mut rng, i % 2 == 0);
        max_self = max_self.max(gamma_distance(&mu, &mu, 2.0, &domain).unwrap());
    }

    let mut symmetric = true;
    for i in 0..5 {
        let mu = random_measure(&mut rng, i == 1);
        let nu = random_measure(&mut rng, i == 3);
        let d12 = gamma_distance(&mu, &nu, 2.0, &domain).unwrap();
        let d21 = gamma_distance(&nu, &mu, 2.0, &domain).unwrap();
        symmetric &= d12 == d21;
    }

    let mut worst_triangle = f64::NEG_INFINITY;
    for i in 0..20 {
        let a = random_measure(&mut rng, i % 3 == 0);
        let b = random_measure(&mut rng, i % 4 == 1);
        let c = random_measure(&mut rng, i % 5 == 2);
        let dab = gamma_distance(&a, &b, 2.0, &domain).unwrap();
        let dbc = gamma_distance(&b, &c, 2.0, &domain).unwrap();
        let dac = gamma_distance(&a, &c, 2.0, &domain).unwrap();
        worst_triangle = worst_triangle.max(dac - (dab + dbc));
    }

    let g_ref = Grid::line(0.0, 1.0, 257).unwrap();
    let d_ref = g_ref.interior_mask();
    let all_pinned = MeasureField::infinity_on(&g_ref.full_mask());
    let free = MeasureField::zeros(&g_ref);
    let d_value = gamma_distance(&all_pinned, &free, 2.0, &d_ref).unwrap();
    let reference = 1.0 / 120.0f64.sqrt();
    let dt = t0.elapsed().as_secs_f64();

    let ok = max_self <= 1e-8
        && symmetric
        && worst_triangle <= 1e-8
        && (d_value - reference).abs() <= 1e-3
        && dt <= BUDGET_S;
    verdict(
        4,
        ok,
        &format!(
            "d(mu,mu) ≤ {:.1e} (≤ 1e-8), symmetry exact = {}, worst triangle slack {:.1e} \
             (≤ 1e-8), reference pair {:.6} vs 1/sqrt(120) = {:.6} (± 1e-3), {:.1}s (≤ {}s)",
            max_self, symmetric, worst_triangle, d_value, reference, dt, BUDGET_S
        ),
    );
}

/// Criterion 5: the 1D support threshold. With f = 1, p = 2 the penalized
/// minimizer keeps all of (0,1) for coefficient 0.02 (energy 0.02 - 1/24)
/// and drops everything for 0.05 (energy exactly 0).
#[test]
fn criterion_05_free_boundary_threshold() {
    const BUDGET_S: f64 = 60.0;
    let t0 = Instant::now();

    let g = Grid::line(0.0, 1.0, 129).unwrap();
    let d = g.interior_mask();
    let f = GridFunction::constant(&g, 1.0);
    let opts = SolveOpts::default();

    let low = optimizer::free_boundary_minimize(&f, 2.0, 0.02, &d, &opts).unwrap();
    let expected = 0.02 - 1.0 / 24.0;
    let full_support = low.omega.count() == d.count();
    let energy_err = (low.objective - expected).abs();

    let high = optimizer::free_boundary_minimize(&f, 2.0, 0.05, &d, &opts).unwrap();
    let emptied = high.omega.is_empty() && high.objective == 0.0;
    let dt = t0.elapsed().as_secs_f64();

    let ok = full_support && energy_err <= 1e-3 && emptied && dt <= BUDGET_S;
    verdict(
        5,
        ok,
        &format!(
            "coef 0.02: support {}/{} nodes, E = {:.6} vs {:.6} (err {:.1e} ≤ 1e-3); \
             coef 0.05: empty = {}, E = {:.1e}; {:.1}s (≤ {}s)",
            low.omega.count(),
            d.count(),
            low.objective,
            expected,
            energy_err,
            high.omega.is_empty(),
            high.objective,
            dt,
            BUDGET_S
        ),
    );
}

/// Criterion 6: volume saturation. With lambda = 0 and g = f = 1 the
/// density optimizer must use the whole budget: on a 129^2 box with
/// m = 0.5 |D| the returned set's measure matches m within one cell layer,
/// |error| <= Per(Omega) * 2h.
#[test]
fn criterion_06_volume_saturation() {
    const BUDGET_S: f64 = 600.0;
    let t0 = Instant::now();

    let g = Grid::rect([0.0, 0.0], [1.0, 1.0], [129, 129]).unwrap();
    let d = g.interior_mask();
    let f = GridFunction::constant(&g, 1.0);
    let m = 0.5 * measure(&d);
    let cost = CostSpec { g: f.clone(), lambda: 0.0, p: 2.0, q: 2.0, ell: 2.0, m };
    let out = optimizer::control_optimize(&f, &cost, &d, &SolveOpts::default()).unwrap();

    let vol = measure(&out.omega);
    let per = mask_perimeter(&out.omega);
    let h = 1.0 / 128.0;
    let slack = per * 2.0 * h;
    let err = (vol - m).abs();
    let dt = t0.elapsed().as_secs_f64();

    let ok = err <= slack && out.report.converged && out.adjoint_converged && dt <= BUDGET_S;
    verdict(
        6,
        ok,
        &format!(
            "|Omega| = {:.5} vs m = {:.5}, |error| = {:.2e} ≤ Per·2h = {:.2e} (Per = {:.3}), \
             converged = {}, {:.1}s (≤ {}s)",
            vol, m, err, slack, per, out.report.converged, dt, BUDGET_S
        ),
    );
}

/// Shared 129^2 disc solution for criteria 7 and 8: the penalized
/// free-boundary minimizer with f = 1 and support coefficient 0.03 (the
/// composite coefficient matching lambda = 0.06 in the density problem).
static FB_DISC: OnceLock<FbOutcome> = OnceLock::new();

fn fb_disc_solution() -> &'static FbOutcome {
    FB_DISC.get_or_init(|| {
        let g = Grid::rect([-1.0, -1.0], [1.0, 1.0], [129, 129]).unwrap();
        let d = disc_mask(&g, [0.0, 0.0], 1.0).unwrap();
        let f = GridFunction::constant(&g, 1.0);
        optimizer::free_boundary_minimize(&f, 2.0, 0.03, &d, &SolveOpts::default()).unwrap()
    })
}

/// Criterion 7: with f = g the density route and the free-boundary route
/// must land on the same shape. On the 129^2 unit disc with f = g = 1,
/// lambda = 0.06 (density) versus composite coefficient 0.03
/// (free boundary), the symmetric difference is at most 4h times the
/// perimeter of either set.
#[test]
fn criterion_07_control_vs_free_boundary() {
    const BUDGET_S: f64 = 600.0;
    let t0 = Instant::now();

    let g = Grid::rect([-1.0, -1.0], [1.0, 1.0], [129, 129]).unwrap();
    let d = disc_mask(&g, [0.0, 0.0], 1.0).unwrap();
    let f = GridFunction::constant(&g, 1.0);
    let cost =
        CostSpec { g: f.clone(), lambda: 0.06, p: 2.0, q: 2.0, ell: 2.0, m: measure(&d) };
    let ctrl = optimizer::control_optimize(&f, &cost, &d, &SolveOpts::default()).unwrap();
    let fb = fb_disc_solution();

    let sym = measure(&ctrl.omega.minus(&fb.omega).union(&fb.omega.minus(&ctrl.omega)));
    let per = mask_perimeter(&fb.omega).min(mask_perimeter(&ctrl.omega));
    let h = 2.0 / 128.0;
    let bound = 4.0 * h * per;
    let dt = t0.elapsed().as_secs_f64();

    let ok = sym <= bound && dt <= BUDGET_S;
    verdict(
        7,
        ok,
        &format!(
            "|Omega_ctrl| = {:.4}, |Omega_fb| = {:.4}, sym-diff = {:.2e} ≤ 4h·Per = {:.2e} \
             (Per = {:.3}), {:.1}s (≤ {}s)",
            measure(&ctrl.omega),
            measure(&fb.omega),
            sym,
            bound,
            per,
            dt,
            BUDGET_S
        ),
    );
}

/// Criterion 8: thin-band scaling on the criterion-7 solution. The log-log
/// slopes of band measure and band gradient energy against epsilon must be
/// at least 0.8 over 4 octaves, and the level-set perimeter must stay
/// bounded (max/min <= 4) over the 4 smallest epsilons.
#[test]
fn criterion_08_finite_perimeter_diagnostic() {
    const BUDGET_S: f64 = 120.0;
    let t0 = Instant::now();

    let fb = fb_disc_solution();
    let eps0 = 0.2 * fb.u.max();
    let epsilons: Vec<f64> = (0..5).map(|k| eps0 / f64::powi(2.0, k)).collect();
    let table = finite_perimeter_diagnostic(&fb.u, 2.0, &epsilons).unwrap();
    let dt = t0.elapsed().as_secs_f64();

    let ok = table.measure_slope >= 0.8
        && table.gradient_slope >= 0.8
        && table.perimeter_bounded
        && dt <= BUDGET_S;
    verdict(
        8,
        ok,
        &format!(
            "band-measure slope {:.3}, gradient slope {:.3} (both ≥ 0.8), perimeter bounded \
             (max/min ≤ 4) = {}, {:.1}s (≤ {}s)",
            table.measure_slope, table.gradient_slope, table.perimeter_bounded, dt, BUDGET_S
        ),
    );
}

/// Criterion 9: the adjoint-based sensitivity of the smooth objective
/// matches central finite differences at 20 random nodes to a relative
/// error of 1e-3.
///
/// Numerical setup: each objective value carries solver noise of order the
/// residual floor (~1e-12), so the difference quotient can only resolve
/// sensitivities well above noise/step. A wide step is safe — the
/// objective is near-affine in a single nodal density over this range —
/// and the random nodes are drawn from those carrying at least 1% of the
/// peak sensitivity, where a double-precision central difference can
/// resolve the answer at all. The solver's exact quadratic step lands on
/// its floor within a couple of iterations, so a small iteration cap
/// costs nothing.
#[test]
fn criterion_09_adjoint_sensitivity() {
    const BUDGET_S: f64 = 120.0;
    const DELTA: f64 = 0.5;
    const TOL_REL: f64 = 1e-3;
    let t0 = Instant::now();

    let g = Grid::rect([0.0, 0.0], [1.0, 1.0], [65, 65]).unwrap();
    let d = g.interior_mask();
    let f = GridFunction::constant(&g, 1.0);
    let gcost = GridFunction::from_fn(&g, |pos| 1.0 + pos[0]);
    let cost = CostSpec { g: gcost, lambda: 0.0, p: 2.0, q: 2.0, ell: 2.0, m: measure(&d) };
    let mut beta = MeasureField::zeros(&g);
    for k in 0..g.node_count() {
        let pos = g.node_pos(k);
        beta.beta[k] = 2.0
            + (std::f64::consts::PI * pos[0]).sin() * (std::f64::consts::PI * pos[1]).sin();
    }
    let opts = SolveOpts { tolerance: 1e-12, max_iters: 60 };

    let (s, adjoint_ok) = optimizer::control_sensitivity(&f, &cost, &d, &beta, &opts).unwrap();

    let s_max = s.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let nodes: Vec<usize> = (0..g.node_count())
        .filter(|&k| d.inside[k] && s[k].abs() >= 1e-2 * s_max)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0xF9);
    let mut picked = Vec::new();
    while picked.len() < 20 {
        let k = nodes[rng.gen_range(0..nodes.len())];
        if !picked.contains(&k) {
            picked.push(k);
        }
    }

    let mut worst_rel = 0.0f64;
    for &k in &picked {
        let mut plus = beta.clone();
        plus.beta[k] += DELTA;
        let mut minus = beta.clone();
        minus.beta[k] -= DELTA;
        let jp = optimizer::control_smooth_objective(&f, &cost, &d, &plus, &opts).unwrap();
        let jm = optimizer::control_smooth_objective(&f, &cost, &d, &minus, &opts).unwrap();
        let fd = (jp - jm) / (2.0 * DELTA);
        let rel = (s[k] - fd).abs() / fd.abs().max(1e-14);
        worst_rel = worst_rel.max(rel);
    }
    let dt = t0.elapsed().as_secs_f64();

    let ok = adjoint_ok && worst_rel <= TOL_REL && dt <= BUDGET_S;
    verdict(
        9,
        ok,
        &format!(
            "20 random nodes (sensitivity ≥ 1% of peak, {} eligible), worst relative error \
             {:.2e} (≤ {:.0e}), adjoint converged = {}, {:.1}s (≤ {}s)",
            nodes.len(),
            worst_rel,
            TOL_REL,
            adjoint_ok,
            dt,
            BUDGET_S
        ),
    );
}

/// Criterion 10: the hypothesis checker reproduces the three worked flag
/// patterns: p > d gives open-set existence; g >= 0 with ell > 1 gives
/// quasi-open existence; g >= c f with lambda > 0 and q > d/p gives
/// openness of the optimum (and, with f >= 0, finite perimeter).
#[test]
fn criterion_10_hypothesis_flags() {
    let t0 = Instant::now();

    let g = Grid::rect([0.0, 0.0], [1.0, 1.0], [17, 17]).unwrap();
    let d = g.interior_mask();
    let one = GridFunction::constant(&g, 1.0);
    let vol = measure(&d);

    // p > d: existence among open sets, no strict penalization.
    let a = CostSpec { g: one.clone(), lambda: 0.0, p: 3.0, q: 2.0, ell: 2.0, m: vol };
    let ra = optimizer::check_hypotheses(&one, &a, 2);
    let a_ok = ra.existence_open_p_gt_d && !ra.openness && !ra.finite_perimeter;

    // p <= d with g >= 0 and ell > 1: existence among quasi-open sets only.
    let b = CostSpec { g: one.clone(), lambda: 0.0, p: 2.0, q: 2.0, ell: 2.0, m: vol };
    let rb = optimizer::check_hypotheses(&one, &b, 2);
    let b_ok = !rb.existence_open_p_gt_d && rb.existence_quasiopen && !rb.openness;

    // Strict penalization with g >= c f, q > d/p: open optimum with finite
    // perimeter.
    let c = CostSpec { g: one.clone(), lambda: 0.1, p: 2.0, q: 3.0, ell: 2.0, m: vol };
    let rc = optimizer::check_hypotheses(&one, &c, 2);
    let c_ok = rc.openness && rc.finite_perimeter && rc.existence_quasiopen;

    // Sharpness controls: dropping lambda or the lower bound on g must
    // clear the openness flag.
    let c_nolambda = CostSpec { lambda: 0.0, ..c.clone() };
    let r_nolambda = optimizer::check_hypotheses(&one, &c_nolambda, 2);
    let mut g_hole = one.clone();
    g_hole.values[g.idx(8, 8)] = 0.0;
    let c_hole = CostSpec { g: g_hole, ..c.clone() };
    let r_hole = optimizer::check_hypotheses(&one, &c_hole, 2);
    let controls_ok = !r_nolambda.openness && !r_hole.openness;

    let dt = t0.elapsed().as_secs_f64();
    let ok = a_ok && b_ok && c_ok && controls_ok && dt <= 10.0;
    verdict(
        10,
        ok,
        &format!(
            "p>d pattern = {}, quasi-open pattern = {}, openness pattern = {}, \
             sharpness controls = {}, {:.2}s",
            a_ok, b_ok, c_ok, controls_ok, dt
        ),
    );
}
