//! The p -> infinity limit: distance-function states, the supremal cost
//! -max u, and the boundary-anchored lens optimum on the unit disc.
//!
//! As p grows, the state of the volume-constrained problem degenerates to
//! the distance function of the shape, and the cost to -sup of it; the
//! optimum for the unit-disc design region is the intersection of the disc
//! with a second disc anchored at a boundary point (a "lens"), whose
//! radius is pinned by the volume budget through a closed-form area.

use crate::error::{Error, Result};
use crate::grid::{disc_mask, DomainMask, Grid, GridFunction};

/// Which nodes act as the zero set of the distance state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceMode {
    /// Distance to the complement within the design region only; the outer
    /// boundary of the region is free (mixed boundary behavior).
    #[default]
    MixedWithinDomain,
    /// Distance to everything outside the shape, outer boundary included.
    FullDirichlet,
}

/// Nodewise exact Euclidean distance from each node of `omega` to the
/// nearest complement node; zero elsewhere. The complement is `d_mask`
/// minus `omega` (mixed mode) or the whole grid minus `omega` (full
/// Dirichlet mode).
///
/// Brute force over a boundary prefilter of the complement: a complement
/// node all of whose grid neighbors are also complement nodes can never be
/// the unique nearest one (stepping one grid cell along the dominant axis
/// toward the query is strictly closer), so dropping such nodes is exact.
pub fn distance_function(
    omega: &DomainMask,
    d_mask: &DomainMask,
    mode: DistanceMode,
) -> Result<GridFunction> {
    if omega.grid != d_mask.grid {
        return Err(Error::invalid("distance_function: omega and design masks on different grids"));
    }
    let g = &omega.grid;
    let n = g.node_count();
    let complement: Vec<bool> = (0..n)
        .map(|k| match mode {
            DistanceMode::MixedWithinDomain => d_mask.inside[k] && !omega.inside[k],
            DistanceMode::FullDirichlet => !omega.inside[k],
        })
        .collect();
    if !complement.iter().any(|&c| c) {
        return Err(Error::invalid(
            "distance_function: the shape fills its design region, so the distance state u_D may not be well-defined",
        ));
    }

    // Boundary prefilter: keep complement nodes with a non-complement grid
    // neighbor.
    let mut anchors: Vec<[f64; 2]> = Vec::new();
    for k in 0..n {
        if !complement[k] {
            continue;
        }
        let (i, j) = g.coords(k);
        let mut boundary = false;
        if i > 0 && !complement[k - 1] {
            boundary = true;
        }
        if !boundary && i + 1 < g.n[0] && !complement[k + 1] {
            boundary = true;
        }
        if g.dim == 2 && !boundary {
            if j > 0 && !complement[k - g.n[0]] {
                boundary = true;
            }
            if !boundary && j + 1 < g.n[1] && !complement[k + g.n[0]] {
                boundary = true;
            }
        }
        if boundary {
            anchors.push(g.node_pos(k));
        }
    }
    if anchors.is_empty() {
        // Complement with no exposed boundary can only mean omega is empty.
        return Ok(GridFunction::zeros(g));
    }

    let mut u = GridFunction::zeros(g);
    for k in 0..n {
        if !omega.inside[k] {
            continue;
        }
        let p = g.node_pos(k);
        let mut best = f64::INFINITY;
        for a in &anchors {
            let dx = p[0] - a[0];
            let dy = p[1] - a[1];
            let d2 = dx * dx + dy * dy;
            if d2 < best {
                best = d2;
            }
        }
        u.values[k] = best.sqrt();
    }
    Ok(u)
}

/// Area of the intersection of discs of radii `r1` and `r2` with centers
/// `d` apart.
pub fn circle_intersection_area(r1: f64, r2: f64, d: f64) -> f64 {
    if d >= r1 + r2 {
        return 0.0;
    }
    let rmin = r1.min(r2);
    if d <= (r1 - r2).abs() {
        return std::f64::consts::PI * rmin * rmin;
    }
    let a1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)).clamp(-1.0, 1.0);
    let a2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)).clamp(-1.0, 1.0);
    let tri = (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2);
    r1 * r1 * a1.acos() + r2 * r2 * a2.acos() - 0.5 * tri.max(0.0).sqrt()
}

/// Area of the lens: the unit disc intersected with a disc of radius `r`
/// centered at the boundary point (1, 0). Closed form; equals pi once the
/// second disc swallows the whole unit disc (r >= 2).
pub fn lens_area(r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::invalid("lens_area: radius must be > 0"));
    }
    if r >= 2.0 {
        return Ok(std::f64::consts::PI);
    }
    Ok((1.0 - r * r / 2.0).acos() + r * r * (r / 2.0).acos() - (r / 2.0) * (4.0 - r * r).sqrt())
}

/// The unique radius with lens_area(r) = m, by bisection to 1e-9.
pub fn optimal_lens_radius(m: f64) -> Result<f64> {
    let pi = std::f64::consts::PI;
    if !(m > 0.0) || m > pi {
        return Err(Error::invalid("optimal_lens_radius: volume must be in (0, pi]"));
    }
    if m == pi {
        return Ok(2.0);
    }
    let mut lo = 0.0_f64;
    let mut hi = 2.0_f64;
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if lens_area(mid.max(1e-300))? < m {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The supremal cost -max u over the masked nodes.
pub fn sup_cost(u: &GridFunction, mask: &DomainMask) -> Result<f64> {
    if u.grid != mask.grid {
        return Err(Error::invalid("sup_cost: function and mask on different grids"));
    }
    let mut best = f64::NEG_INFINITY;
    for k in 0..u.values.len() {
        if mask.inside[k] {
            best = best.max(u.values[k]);
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::invalid("sup_cost: empty mask"));
    }
    Ok(-best)
}

/// Brute-force comparison of equal-area candidate shapes under the
/// supremal cost.
#[derive(Debug, Clone)]
pub struct LensComparison {
    pub m: f64,
    /// Closed-form radius of the boundary-anchored lens of area m.
    pub r_m: f64,
    /// Name of the candidate with the lowest cost.
    pub winner: String,
    /// (name, sup cost) per candidate, in evaluation order.
    pub candidates: Vec<(String, f64)>,
    /// cost(centered disc) - cost(lens); positive when the lens wins.
    pub margin_over_centered: f64,
    /// Node mask of the winning candidate.
    pub best_mask: DomainMask,
}

/// Compare the boundary-anchored lens of area `m` against the centered
/// disc and a family of offset discs B((t,0), rho(t)) of the same area
/// inside the unit disc, on an n-by-n grid over [-1,1]^2. Cost of a
/// candidate: -max of its mixed-mode distance function over the disc.
pub fn verify_lens_optimality(m: f64, n: usize) -> Result<LensComparison> {
    let pi = std::f64::consts::PI;
    if !(m > 0.0) || m >= pi {
        return Err(Error::invalid("verify_lens_optimality: volume must be in (0, pi)"));
    }
    if n < 17 {
        return Err(Error::invalid("verify_lens_optimality: grid too coarse (n >= 17)"));
    }
    let grid = Grid::rect([-1.0, -1.0], [1.0, 1.0], [n, n])?;
    let d = disc_mask(&grid, [0.0, 0.0], 1.0)?;
    let r_m = optimal_lens_radius(m)?;

    let mut cands: Vec<(String, DomainMask)> = Vec::new();
    cands.push((
        "lens".to_string(),
        d.intersect(&disc_mask(&grid, [1.0, 0.0], r_m)?),
    ));
    let rho_c = (m / pi).sqrt();
    cands.push(("disc_centered".to_string(), d.intersect(&disc_mask(&grid, [0.0, 0.0], rho_c)?)));
    for j in 1..=9 {
        let t = 0.1 * j as f64;
        // rho(t): area of B((t,0), rho) inside the unit disc equals m.
        let mut lo = 0.0_f64;
        let mut hi = 1.0 + t;
        while hi - lo > 1e-9 {
            let mid = 0.5 * (lo + hi);
            if circle_intersection_area(1.0, mid, t) < m {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let rho = 0.5 * (lo + hi);
        cands.push((
            format!("disc_offset_{:.1}", t),
            d.intersect(&disc_mask(&grid, [t, 0.0], rho)?),
        ));
    }

    let eval = |mask: &DomainMask| -> Result<f64> {
        let u = distance_function(mask, &d, DistanceMode::MixedWithinDomain)?;
        sup_cost(&u, &d)
    };
    let threads = crate::capmeasure::env_thread_count().clamp(1, cands.len());
    let mut values: Vec<Result<f64>> = Vec::with_capacity(cands.len());
    if threads >= 2 {
        let mut slots: Vec<Option<Result<f64>>> = (0..cands.len()).map(|_| None).collect();
        let chunk = cands.len().div_ceil(threads);
        std::thread::scope(|s| {
            for (ci, out) in slots.chunks_mut(chunk).enumerate() {
                let cands = &cands;
                let eval = &eval;
                s.spawn(move || {
                    for (j, slot) in out.iter_mut().enumerate() {
                        *slot = Some(eval(&cands[ci * chunk + j].1));
                    }
                });
            }
        });
        values.extend(slots.into_iter().map(|s| s.expect("candidate evaluated")));
    } else {
        for (_, mask) in &cands {
            values.push(eval(mask));
        }
    }

    let mut candidates = Vec::with_capacity(cands.len());
    for ((name, _), v) in cands.iter().zip(values) {
        candidates.push((name.clone(), v?));
    }
    let (win_idx, _) = candidates
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
        .expect("non-empty candidate list");
    let winner = candidates[win_idx].0.clone();
    let v_lens = candidates[0].1;
    let v_centered = candidates[1].1;
    let best_mask = cands[win_idx].1.clone();

    Ok(LensComparison {
        m,
        r_m,
        winner,
        candidates,
        margin_over_centered: v_centered - v_lens,
        best_mask,
    })
}
