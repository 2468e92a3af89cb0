//! Uniform Cartesian grids in one and two dimensions.
//!
//! Functions live on nodes; gradients live on cells. The cell gradient is the
//! forward difference anchored at the cell's low corner along each axis
//! (exact on affine functions), which makes the discrete p-energy convex in
//! the nodal values and reduces to the standard 5-point Laplacian at p = 2.
//!
//! Integration conventions, used consistently by every module:
//! * a cell contributes to a masked integral iff *all* of its corner nodes
//!   are inside the mask (so masked measures underestimate by O(h));
//! * node fields are integrated with trapezoidal-type weights: each node
//!   carries `cell_volume x (adjacent included cells) / 2^dim`.

use crate::error::{Error, Result};

/// Uniform tensor grid over a box extent. `dim` is 1 or 2; for 1D the y-axis
/// entries are unused (`n[1] = 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub dim: usize,
    /// Nodes per axis (>= 2 on each used axis).
    pub n: [usize; 2],
    /// Lower corner of the extent.
    pub a: [f64; 2],
    /// Upper corner of the extent.
    pub b: [f64; 2],
    /// Node spacing per axis.
    pub h: [f64; 2],
}

impl Grid {
    /// Build a grid from an extent box and per-axis node counts.
    pub fn build(extent: &[(f64, f64)], n: &[usize]) -> Result<Grid> {
        if extent.is_empty() || extent.len() > 2 || extent.len() != n.len() {
            return Err(Error::invalid(format!(
                "grid dimension must be 1 or 2 with matching node counts (got extent len {}, n len {})",
                extent.len(),
                n.len()
            )));
        }
        let dim = extent.len();
        let mut gn = [1usize; 2];
        let mut ga = [0.0f64; 2];
        let mut gb = [0.0f64; 2];
        let mut gh = [0.0f64; 2];
        for (ax, (&(lo, hi), &nn)) in extent.iter().zip(n.iter()).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || hi <= lo {
                return Err(Error::invalid(format!(
                    "grid extent on axis {} must be a finite interval with positive length (got [{}, {}])",
                    ax, lo, hi
                )));
            }
            if nn < 2 {
                return Err(Error::invalid(format!(
                    "grid needs at least 2 nodes per axis (axis {} has {})",
                    ax, nn
                )));
            }
            gn[ax] = nn;
            ga[ax] = lo;
            gb[ax] = hi;
            gh[ax] = (hi - lo) / (nn - 1) as f64;
        }
        Ok(Grid { dim, n: gn, a: ga, b: gb, h: gh })
    }

    /// Convenience 1D constructor.
    pub fn line(a: f64, b: f64, n: usize) -> Result<Grid> {
        Grid::build(&[(a, b)], &[n])
    }

    /// Convenience 2D constructor.
    pub fn rect(a: [f64; 2], b: [f64; 2], n: [usize; 2]) -> Result<Grid> {
        Grid::build(&[(a[0], b[0]), (a[1], b[1])], &[n[0], n[1]])
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        if self.dim == 1 {
            self.n[0]
        } else {
            self.n[0] * self.n[1]
        }
    }

    #[inline]
    pub fn cell_count(&self) -> usize {
        if self.dim == 1 {
            self.n[0] - 1
        } else {
            (self.n[0] - 1) * (self.n[1] - 1)
        }
    }

    /// Volume of one cell.
    #[inline]
    pub fn cell_vol(&self) -> f64 {
        if self.dim == 1 {
            self.h[0]
        } else {
            self.h[0] * self.h[1]
        }
    }

    /// Flat node index for (i, j); in 1D pass j = 0.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n[0]);
        debug_assert!(self.dim == 2 || j == 0);
        j * self.n[0] + i
    }

    /// (i, j) coordinates of a flat node index.
    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.n[0], k / self.n[0])
    }

    /// Physical position of node k.
    #[inline]
    pub fn node_pos(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.coords(k);
        [
            self.a[0] + i as f64 * self.h[0],
            if self.dim == 2 { self.a[1] + j as f64 * self.h[1] } else { 0.0 },
        ]
    }

    /// Flat cell index for cell (ci, cj); in 1D pass cj = 0.
    #[inline]
    pub fn cell_idx(&self, ci: usize, cj: usize) -> usize {
        cj * (self.n[0] - 1) + ci
    }

    /// Corner node indices of a cell. In 1D only the first two are used and
    /// the last two repeat them.
    #[inline]
    pub fn cell_corners(&self, c: usize) -> [usize; 4] {
        if self.dim == 1 {
            [c, c + 1, c, c + 1]
        } else {
            let ncx = self.n[0] - 1;
            let ci = c % ncx;
            let cj = c / ncx;
            let k00 = self.idx(ci, cj);
            [k00, k00 + 1, k00 + self.n[0], k00 + self.n[0] + 1]
        }
    }

    /// Trapezoidal node weights over the full grid: `cell_vol x adjacent
    /// cells / 2^dim`. Interior nodes get a full cell volume.
    pub fn node_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.node_count()];
        let share = self.cell_vol() / (1 << self.dim) as f64;
        for c in 0..self.cell_count() {
            let corners = self.cell_corners(c);
            for &k in corners.iter().take(1 << self.dim) {
                w[k] += share;
            }
        }
        w
    }

    /// Mask of every node.
    pub fn full_mask(&self) -> DomainMask {
        DomainMask { grid: *self, inside: vec![true; self.node_count()] }
    }

    /// Mask of nodes strictly inside the extent box (the open box domain).
    pub fn interior_mask(&self) -> DomainMask {
        let mut inside = vec![false; self.node_count()];
        for k in 0..self.node_count() {
            let (i, j) = self.coords(k);
            let ok_x = i > 0 && i + 1 < self.n[0];
            let ok_y = self.dim == 1 || (j > 0 && j + 1 < self.n[1]);
            inside[k] = ok_x && ok_y;
        }
        DomainMask { grid: *self, inside }
    }
}

/// Open-ball mask: node k is inside iff |x_k - center| < radius (strict).
///
/// An empty result is legal (the caller can query [`DomainMask::is_empty`]);
/// downstream solvers reject empty domains with their own precondition
/// checks.
pub fn disc_mask(grid: &Grid, center: [f64; 2], radius: f64) -> Result<DomainMask> {
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::invalid(format!("disc radius must be finite and positive (got {})", radius)));
    }
    if !center[0].is_finite() || !center[1].is_finite() {
        return Err(Error::invalid("disc center must be finite"));
    }
    let mut inside = vec![false; grid.node_count()];
    for (k, flag) in inside.iter_mut().enumerate() {
        let p = grid.node_pos(k);
        let dx = p[0] - center[0];
        let dy = if grid.dim == 2 { p[1] - center[1] } else { 0.0 };
        *flag = (dx * dx + dy * dy).sqrt() < radius;
    }
    Ok(DomainMask { grid: *grid, inside })
}

/// Node mask over a grid. Used for design regions, supports, Dirichlet sets.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainMask {
    pub grid: Grid,
    pub inside: Vec<bool>,
}

impl DomainMask {
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 2]) -> bool) -> DomainMask {
        let inside = (0..grid.node_count()).map(|k| f(grid.node_pos(k))).collect();
        DomainMask { grid: *grid, inside }
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.inside.iter().all(|&b| !b)
    }

    pub fn complement(&self) -> DomainMask {
        DomainMask { grid: self.grid, inside: self.inside.iter().map(|&b| !b).collect() }
    }

    pub fn intersect(&self, other: &DomainMask) -> DomainMask {
        debug_assert_eq!(self.grid, other.grid);
        DomainMask {
            grid: self.grid,
            inside: self.inside.iter().zip(&other.inside).map(|(&a, &b)| a && b).collect(),
        }
    }

    pub fn union(&self, other: &DomainMask) -> DomainMask {
        debug_assert_eq!(self.grid, other.grid);
        DomainMask {
            grid: self.grid,
            inside: self.inside.iter().zip(&other.inside).map(|(&a, &b)| a || b).collect(),
        }
    }

    pub fn subset_of(&self, other: &DomainMask) -> bool {
        self.grid == other.grid
            && self.inside.iter().zip(&other.inside).all(|(&a, &b)| !a || b)
    }

    /// Nodes in `self` but not in `other`.
    pub fn minus(&self, other: &DomainMask) -> DomainMask {
        debug_assert_eq!(self.grid, other.grid);
        DomainMask {
            grid: self.grid,
            inside: self.inside.iter().zip(&other.inside).map(|(&a, &b)| a && !b).collect(),
        }
    }

    /// True iff the cell's corner nodes are all inside the mask.
    #[inline]
    pub fn cell_included(&self, c: usize) -> bool {
        let corners = self.grid.cell_corners(c);
        corners
            .iter()
            .take(1 << self.grid.dim)
            .all(|&k| self.inside[k])
    }

    /// Node weights restricted to included cells (trapezoidal share).
    pub fn node_weights(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut w = vec![0.0; g.node_count()];
        let share = g.cell_vol() / (1 << g.dim) as f64;
        for c in 0..g.cell_count() {
            if self.cell_included(c) {
                let corners = g.cell_corners(c);
                for &k in corners.iter().take(1 << g.dim) {
                    w[k] += share;
                }
            }
        }
        w
    }
}

/// Scalar function on grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: &Grid) -> GridFunction {
        GridFunction { grid: *grid, values: vec![0.0; grid.node_count()] }
    }

    pub fn constant(grid: &Grid, v: f64) -> GridFunction {
        GridFunction { grid: *grid, values: vec![v; grid.node_count()] }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> GridFunction {
        let values = (0..grid.node_count()).map(|k| f(grid.node_pos(k))).collect();
        GridFunction { grid: *grid, values }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Piecewise-constant vector field on cells (the range of [`gradient`]).
/// `gy` is all zeros for 1D grids.
#[derive(Debug, Clone)]
pub struct CellVectors {
    pub grid: Grid,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl CellVectors {
    /// Euclidean norm per cell.
    pub fn norms(&self) -> Vec<f64> {
        self.gx
            .iter()
            .zip(&self.gy)
            .map(|(&x, &y)| (x * x + y * y).sqrt())
            .collect()
    }
}

/// Cell-wise forward-difference gradient of a node function.
pub fn gradient(u: &GridFunction) -> CellVectors {
    let g = &u.grid;
    let nc = g.cell_count();
    let mut gx = vec![0.0; nc];
    let mut gy = vec![0.0; nc];
    if g.dim == 1 {
        for c in 0..nc {
            gx[c] = (u.values[c + 1] - u.values[c]) / g.h[0];
        }
    } else {
        let ncx = g.n[0] - 1;
        for cj in 0..g.n[1] - 1 {
            for ci in 0..ncx {
                let c = cj * ncx + ci;
                let k00 = g.idx(ci, cj);
                gx[c] = (u.values[k00 + 1] - u.values[k00]) / g.h[0];
                gy[c] = (u.values[k00 + g.n[0]] - u.values[k00]) / g.h[1];
            }
        }
    }
    CellVectors { grid: *g, gx, gy }
}

/// Integral of a node field over a mask (trapezoidal weights from included
/// cells).
pub fn integrate(u: &GridFunction, mask: &DomainMask) -> Result<f64> {
    if u.grid != mask.grid {
        return Err(Error::invalid("integrate: function and mask live on different grids"));
    }
    let w = mask.node_weights();
    Ok(u.values.iter().zip(&w).map(|(&v, &wk)| v * wk).sum())
}

/// Integral of a cell field over the included cells of a mask.
pub fn integrate_cells(cell_values: &[f64], mask: &DomainMask) -> Result<f64> {
    let g = &mask.grid;
    if cell_values.len() != g.cell_count() {
        return Err(Error::invalid(format!(
            "integrate_cells: got {} cell values for a grid with {} cells",
            cell_values.len(),
            g.cell_count()
        )));
    }
    let vol = g.cell_vol();
    let mut total = 0.0;
    for (c, &v) in cell_values.iter().enumerate() {
        if mask.cell_included(c) {
            total += v * vol;
        }
    }
    Ok(total)
}

/// L^p norm of a node field over a mask, 1 <= p < infinity.
pub fn lp_norm(u: &GridFunction, p: f64, mask: &DomainMask) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::invalid(format!("lp_norm requires finite p >= 1 (got {})", p)));
    }
    if u.grid != mask.grid {
        return Err(Error::invalid("lp_norm: function and mask live on different grids"));
    }
    let w = mask.node_weights();
    let s: f64 = u
        .values
        .iter()
        .zip(&w)
        .map(|(&v, &wk)| wk * v.abs().powf(p))
        .sum();
    Ok(s.powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn build_line_grid() {
        let g = Grid::line(0.0, 1.0, 5).unwrap();
        assert_eq!(g.dim, 1);
        assert_eq!(g.node_count(), 5);
        assert_eq!(g.cell_count(), 4);
        assert!((g.h[0] - 0.25).abs() < 1e-15);
        assert!((g.node_pos(3)[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn build_square_grid() {
        let g = Grid::rect([-1.0, -1.0], [1.0, 1.0], [129, 129]).unwrap();
        assert_eq!(g.node_count(), 129 * 129);
        assert!((g.h[0] - 0.015625).abs() < 1e-15);
        assert!((g.h[1] - 0.015625).abs() < 1e-15);
        let k = g.idx(64, 64);
        let p = g.node_pos(k);
        assert!(p[0].abs() < 1e-15 && p[1].abs() < 1e-15);
    }

    #[test]
    fn degenerate_grids_rejected() {
        assert!(Grid::line(0.0, 1.0, 1).is_err());
        assert!(Grid::line(1.0, 0.0, 5).is_err());
        assert!(Grid::build(&[(0.0, 1.0)], &[5, 5]).is_err());
        assert!(Grid::build(&[], &[]).is_err());
    }

    #[test]
    fn disc_mask_measures_pi() {
        // Node count x cell volume approximates the disc area.
        let g = Grid::rect([-1.0, -1.0], [1.0, 1.0], [129, 129]).unwrap();
        let d = disc_mask(&g, [0.0, 0.0], 1.0).unwrap();
        let node_area = d.count() as f64 * g.cell_vol();
        let h = g.h[0];
        assert!(
            (node_area - std::f64::consts::PI).abs() <= 4.0 * h,
            "node-count area {} vs pi, tol {}",
            node_area,
            4.0 * h
        );
    }

    #[test]
    fn disc_mask_strict_inequality_and_full_cover() {
        let g = Grid::rect([-1.0, -1.0], [1.0, 1.0], [33, 33]).unwrap();
        // Radius bigger than the box diagonal: every node is inside.
        let d = disc_mask(&g, [0.0, 0.0], 10.0).unwrap();
        assert_eq!(d.count(), g.node_count());
        // Boundary nodes like (1, 0) sit at distance exactly 1 and must be
        // excluded by the strict inequality.
        let d1 = disc_mask(&g, [0.0, 0.0], 1.0).unwrap();
        assert!(!d1.inside[g.idx(32, 16)]);
    }

    #[test]
    fn disc_mask_can_be_empty() {
        let g = Grid::line(0.0, 1.0, 9).unwrap();
        let d = disc_mask(&g, [10.0, 0.0], 0.05).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn gradient_exact_on_affine_1d() {
        let g = Grid::line(0.0, 1.0, 17).unwrap();
        let u = GridFunction::from_fn(&g, |p| 3.0 * p[0] - 2.0);
        let gr = gradient(&u);
        for &gx in &gr.gx {
            assert!((gx - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_exact_on_affine_2d() {
        let g = Grid::rect([0.0, 0.0], [1.0, 2.0], [13, 9]).unwrap();
        let u = GridFunction::from_fn(&g, |p| 2.0 * p[0] - 5.0 * p[1] + 1.0);
        let gr = gradient(&u);
        for c in 0..g.cell_count() {
            assert!((gr.gx[c] - 2.0).abs() < 1e-12);
            assert!((gr.gy[c] + 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_zero_on_constant() {
        let g = Grid::rect([0.0, 0.0], [1.0, 1.0], [9, 9]).unwrap();
        let u = GridFunction::constant(&g, 7.5);
        let gr = gradient(&u);
        assert!(gr.norms().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn integrate_constant_exact() {
        let g = Grid::rect([0.0, 0.0], [1.0, 1.0], [21, 21]).unwrap();
        let u = GridFunction::constant(&g, 1.0);
        let v = integrate(&u, &g.full_mask()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn integrate_linear_exact() {
        // Trapezoid weights are exact on linear integrands over the full box.
        let g = Grid::line(0.0, 1.0, 101).unwrap();
        let u = GridFunction::from_fn(&g, |p| p[0]);
        let v = integrate(&u, &g.full_mask()).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn integrate_quadratic_near_third() {
        let g = Grid::line(0.0, 1.0, 101).unwrap();
        let u = GridFunction::from_fn(&g, |p| p[0] * p[0]);
        let v = integrate(&u, &g.full_mask()).unwrap();
        assert!((v - 1.0 / 3.0).abs() <= 1e-3, "got {}", v);
    }

    #[test]
    fn lp_norm_of_constant() {
        let g = Grid::rect([0.0, 0.0], [1.0, 1.0], [33, 33]).unwrap();
        let u = GridFunction::constant(&g, 1.0);
        for p in [1.0, 2.0, 3.5] {
            let v = lp_norm(&u, p, &g.full_mask()).unwrap();
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn l2_norm_of_parabola_profile() {
        // || x(1-x)/2 ||_{L^2(0,1)} = 1/sqrt(120), frozen from
        // int_0^1 x^2 (1-x)^2 / 4 dx = 1/120.
        let expected = (1.0f64 / 120.0).sqrt();
        let g = Grid::line(0.0, 1.0, 257).unwrap();
        let u = GridFunction::from_fn(&g, |p| p[0] * (1.0 - p[0]) / 2.0);
        let v = lp_norm(&u, 2.0, &g.full_mask()).unwrap();
        assert!((v - expected).abs() <= 1e-3, "got {}, expected {}", v, expected);
    }

    #[test]
    fn lp_norm_rejects_bad_p() {
        let g = Grid::line(0.0, 1.0, 9).unwrap();
        let u = GridFunction::constant(&g, 1.0);
        assert!(lp_norm(&u, 0.5, &g.full_mask()).is_err());
        assert!(lp_norm(&u, f64::INFINITY, &g.full_mask()).is_err());
    }

    #[test]
    fn mask_cell_rule_underestimates() {
        // A mask missing one interior node removes all its adjacent cells.
        let g = Grid::rect([0.0, 0.0], [1.0, 1.0], [11, 11]).unwrap();
        let mut m = g.full_mask();
        m.inside[g.idx(5, 5)] = false;
        let ones = GridFunction::constant(&g, 1.0);
        let v = integrate(&ones, &m).unwrap();
        let expected = 1.0 - 4.0 * g.cell_vol();
        assert!((v - expected).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn lp_norm_absolute_homogeneity(scale in -10.0f64..10.0, p in 1.0f64..4.0) {
            let g = Grid::line(0.0, 1.0, 33).unwrap();
            let u = GridFunction::from_fn(&g, |q| (7.0 * q[0]).sin());
            let su = GridFunction { grid: g, values: u.values.iter().map(|v| v * scale).collect() };
            let m = g.full_mask();
            let a = lp_norm(&su, p, &m).unwrap();
            let b = scale.abs() * lp_norm(&u, p, &m).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b));
        }

        #[test]
        fn lp_norm_triangle_inequality(seed in 0u64..1000, p in 1.0f64..4.0) {
            let g = Grid::line(0.0, 1.0, 33).unwrap();
            let u = GridFunction::from_fn(&g, |q| ((seed as f64 + 1.0) * q[0]).sin());
            let v = GridFunction::from_fn(&g, |q| ((seed as f64 * 0.7 + 2.0) * q[0]).cos());
            let sum = GridFunction {
                grid: g,
                values: u.values.iter().zip(&v.values).map(|(a, b)| a + b).collect(),
            };
            let m = g.full_mask();
            let lhs = lp_norm(&sum, p, &m).unwrap();
            let rhs = lp_norm(&u, p, &m).unwrap() + lp_norm(&v, p, &m).unwrap();
            prop_assert!(lhs <= rhs + 1e-10 * (1.0 + rhs));
        }

        #[test]
        fn gradient_affine_exactness_2d(ax in -3.0f64..3.0, ay in -3.0f64..3.0, c in -3.0f64..3.0) {
            let g = Grid::rect([0.0, 0.0], [1.0, 1.0], [9, 9]).unwrap();
            let u = GridFunction::from_fn(&g, |p| ax * p[0] + ay * p[1] + c);
            let gr = gradient(&u);
            for cell in 0..g.cell_count() {
                prop_assert!((gr.gx[cell] - ax).abs() < 1e-10);
                prop_assert!((gr.gy[cell] - ay).abs() < 1e-10);
            }
        }
    }
}
