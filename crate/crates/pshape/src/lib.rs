//! Numerical toolkit for shape optimization problems governed by the
//! p-Laplacian on a fixed rectangular design box.
//!
//! The pieces fit together like this:
//!
//! * [`grid`] — uniform 1D/2D grids, node masks, nodal functions, discrete
//!   gradients and quadrature;
//! * [`capmeasure`] — capacitary measures as nodal densities in
//!   `[0, +inf]`, the state-based distance between them, and the
//!   comparison-principle check;
//! * [`state`] — the relaxed p-Laplacian state solver (energy descent with
//!   Barzilai-Borwein steps and Armijo backtracking);
//! * [`optimizer`] — the two shape optimization drivers: free-boundary
//!   truncation for penalized torsion, and projected-gradient control on
//!   the measure density under a volume budget, plus hypothesis checks on
//!   the data;
//! * [`geometry`] — measures, perimeter estimates, superlevel sets and
//!   connectivity diagnostics for discrete shapes;
//! * [`supremal`] — the degenerate limit problem where cost concentrates on
//!   the largest inradius, with exact area formulas for lens-shaped
//!   candidates;
//! * [`io`] / [`cli`] — deterministic text serialization and the command
//!   line driver.

pub mod capmeasure;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod optimizer;
pub mod state;
pub mod supremal;
