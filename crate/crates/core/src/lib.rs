//! Wide-stencil monotone discretization of the inhomogeneous infinity
//! Laplacian `Δ∞u = G(x, u, Du)` on a square lattice, a nonlinear
//! Gauss–Seidel solver, closed-form reference fields, and diagnostics for
//! sharp growth rates at critical and free-boundary points.
//!
//! ```
//! use inflap_core::*;
//!
//! let grid = build_grid(33, 1.0).unwrap();
//! let stencil = build_stencil(2).unwrap();
//! let out = solve(
//!     &grid,
//!     &stencil,
//!     &RhsModel::zero(),
//!     &BoundaryData::affine([1.0, 0.5], 0.0),
//!     OperatorKind::Direct,
//!     &SolverConfig::default(),
//! )
//! .unwrap();
//! assert!(out.converged);
//! ```

pub mod analysis;
pub mod error;
pub mod grid;
pub mod models;
pub mod oracles;
pub mod ops;
pub mod solver;

pub use analysis::{
    auto_branching_center, auto_critical_center, ball_sups, check_nondegeneracy, default_critical_thresholds,
    detect_branching_set, detect_critical_set, dyadic_radii, fit_exponent, flatness_diagnostic, flip_constant,
    flip_constant_scan, measure_decay, measure_decay_many, reflection_check, BranchingSet, CriticalSet,
    DecayReport, DecaySettings, Flatness, NondegeneracyReport, NondegeneracyRow, PowerFit, ReflectionReport,
    ReflectionSettings,
};
pub use error::{Error, Result};
pub use grid::{
    ball_nodes, build_grid, build_stencil, shell_nodes, BallIndex, Direction, FieldRole, Grid2D, Node,
    ScalarField, StencilSet,
};
pub use models::{
    admissible, alpha_exponent, alpha_hat_cap, deadcore_radial_constant, distance_to_set, evaluate_rhs,
    henon_min_exponent, nondegeneracy_constant, weighted_exponent, ExponentParams, HenonTerm, RhsKind, RhsModel,
    SetElement, WeightSpec,
};
pub use oracles::{analytic_inf_laplacian, analytic_operator, refinement_study, OracleField, RefinementRow};
pub use ops::{
    grad_magnitude, inf_laplacian, normalized_inf_laplacian, operator_field, residual_field, sample_stencil,
    LocalStencilSample, OperatorKind,
};
pub use solver::{
    comparison_check, local_update, lipschitz_certificate, max_principle_check, solve, solve_from, solve_nested, BoundaryData,
    NonlinearityLag, SolveOutcome, SolverConfig, SweepOrder,
};
