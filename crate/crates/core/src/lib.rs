//! Nehari-manifold solver for double-phase Dirichlet problems
//!
//! ```text
//! -Δ_p u - div(a(z)|Du|^{q-2}Du) = f(z,u) in Ω,   u = 0 on ∂Ω,   1 < q < p,
//! ```
//!
//! discretized with piecewise-linear elements on structured interval and
//! rectangle meshes. The crate computes positive ground states and
//! sign-changing (nodal) solutions by constrained descent, the first
//! p-Laplacian eigenpair, and sampled checks of the reaction hypotheses.

pub mod cli;
pub mod eigen;
pub mod energy;
pub mod error;
pub mod fibering;
pub mod mesh;
pub mod metric;
pub mod problem;
pub mod report;
pub mod solver;

pub use eigen::{first_eigenpair, lemma1_diagnostic, rayleigh_quotient, theta_quotient, EigenOptions, EigenResult};
pub use energy::{energy, nehari_defect, residual, EnergyBreakdown, Residual};
pub use error::{Error, Result};
pub use fibering::{fibering_curve, fibering_values, project_to_nehari, FiberingMap, FiberingResult};
pub use mesh::{build_interval_mesh, build_rectangle_mesh, ElementGradient, Field, Mesh, Point};
pub use problem::{
    check_ar_condition, check_hypotheses_f, validate_exponents, DoublePhaseProblem, ProblemConfig, Reaction,
    Weight,
};
pub use solver::{
    sign_classification, solve_ground_state, solve_nodal, SignClass, SolveOptions, SolveReport,
};
