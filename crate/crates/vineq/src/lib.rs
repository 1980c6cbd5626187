//! Solver library for variational inequalities VI(X, F) over closed convex sets.
//!
//! The library is organized around a single idea: replace the Euclidean
//! projection onto `X` (the nonsmooth heart of the natural residual map) with a
//! family of smooth approximations `p_mu` obtained by adding a scaled barrier
//! to the projection objective,
//!
//! ```text
//!     p_mu(z) = argmin_x  1/2 ||x - z||^2 + mu^2 f(x),
//! ```
//!
//! where `f` is a self-concordant barrier for `X` and `mu > 0` a smoothing
//! parameter.  Equivalently `p_mu(z)` is the unique interior solution of
//! `p + mu^2 grad f(p) = z`, and `p_0` is the exact projection.  A
//! non-interior continuation method then drives `mu -> 0` while tracking
//! approximate solutions of the smoothed residual system, combining globally
//! linear progress with locally quadratic terminal convergence.
//!
//! Module map:
//!
//! * [`space`] — ambient points (vectors, symmetric matrices, scalar-matrix
//!   pairs), inner products, eigen/SVD helpers, Matrix Market IO.
//! * [`sets`] — the supported convex sets, their barriers, exact projections,
//!   and face/differentiability diagnostics.
//! * [`smoothing`] — smoothed projections `p_mu` (closed forms where they
//!   exist, damped interior Newton otherwise) and their derivative operators.
//! * [`vi`] — VI problems, smoothed/unsmoothed residuals, the merit function,
//!   and the Jacobian of the smoothed residual map.
//! * [`linsolve`] — restarted GMRES for the inexact inner linear solves, plus
//!   a dense direct solver used as fallback and test oracle.
//! * [`continuation`] — the predictor–corrector continuation solver, its
//!   configuration, trace, and post-hoc contract audit.
//! * [`problems`] — seeded generators with planted solutions and manifest IO.
//! * [`oracles`] — independent brute-force and closed-form reference
//!   computations used to validate everything else.
//! * [`checks`] — the self-check suite wired into the CLI and the acceptance
//!   tests.

pub mod space;

mod inewton;

pub mod sets;

pub mod smoothing;

pub mod vi;

pub mod linsolve;

pub mod continuation;

pub mod problems;

pub mod oracles;

pub mod checks;

pub use checks::{
    curvature_checks, derivative_checks, jacobian_limit_checks, jacobian_limit_probes,
    lipschitz_checks, projection_checks, reflection_checks, residual_checks, run_all_checks,
    scalar_smoothing_checks, solver_contract_checks, LimitProbe,
};
pub use continuation::{
    audit_trace, auto_initialize, estimate_order, solve, write_trace_csv, ConfigError,
    InsufficientData, IterateState, SolveReport, SolverConfig, SolverError, SolverStatus, StepKind,
    Theta2Mode,
};
pub use problems::{
    generate_lcp, generate_nuclear_vi, generate_opnorm_vi, generate_polyhedral_vi, generate_sdcp,
    load_manifest, read_manifest, FlatMap, MapKind, MapSpec, ProblemError, ProblemManifest, SetSpec,
};
pub use sets::{FaceDiagnostics, SetError, SetKind, SmoothedSet};
pub use smoothing::{
    derivative_matrix, smooth_derivative_apply, smooth_project, smooth_project_warm,
    wrong_barrier_soc_jacobian, DerivativeApply, SmoothingError, SmoothingEval,
};
pub use space::{AmbientPoint, PairPoint};
pub use vi::{
    dh_apply, dh_matrix, in_neighborhood, smoothed_residual, smoothed_residual_warm, DhOperator,
    Monotonicity, Residuals, ViError, ViMap, ViProblem,
};
