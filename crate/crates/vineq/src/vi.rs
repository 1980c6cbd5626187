//! The smoothed natural map of a variational inequality, its merit function,
//! and the neighborhood algebra the continuation solver runs on.
//!
//! A variational inequality `VI(X, F)` asks for `x* ∈ X` with
//! `⟨F(x*), x − x*⟩ ≥ 0` for all `x ∈ X`.  Pairing `x` with `y = F(x)` turns
//! this into the square root-finding problem `H₀(w) = 0` for the natural map,
//! and smoothing the projection inside it gives the family this module
//! evaluates:
//!
//! ```text
//!   H_μ(x, y) = ( x − p_μ(x − y),  F(x) − y ),        H₀ uses Π_X,
//!   Ψ_μ(x, y) = ‖F(x) − y‖ + ‖x − p_μ(x − y)‖,
//!   𝒩(β, μ)   = { w : Ψ_μ(w) ≤ β μ },
//!
//!   DH_μ(x, y) = [ I − D̄   D̄  ]        with  D̄ = Dp_μ(x − y).
//!                [ DF(x)   −I ]
//! ```
//!
//! `Ψ_μ` is the sum (not the hypot) of the two residual norms; `‖H_μ‖` is the
//! hypot, so `‖H_μ‖ ≤ Ψ_μ ≤ √2‖H_μ‖`, and the smoothing error bound
//! `‖p_μ − Π_X‖ ≤ √ϑ μ` gives `‖H₀(w)‖ ≤ Ψ_μ(w) + √ϑ μ` at every `w` — the
//! inequality that lets the solver track `‖H₀‖ → 0` while only ever
//! controlling `Ψ_μ` inside the shrinking neighborhood.
//!
//! Maps are supplied matrix-free: a [`ViMap`] evaluates `F` and applies
//! `DF(x)` to directions, and [`DhOperator`] composes that with the cached
//! smoothing resolvent into Jacobian-vector products for the Krylov solver.
//! Dense assembly ([`dh_matrix`]) exists for diagnostics only.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::sets::{SetError, SmoothedSet};
use crate::smoothing::{
    smooth_derivative_apply_warm, smooth_project_warm, DerivativeApply, SmoothingError,
};
use crate::space::{AmbientPoint, PairPoint};

/// Failures surfaced while evaluating the smoothed natural map.
#[derive(Debug, Error)]
pub enum ViError {
    /// The smoothed projection (or its derivative) under the hood failed.
    #[error(transparent)]
    Smoothing(#[from] SmoothingError),
    /// The exact projection used by the `μ = 0` path failed.
    #[error(transparent)]
    Set(#[from] SetError),
}

/// How much monotonicity the map is declared to have.  `Strongly(rho)` means
/// `⟨DF(x)u, u⟩ ≥ rho‖u‖²`; declarations are spot-checked by the problem
/// generators, not enforced here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Monotonicity {
    /// No monotonicity is claimed.
    None,
    /// `⟨F(x) − F(y), x − y⟩ ≥ 0`.
    Monotone,
    /// Strongly monotone with the given modulus `ϱ > 0`.
    Strongly(f64),
}

/// The map `F` of a variational inequality, evaluated matrix-free: `eval`
/// gives `F(x)` and `jacobian_apply` gives `DF(x)[u]`.  Implementations must
/// be pure — the solver and the benchmark harness evaluate them concurrently
/// across iterates.
pub trait ViMap: Send + Sync {
    /// `F(x)`.
    fn eval(&self, x: &AmbientPoint) -> AmbientPoint;

    /// Directional derivative `DF(x)[u]`.
    fn jacobian_apply(&self, x: &AmbientPoint, u: &AmbientPoint) -> AmbientPoint;

    /// True when `F` is affine, i.e. `jacobian_apply` does not depend on `x`.
    fn is_affine(&self) -> bool {
        false
    }

    /// Declared monotonicity class of `F`.
    fn monotonicity(&self) -> Monotonicity {
        Monotonicity::None
    }
}

/// A variational inequality instance: the constraint set `X` and the map `F`,
/// with an optional planted solution used by generators and benchmarks to
/// measure true errors.
pub struct ViProblem {
    /// Short identifier used in traces and benchmark tables.
    pub name: String,
    /// The constraint set `X`.
    pub set: SmoothedSet,
    /// The map `F`.
    pub map: Box<dyn ViMap>,
    /// A known solution pair `(x*, F(x*))`, when the instance was planted.
    pub known_solution: Option<PairPoint>,
}

impl ViProblem {
    /// Bundles a set and a map into a problem without a planted solution.
    pub fn new(name: impl Into<String>, set: SmoothedSet, map: Box<dyn ViMap>) -> Self {
        ViProblem { name: name.into(), set, map, known_solution: None }
    }

    /// Attaches a planted solution pair for error measurement.
    pub fn with_known_solution(mut self, w: PairPoint) -> Self {
        self.known_solution = Some(w);
        self
    }
}

/// The two blocks of the (smoothed) natural map at one iterate, with the
/// scalars the solver steers by.
#[derive(Debug, Clone)]
pub struct Residuals {
    /// Projection gap `φ_μ(x, y) = x − p_μ(x − y)`.
    pub phi: AmbientPoint,
    /// Exact projection gap `φ₀(x, y) = x − Π_X(x − y)`; equals `phi` when
    /// `μ = 0`.  Computed on every evaluation (it underlies `h0_norm`) and
    /// reused as the approximate-Newton right-hand side `−H₀(w)`.
    pub phi0: AmbientPoint,
    /// Map gap `F(x) − y`.
    pub fgap: AmbientPoint,
    /// Merit `Ψ_μ = ‖fgap‖ + ‖phi‖` (sum of norms).
    pub merit: f64,
    /// `‖H₀(w)‖` — the unsmoothed residual norm, always computed through the
    /// exact projection regardless of `μ`; it is the termination quantity.
    pub h0_norm: f64,
}

impl Residuals {
    /// `‖H_μ(w)‖ = hypot(‖phi‖, ‖fgap‖)` — the right-hand-side norm of the
    /// centering Newton system.
    pub fn hmu_norm(&self) -> f64 {
        f64::hypot(self.phi.norm(), self.fgap.norm())
    }
}

/// Evaluates `H_μ` and `Ψ_μ` at `w`, along with `‖H₀(w)‖` via the exact
/// projection.  `mu = 0` makes `phi` itself the exact projection gap.
pub fn smoothed_residual(problem: &ViProblem, w: &PairPoint, mu: f64) -> Result<Residuals, ViError> {
    Ok(smoothed_residual_warm(problem, w, mu, None)?.0)
}

/// [`smoothed_residual`] that additionally returns the smoothed projection
/// `p_μ(x − y)` so continuation steps can warm-start the next implicit solve,
/// and accepts such a warm start itself.
pub fn smoothed_residual_warm(
    problem: &ViProblem,
    w: &PairPoint,
    mu: f64,
    warm: Option<&AmbientPoint>,
) -> Result<(Residuals, AmbientPoint), ViError> {
    let z = w.x.sub(&w.y);
    let fgap = problem.map.eval(&w.x).sub(&w.y);
    let p0 = problem.set.exact_project(&z)?;
    let phi0 = w.x.sub(&p0);
    let h0_norm = f64::hypot(phi0.norm(), fgap.norm());

    if mu == 0.0 {
        let merit = fgap.norm() + phi0.norm();
        let phi = phi0.clone();
        return Ok((Residuals { phi, phi0, fgap, merit, h0_norm }, p0));
    }

    let eval = smooth_project_warm(&problem.set, &z, mu, warm)?;
    let phi = w.x.sub(&eval.value);
    let merit = fgap.norm() + phi.norm();
    Ok((Residuals { phi, phi0, fgap, merit, h0_norm }, eval.value))
}

/// True iff `w ∈ 𝒩(β, μ)`, i.e. `Ψ_μ(w) ≤ β μ`.  Callers must pick
/// `β > √ϑ`, which makes the neighborhood nonempty around solutions.
pub fn in_neighborhood(problem: &ViProblem, w: &PairPoint, beta: f64, mu: f64) -> Result<bool, ViError> {
    assert!(
        beta > problem.set.theta().sqrt(),
        "neighborhood parameter beta = {beta} must exceed sqrt(theta) = {}",
        problem.set.theta().sqrt()
    );
    let r = smoothed_residual(problem, w, mu)?;
    Ok(r.merit <= beta * mu)
}

/// Matrix-free Jacobian `DH_μ(w)` at a fixed iterate.  The smoothing
/// resolvent `D̄ = Dp_μ(x − y)` is factored once at construction; each
/// [`DhOperator::apply`] then costs one resolvent application plus one
/// `DF(x)` application:
///
/// ```text
///   DH_μ(w) [u; v] = ( u − D̄[u − v],  DF(x)[u] − v ).
/// ```
pub struct DhOperator<'a> {
    problem: &'a ViProblem,
    x: AmbientPoint,
    dbar: DerivativeApply,
}

impl<'a> DhOperator<'a> {
    /// Builds the operator at `(w, μ)`, `μ > 0`.
    pub fn new(problem: &'a ViProblem, w: &PairPoint, mu: f64) -> Result<Self, ViError> {
        Self::new_warm(problem, w, mu, None)
    }

    /// [`DhOperator::new`] with an optional warm start for the inner
    /// smoothing solve that anchors the derivative: the smoothed projection
    /// already computed at (or near) `x − y`.
    pub fn new_warm(
        problem: &'a ViProblem,
        w: &PairPoint,
        mu: f64,
        warm: Option<&AmbientPoint>,
    ) -> Result<Self, ViError> {
        assert!(mu > 0.0, "DH_mu requires mu > 0");
        let dbar = smooth_derivative_apply_warm(&problem.set, &w.x.sub(&w.y), mu, warm)?;
        Ok(DhOperator { problem, x: w.x.clone(), dbar })
    }

    /// Flat dimension of the operator (`2 · dim X`).
    pub fn dim(&self) -> usize {
        2 * self.problem.set.dim()
    }

    /// `DH_μ(w)[d]`.
    pub fn apply(&self, d: &PairPoint) -> PairPoint {
        let top = d.x.sub(&self.dbar.apply(&d.x.sub(&d.y)));
        let bottom = self.problem.map.jacobian_apply(&self.x, &d.x).sub(&d.y);
        PairPoint::new(top, bottom)
    }
}

/// One-shot Jacobian-vector product `DH_μ(w)[d]`; build a [`DhOperator`]
/// instead when applying the same Jacobian repeatedly.
pub fn dh_apply(problem: &ViProblem, w: &PairPoint, mu: f64, d: &PairPoint) -> Result<PairPoint, ViError> {
    Ok(DhOperator::new(problem, w, mu)?.apply(d))
}

/// Dense assembly of `DH_μ(w)` (diagnostics only: singular-value and
/// inverse-norm reporting, small-instance fallback solves).
pub fn dh_matrix(problem: &ViProblem, w: &PairPoint, mu: f64) -> Result<DMatrix<f64>, ViError> {
    let op = DhOperator::new(problem, w, mu)?;
    let d = op.dim();
    let mut jac = DMatrix::zeros(d, d);
    for j in 0..d {
        let mut e = DVector::zeros(d);
        e[j] = 1.0;
        let col = op.apply(&w.from_flat_like(&e)).to_flat();
        jac.column_mut(j).copy_from(&col);
    }
    Ok(jac)
}
