//! The supported convex sets, each packaged with a self-concordant barrier
//! (value, gradient, Hessian action), an exact Euclidean projection, and
//! face/differentiability diagnostics.
//!
//! Every set carries a canonical barrier `f` with parameter ϑ:
//!
//! ```text
//! Orthant(n)            f(x) = −Σ log xᵢ                             ϑ = n
//! PsdCone(n)            f(x) = −log det x                            ϑ = n
//! Polyhedron(A, b)      f(x) = −Σ log(Aᵢx − bᵢ)                      ϑ = m
//! LinfEpigraph(n)       f(t,x) = −Σ log(t−xᵢ) − Σ log(t+xᵢ)          ϑ = 2n
//! OpNormEpigraph(m,n)   f(t,x) = −log det [[t Iₙ, xᵀ],[x, t Iₘ]]     ϑ = m+n
//! NuclearEpigraph(m,n)  f♯ = conjugate of the operator-norm barrier  ϑ = m+n
//! SecondOrderCone3      f(t,x) = −log(t² − ‖x‖²)                     ϑ = 2
//! ```
//!
//! The barrier parameter enters the solver only through √ϑ (the smoothing
//! maps are √ϑ-Lipschitz in μ), so the conservative choice ϑ = m+n for the
//! nuclear epigraph is safe.
//!
//! The nuclear-epigraph barrier is defined by conjugacy: its value, gradient,
//! and Hessian at `s` are obtained from the solve `∇f_K(x̄) = −s` over the
//! operator-norm cone `K`, which reduces to a one-dimensional frame after a
//! thin SVD (see the `spectral` submodule).

mod poly;
mod proj;
pub(crate) mod spectral;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::space::{assemble_from_svd, sym_eigen, thin_svd, AmbientPoint};

/// Errors reported by set operations.
#[derive(Debug, Error)]
pub enum SetError {
    /// A barrier was evaluated at a point that is not strictly interior.
    #[error("point is on the boundary or outside the set (margin {margin:.3e})")]
    BoundaryOrExterior { margin: f64 },
    /// The polyhedron has no strictly feasible point.
    #[error("polyhedron has no strictly feasible point")]
    InfeasibleSet,
    /// The iterative fallback for large polyhedral projections stalled.
    #[error("projection fallback did not converge (residual {residual:.3e} after {iters} iterations)")]
    OracleFallbackNotConverged { residual: f64, iters: usize },
}

/// The concrete set: its kind plus any defining data.
#[derive(Clone, Debug)]
pub enum SetKind {
    /// Nonnegative orthant in ℝⁿ.
    Orthant { n: usize },
    /// Positive semidefinite cone over symmetric n×n matrices.
    PsdCone { n: usize },
    /// `{x : Ax ≥ b}` with a cached strictly feasible point.
    Polyhedron { a: DMatrix<f64>, b: DVector<f64>, interior_point: DVector<f64> },
    /// `{(t, x) ∈ ℝ×ℝⁿ : t ≥ ‖x‖∞}`.
    LinfEpigraph { n: usize },
    /// `{(t, X) ∈ ℝ×ℝ^{m×n} : t ≥ ‖X‖₂}` (spectral norm), m ≤ n.
    OpNormEpigraph { m: usize, n: usize },
    /// `{(t, X) : t ≥ ‖X‖_*}` (nuclear norm), m ≤ n.
    NuclearEpigraph { m: usize, n: usize },
    /// `{(t, x) ∈ ℝ×ℝ² : t ≥ ‖x‖₂}` with the scalar log barrier.
    SecondOrderCone3,
}

/// A convex set bundled with its barrier and projection machinery.
#[derive(Clone, Debug)]
pub struct SmoothedSet {
    kind: SetKind,
}

/// Differentiability and face information for the projector at a point.
#[derive(Clone, Debug)]
pub struct FaceDiagnostics {
    /// Whether the Euclidean projector is differentiable at the query point,
    /// certified up to `tol_used`.
    pub differentiable: bool,
    /// Strict complementarity of the associated projection pair, where the
    /// set supports the notion (the four cone kinds); `None` otherwise.
    pub strictly_complementary: Option<bool>,
    /// Indices of active constraints (polyhedra) or clipped coordinates
    /// (epigraph sets, positions in decreasing magnitude order).
    pub active_set: Vec<usize>,
    /// Per-kind rank datum: clip count k* for the epigraph sets, positive
    /// rank for orthant/PSD, active count for polyhedra.
    pub rank_info: usize,
    /// Smallest margin supporting the verdict; values inside `[0, tol_used]`
    /// mean the verdict is indeterminate and reported as not differentiable.
    pub margin: f64,
    /// The tolerance actually used.
    pub tol_used: f64,
}

impl SmoothedSet {
    pub fn orthant(n: usize) -> Self {
        assert!(n >= 1);
        SmoothedSet { kind: SetKind::Orthant { n } }
    }

    pub fn psd_cone(n: usize) -> Self {
        assert!(n >= 1);
        SmoothedSet { kind: SetKind::PsdCone { n } }
    }

    /// Build a polyhedral set `{x : Ax ≥ b}`; fails when no strictly
    /// feasible point exists.  The probe's point is cached for warm starts.
    pub fn polyhedron(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, SetError> {
        assert_eq!(a.nrows(), b.len(), "row count of A must match the length of b");
        assert!(a.nrows() >= 1 && a.ncols() >= 1);
        let interior_point = poly::feasibility_probe(&a, &b)?;
        Ok(SmoothedSet { kind: SetKind::Polyhedron { a, b, interior_point } })
    }

    pub fn linf_epigraph(n: usize) -> Self {
        assert!(n >= 1);
        SmoothedSet { kind: SetKind::LinfEpigraph { n } }
    }

    pub fn opnorm_epigraph(m: usize, n: usize) -> Self {
        assert!(m >= 1 && m <= n, "matrix shape must satisfy m <= n; transpose the data if needed");
        SmoothedSet { kind: SetKind::OpNormEpigraph { m, n } }
    }

    pub fn nuclear_epigraph(m: usize, n: usize) -> Self {
        assert!(m >= 1 && m <= n, "matrix shape must satisfy m <= n; transpose the data if needed");
        SmoothedSet { kind: SetKind::NuclearEpigraph { m, n } }
    }

    pub fn second_order_cone3() -> Self {
        SmoothedSet { kind: SetKind::SecondOrderCone3 }
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    /// Barrier parameter ϑ.
    pub fn theta(&self) -> f64 {
        match &self.kind {
            SetKind::Orthant { n } | SetKind::PsdCone { n } => *n as f64,
            SetKind::Polyhedron { a, .. } => a.nrows() as f64,
            SetKind::LinfEpigraph { n } => 2.0 * *n as f64,
            SetKind::OpNormEpigraph { m, n } | SetKind::NuclearEpigraph { m, n } => (m + n) as f64,
            SetKind::SecondOrderCone3 => 2.0,
        }
    }

    /// Dimension of the ambient flat coordinates.
    pub fn dim(&self) -> usize {
        match &self.kind {
            SetKind::Orthant { n } => *n,
            SetKind::PsdCone { n } => n * (n + 1) / 2,
            SetKind::Polyhedron { a, .. } => a.ncols(),
            SetKind::LinfEpigraph { n } => n + 1,
            SetKind::OpNormEpigraph { m, n } | SetKind::NuclearEpigraph { m, n } => 1 + m * n,
            SetKind::SecondOrderCone3 => 3,
        }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            SetKind::Orthant { n } => format!("orthant({n})"),
            SetKind::PsdCone { n } => format!("psd({n})"),
            SetKind::Polyhedron { a, .. } => format!("polyhedron({}x{})", a.nrows(), a.ncols()),
            SetKind::LinfEpigraph { n } => format!("linf-epigraph({n})"),
            SetKind::OpNormEpigraph { m, n } => format!("opnorm-epigraph({m}x{n})"),
            SetKind::NuclearEpigraph { m, n } => format!("nuclear-epigraph({m}x{n})"),
            SetKind::SecondOrderCone3 => "soc3".to_string(),
        }
    }

    /// A canonical strictly interior point (warm start, barrier center-ish).
    pub fn canonical_interior(&self) -> AmbientPoint {
        match &self.kind {
            SetKind::Orthant { n } => AmbientPoint::vector(DVector::from_element(*n, 1.0)),
            SetKind::PsdCone { n } => AmbientPoint::sym_matrix(DMatrix::identity(*n, *n)),
            SetKind::Polyhedron { interior_point, .. } => AmbientPoint::vector(interior_point.clone()),
            SetKind::LinfEpigraph { n } => {
                let mut v = DVector::zeros(n + 1);
                v[0] = 1.0;
                AmbientPoint::vector(v)
            }
            SetKind::OpNormEpigraph { m, n } | SetKind::NuclearEpigraph { m, n } => {
                AmbientPoint::scalar_matrix(1.0, DMatrix::zeros(*m, *n))
            }
            SetKind::SecondOrderCone3 => AmbientPoint::vector(DVector::from_vec(vec![1.0, 0.0, 0.0])),
        }
    }

    /// Sample an ambient point with independent N(0, scale²) coordinates.
    pub fn random_ambient<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> AmbientPoint {
        let mut gauss = || -> f64 { scale * rng.sample::<f64, _>(StandardNormal) };
        match &self.kind {
            SetKind::Orthant { n } => AmbientPoint::vector(DVector::from_fn(*n, |_, _| gauss())),
            SetKind::PsdCone { n } => {
                let g = DMatrix::from_fn(*n, *n, |_, _| gauss());
                AmbientPoint::sym_matrix(0.5 * (&g + g.transpose()))
            }
            SetKind::Polyhedron { a, .. } => {
                AmbientPoint::vector(DVector::from_fn(a.ncols(), |_, _| gauss()))
            }
            SetKind::LinfEpigraph { n } => AmbientPoint::vector(DVector::from_fn(n + 1, |_, _| gauss())),
            SetKind::OpNormEpigraph { m, n } | SetKind::NuclearEpigraph { m, n } => {
                AmbientPoint::scalar_matrix(gauss(), DMatrix::from_fn(*m, *n, |_, _| gauss()))
            }
            SetKind::SecondOrderCone3 => AmbientPoint::vector(DVector::from_fn(3, |_, _| gauss())),
        }
    }

    /// Sample a point strictly inside the set, with margins bounded away from
    /// zero (used by tests and the self-check suite).
    pub fn random_interior<R: Rng + ?Sized>(&self, rng: &mut R) -> AmbientPoint {
        let mut gauss = || -> f64 { rng.sample::<f64, _>(StandardNormal) };
        match &self.kind {
            SetKind::Orthant { n } => {
                AmbientPoint::vector(DVector::from_fn(*n, |_, _| 0.3 + 2.0 * gauss().abs()))
            }
            SetKind::PsdCone { n } => {
                let g = DMatrix::from_fn(*n, *n, |_, _| gauss());
                let q = nalgebra::linalg::QR::new(g).q();
                let lam = DVector::from_fn(*n, |_, _| 0.3 + 2.0 * gauss().abs());
                AmbientPoint::sym_matrix(&q * DMatrix::from_diagonal(&lam) * q.transpose())
            }
            SetKind::Polyhedron { a, b, interior_point } => {
                let d = DVector::from_fn(a.ncols(), |_, _| gauss());
                let m0 = a * interior_point - b;
                let md = a * &d;
                let mut alpha: f64 = 10.0;
                for i in 0..m0.len() {
                    if md[i] < 0.0 {
                        alpha = alpha.min(-0.7 * m0[i] / md[i]);
                    }
                }
                AmbientPoint::vector(interior_point + rng.random::<f64>() * alpha * d)
            }
            SetKind::LinfEpigraph { n } => {
                let x = DVector::from_fn(*n, |_, _| gauss());
                let t = x.amax() + 0.3 + gauss().abs();
                let mut v = DVector::zeros(n + 1);
                v[0] = t;
                v.rows_mut(1, *n).copy_from(&x);
                AmbientPoint::vector(v)
            }
            SetKind::OpNormEpigraph { m, n } => {
                let x = DMatrix::from_fn(*m, *n, |_, _| gauss());
                let t = x.clone().svd(false, false).singular_values.max() + 0.3 + gauss().abs();
                AmbientPoint::scalar_matrix(t, x)
            }
            SetKind::NuclearEpigraph { m, n } => {
                let x = DMatrix::from_fn(*m, *n, |_, _| gauss());
                let t = x.clone().svd(false, false).singular_values.sum() + 0.3 + gauss().abs();
                AmbientPoint::scalar_matrix(t, x)
            }
            SetKind::SecondOrderCone3 => {
                let (x1, x2) = (gauss(), gauss());
                let t = (x1 * x1 + x2 * x2).sqrt() + 0.3 + gauss().abs();
                AmbientPoint::vector(DVector::from_vec(vec![t, x1, x2]))
            }
        }
    }

    pub(crate) fn check_shape(&self, p: &AmbientPoint) {
        let ok = match (&self.kind, p) {
            (SetKind::Orthant { n }, AmbientPoint::DenseVector(v)) => v.len() == *n,
            (SetKind::PsdCone { n }, AmbientPoint::SymMatrix(m)) => m.nrows() == *n,
            (SetKind::Polyhedron { a, .. }, AmbientPoint::DenseVector(v)) => v.len() == a.ncols(),
            (SetKind::LinfEpigraph { n }, AmbientPoint::DenseVector(v)) => v.len() == n + 1,
            (SetKind::OpNormEpigraph { m, n }, AmbientPoint::ScalarMatrix { x, .. })
            | (SetKind::NuclearEpigraph { m, n }, AmbientPoint::ScalarMatrix { x, .. }) => {
                x.nrows() == *m && x.ncols() == *n
            }
            (SetKind::SecondOrderCone3, AmbientPoint::DenseVector(v)) => v.len() == 3,
            _ => false,
        };
        assert!(ok, "point shape does not match {}", self.name());
    }

    /// Barrier value f(p); `p` must be strictly interior.
    pub fn barrier_value(&self, p: &AmbientPoint) -> Result<f64, SetError> {
        self.check_shape(p);
        match &self.kind {
            SetKind::Orthant { .. } => {
                let v = p.as_vector();
                interior_margin(v.min())?;
                Ok(-v.iter().map(|x| x.ln()).sum::<f64>())
            }
            SetKind::PsdCone { .. } => {
                let chol = psd_cholesky(p.as_sym())?;
                Ok(-2.0 * chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>())
            }
            SetKind::Polyhedron { a, b, .. } => {
                let m = a * p.as_vector() - b;
                interior_margin(m.min())?;
                Ok(-m.iter().map(|x| x.ln()).sum::<f64>())
            }
            SetKind::LinfEpigraph { .. } => {
                let (t, x) = split_linf(p);
                let mut val = 0.0;
                let mut worst = f64::INFINITY;
                for i in 0..x.len() {
                    worst = worst.min(t - x[i]).min(t + x[i]);
                }
                interior_margin(worst)?;
                for i in 0..x.len() {
                    val -= ((t - x[i]) * (t + x[i])).ln();
                }
                Ok(val)
            }
            SetKind::OpNormEpigraph { n, .. } => {
                let (t, x) = p.as_scalar_matrix();
                let f = thin_svd(x).map_err(|_| SetError::BoundaryOrExterior { margin: f64::NAN })?;
                interior_margin((t - f.sigma.max()).min(t))?;
                Ok(spectral::reduced_barrier_value(t, &f.sigma, *n))
            }
            SetKind::NuclearEpigraph { n, .. } => {
                let (s_o, s) = p.as_scalar_matrix();
                let f = thin_svd(s).map_err(|_| SetError::BoundaryOrExterior { margin: f64::NAN })?;
                interior_margin(s_o - f.sigma.sum())?;
                let sol = spectral::conjugate_reduced_solve(
                    1.0,
                    s_o,
                    &f.sigma,
                    *n,
                    1e-13 * (1.0 + s_o),
                );
                if sol.residual_norm > 1e-9 * (1.0 + s_o) {
                    return Err(SetError::OracleFallbackNotConverged {
                        residual: sol.residual_norm,
                        iters: sol.iterations,
                    });
                }
                let pairing = s_o * sol.x_o + f.sigma.dot(&sol.chi);
                Ok(-(pairing + spectral::reduced_barrier_value(sol.x_o, &sol.chi, *n)))
            }
            SetKind::SecondOrderCone3 => {
                let v = p.as_vector();
                let r = (v[1] * v[1] + v[2] * v[2]).sqrt();
                interior_margin(v[0] - r)?;
                Ok(-((v[0] - r) * (v[0] + r)).ln())
            }
        }
    }

    /// Barrier gradient ∇f(p); `p` must be strictly interior.
    pub fn barrier_gradient(&self, p: &AmbientPoint) -> Result<AmbientPoint, SetError> {
        self.check_shape(p);
        match &self.kind {
            SetKind::Orthant { .. } => {
                let v = p.as_vector();
                interior_margin(v.min())?;
                Ok(AmbientPoint::vector(DVector::from_fn(v.len(), |i, _| -1.0 / v[i])))
            }
            SetKind::PsdCone { .. } => {
                let chol = psd_cholesky(p.as_sym())?;
                Ok(AmbientPoint::sym_matrix(-chol.inverse()))
            }
            SetKind::Polyhedron { a, b, .. } => {
                let m = a * p.as_vector() - b;
                interior_margin(m.min())?;
                let w = DVector::from_fn(m.len(), |i, _| -1.0 / m[i]);
                Ok(AmbientPoint::vector(a.transpose() * w))
            }
            SetKind::LinfEpigraph { .. } => {
                let (t, x) = split_linf(p);
                let n = x.len();
                let mut g = DVector::zeros(n + 1);
                for i in 0..n {
                    let (lo, hi) = (t - x[i], t + x[i]);
                    interior_margin(lo.min(hi))?;
                    g[0] -= 1.0 / lo + 1.0 / hi;
                    g[1 + i] = 1.0 / lo - 1.0 / hi;
                }
                Ok(AmbientPoint::vector(g))
            }
            SetKind::OpNormEpigraph { n, .. } => {
                let (t, x) = p.as_scalar_matrix();
                let f = thin_svd(x).map_err(|_| SetError::BoundaryOrExterior { margin: f64::NAN })?;
                interior_margin((t - f.sigma.max()).min(t))?;
                let (g_t, g_s) = spectral::reduced_barrier_gradient(t, &f.sigma, *n);
                Ok(AmbientPoint::scalar_matrix(g_t, assemble_from_svd(&f.u, &g_s, &f.v)))
            }
            SetKind::NuclearEpigraph { n, .. } => {
                let (s_o, s) = p.as_scalar_matrix();
                let f = thin_svd(s).map_err(|_| SetError::BoundaryOrExterior { margin: f64::NAN })?;
                interior_margin(s_o - f.sigma.sum())?;
                let sol = spectral::conjugate_reduced_solve(
                    1.0,
                    s_o,
                    &f.sigma,
                    *n,
                    1e-13 * (1.0 + s_o),
                );
                if sol.residual_norm > 1e-9 * (1.0 + s_o) {
                    return Err(SetError::OracleFallbackNotConverged {
                        residual: sol.residual_norm,
                        iters: sol.iterations,
                    });
                }
                let neg_chi = -&sol.chi;
                Ok(AmbientPoint::scalar_matrix(-sol.x_o, assemble_from_svd(&f.u, &neg_chi, &f.v)))
            }
            SetKind::SecondOrderCone3 => {
                let v = p.as_vector();
                let r = (v[1] * v[1] + v[2] * v[2]).sqrt();
                interior_margin(v[0] - r)?;
                let m = (v[0] - r) * (v[0] + r);
                Ok(AmbientPoint::vector(DVector::from_vec(vec![
                    -2.0 * v[0] / m,
                    2.0 * v[1] / m,
                    2.0 * v[2] / m,
                ])))
            }
        }
    }

    /// Action of the barrier Hessian: `u ↦ ∇²f(p)[u]`.
    pub fn barrier_hessian_apply(&self, p: &AmbientPoint, u: &AmbientPoint) -> Result<AmbientPoint, SetError> {
        self.check_shape(p);
        self.check_shape(u);
        match &self.kind {
            SetKind::Orthant { .. } => {
                let (pv, uv) = (p.as_vector(), u.as_vector());
                interior_margin(pv.min())?;
                Ok(AmbientPoint::vector(DVector::from_fn(pv.len(), |i, _| uv[i] / (pv[i] * pv[i]))))
            }
            SetKind::PsdCone { .. } => {
                let chol = psd_cholesky(p.as_sym())?;
                let y = chol.solve(u.as_sym());
                Ok(AmbientPoint::sym_matrix(chol.solve(&y.transpose()).transpose()))
            }
            SetKind::Polyhedron { a, b, .. } => {
                let m = a * p.as_vector() - b;
                interior_margin(m.min())?;
                let au = a * u.as_vector();
                let w = DVector::from_fn(m.len(), |i, _| au[i] / (m[i] * m[i]));
                Ok(AmbientPoint::vector(a.transpose() * w))
            }
            SetKind::LinfEpigraph { .. } => {
                let (t, x) = split_linf(p);
                let (ut, ux) = split_linf(u);
                let n = x.len();
                let mut out = DVector::zeros(n + 1);
                for i in 0..n {
                    let (lo, hi) = (t - x[i], t + x[i]);
                    interior_margin(lo.min(hi))?;
                    let c1 = (ut - ux[i]) / (lo * lo);
                    let c2 = (ut + ux[i]) / (hi * hi);
                    out[0] += c1 + c2;
                    out[1 + i] = -c1 + c2;
                }
                Ok(AmbientPoint::vector(out))
            }
            SetKind::OpNormEpigraph { n, .. } => {
                let (t, x) = p.as_scalar_matrix();
                let f = thin_svd(x).map_err(|_| SetError::BoundaryOrExterior { margin: f64::NAN })?;
                interior_margin((t - f.sigma.max()).min(t))?;
                let hess = spectral::SpectralHessian::new(t, f.sigma.clone(), *n, None);
                let (u_o, u_mat) = u.as_scalar_matrix();
                let ubar = spectral::to_frame(&f.u, &f.v, u_mat);
                let (out_o, out_bar) = hess.apply(0.0, 1.0, u_o, &ubar);
                Ok(AmbientPoint::scalar_matrix(out_o, spectral::from_frame(&f.u, &f.v, &out_bar)))
            }
            SetKind::NuclearEpigraph { n, .. } => {
                let (s_o, s) = p.as_scalar_matrix();
                let f = thin_svd(s).map_err(|_| SetError::BoundaryOrExterior { margin: f64::NAN })?;
                interior_margin(s_o - f.sigma.sum())?;
                let sol = spectral::conjugate_reduced_solve(
                    1.0,
                    s_o,
                    &f.sigma,
                    *n,
                    1e-13 * (1.0 + s_o),
                );
                if sol.residual_norm > 1e-9 * (1.0 + s_o) {
                    return Err(SetError::OracleFallbackNotConverged {
                        residual: sol.residual_norm,
                        iters: sol.iterations,
                    });
                }
                // ∇²f♯(s) = (∇²f_K(x̄))⁻¹ with x̄ the conjugate point.
                let prod = DVector::from_fn(sol.chi.len(), |i, _| {
                    sol.margins[i] * (2.0 * sol.x_o - sol.margins[i])
                });
                let hess = spectral::SpectralHessian::new(sol.x_o, sol.chi.clone(), *n, Some(&prod));
                let (u_o, u_mat) = u.as_scalar_matrix();
                let ubar = spectral::to_frame(&f.u, &f.v, u_mat);
                let (out_o, out_bar) = hess.solve(0.0, 1.0, u_o, &ubar);
                Ok(AmbientPoint::scalar_matrix(out_o, spectral::from_frame(&f.u, &f.v, &out_bar)))
            }
            SetKind::SecondOrderCone3 => {
                let v = p.as_vector();
                let uv = u.as_vector();
                let r2 = v[1] * v[1] + v[2] * v[2];
                let r = r2.sqrt();
                interior_margin(v[0] - r)?;
                let m = (v[0] - r) * (v[0] + r);
                let dot = v[1] * uv[1] + v[2] * uv[2];
                let out_t = (2.0 * (v[0] * v[0] + r2) * uv[0] - 4.0 * v[0] * dot) / (m * m);
                let mut out = DVector::zeros(3);
                out[0] = out_t;
                for i in 1..3 {
                    out[i] = (-4.0 * v[0] * uv[0] * v[i] + 2.0 * m * uv[i] + 4.0 * v[i] * dot) / (m * m);
                }
                Ok(AmbientPoint::vector(out))
            }
        }
    }

    /// Dense barrier Hessian over flat coordinates, for the vector-shaped
    /// sets where the smoothing derivative is solved directly.
    #[cfg(test)]
    pub(crate) fn barrier_hessian_dense(&self, p: &AmbientPoint) -> Result<DMatrix<f64>, SetError> {
        self.check_shape(p);
        match &self.kind {
            SetKind::Orthant { .. } => {
                let v = p.as_vector();
                interior_margin(v.min())?;
                Ok(DMatrix::from_diagonal(&DVector::from_fn(v.len(), |i, _| 1.0 / (v[i] * v[i]))))
            }
            SetKind::Polyhedron { a, b, .. } => {
                let m = a * p.as_vector() - b;
                interior_margin(m.min())?;
                let n = a.ncols();
                let mut h = DMatrix::zeros(n, n);
                for i in 0..a.nrows() {
                    let w = 1.0 / (m[i] * m[i]);
                    for c in 0..n {
                        for d in 0..n {
                            h[(c, d)] += w * a[(i, c)] * a[(i, d)];
                        }
                    }
                }
                Ok(h)
            }
            SetKind::LinfEpigraph { .. } => {
                let (t, x) = split_linf(p);
                let n = x.len();
                let mut h = DMatrix::zeros(n + 1, n + 1);
                for i in 0..n {
                    let (lo, hi) = (t - x[i], t + x[i]);
                    interior_margin(lo.min(hi))?;
                    let (wl, wh) = (1.0 / (lo * lo), 1.0 / (hi * hi));
                    h[(0, 0)] += wl + wh;
                    h[(0, 1 + i)] += -wl + wh;
                    h[(1 + i, 0)] += -wl + wh;
                    h[(1 + i, 1 + i)] += wl + wh;
                }
                Ok(h)
            }
            SetKind::SecondOrderCone3 => {
                let v = p.as_vector();
                let r2 = v[1] * v[1] + v[2] * v[2];
                let r = r2.sqrt();
                interior_margin(v[0] - r)?;
                let m = (v[0] - r) * (v[0] + r);
                let mut h = DMatrix::zeros(3, 3);
                h[(0, 0)] = 2.0 * (v[0] * v[0] + r2) / (m * m);
                for i in 1..3 {
                    h[(0, i)] = -4.0 * v[0] * v[i] / (m * m);
                    h[(i, 0)] = h[(0, i)];
                    for j in 1..3 {
                        h[(i, j)] = (if i == j { 2.0 * m } else { 0.0 } + 4.0 * v[i] * v[j]) / (m * m);
                    }
                }
                Ok(h)
            }
            _ => panic!("dense Hessian is only assembled for vector-shaped sets"),
        }
    }

    /// Exact Euclidean projection onto the set.
    pub fn exact_project(&self, z: &AmbientPoint) -> Result<AmbientPoint, SetError> {
        self.check_shape(z);
        match &self.kind {
            SetKind::Orthant { .. } => {
                let v = z.as_vector();
                Ok(AmbientPoint::vector(v.map(|x| x.max(0.0))))
            }
            SetKind::PsdCone { .. } => {
                let ef = sym_eigen(z.as_sym()).expect("symmetric eigendecomposition failed");
                let clipped = ef.lambda.map(|l| l.max(0.0));
                Ok(AmbientPoint::sym_matrix(&ef.q * DMatrix::from_diagonal(&clipped) * ef.q.transpose()))
            }
            SetKind::Polyhedron { a, b, .. } => {
                let v = z.as_vector();
                if a.nrows() <= 16 {
                    Ok(AmbientPoint::vector(proj::project_polyhedron_enum(a, b, v)))
                } else {
                    Ok(AmbientPoint::vector(proj::project_polyhedron_dual(a, b, v)?))
                }
            }
            SetKind::LinfEpigraph { .. } => {
                let (z_o, zx) = split_linf(z);
                let pr = proj::project_linf_coords(z_o, &zx);
                let mut out = DVector::zeros(zx.len() + 1);
                out[0] = pr.t;
                out.rows_mut(1, zx.len()).copy_from(&pr.x);
                Ok(AmbientPoint::vector(out))
            }
            SetKind::OpNormEpigraph { .. } => {
                let (z_o, zm) = z.as_scalar_matrix();
                let f = thin_svd(zm).expect("svd failed");
                let pr = proj::project_linf_coords(z_o, &f.sigma);
                Ok(AmbientPoint::scalar_matrix(pr.t, assemble_from_svd(&f.u, &pr.x, &f.v)))
            }
            SetKind::NuclearEpigraph { m, n } => {
                let (z_o, zm) = z.as_scalar_matrix();
                let neg = AmbientPoint::scalar_matrix(-z_o, -zm);
                let k = SmoothedSet::opnorm_epigraph(*m, *n);
                let pk = k.exact_project(&neg)?;
                let (p_o, p_m) = pk.as_scalar_matrix();
                Ok(AmbientPoint::scalar_matrix(z_o + p_o, zm + p_m))
            }
            SetKind::SecondOrderCone3 => {
                let (p, _) = proj::project_soc3(z.as_vector());
                Ok(AmbientPoint::vector(p))
            }
        }
    }

    /// Differentiability and face diagnostics of the projector at `z`.
    ///
    /// `tol` separates zero from nonzero margins; defaults to
    /// `1e-8 · (1 + ‖z‖)`.  Margins inside `[0, tol]` yield a conservative
    /// `differentiable = false`.
    pub fn diagnose(&self, z: &AmbientPoint, tol: Option<f64>) -> Result<FaceDiagnostics, SetError> {
        self.check_shape(z);
        let tol = tol.unwrap_or(1e-8 * (1.0 + z.norm()));
        match &self.kind {
            SetKind::Orthant { .. } => {
                let v = z.as_vector();
                let margin = v.iter().fold(f64::INFINITY, |acc, &x| acc.min(x.abs()));
                let diff = margin > tol;
                Ok(FaceDiagnostics {
                    differentiable: diff,
                    strictly_complementary: Some(diff),
                    active_set: (0..v.len()).filter(|&i| v[i] <= tol).collect(),
                    rank_info: (0..v.len()).filter(|&i| v[i] > tol).count(),
                    margin,
                    tol_used: tol,
                })
            }
            SetKind::PsdCone { .. } => {
                let ef = sym_eigen(z.as_sym()).expect("symmetric eigendecomposition failed");
                let margin = ef.lambda.iter().fold(f64::INFINITY, |acc, &l| acc.min(l.abs()));
                let diff = margin > tol;
                Ok(FaceDiagnostics {
                    differentiable: diff,
                    strictly_complementary: Some(diff),
                    active_set: (0..ef.lambda.len()).filter(|&i| ef.lambda[i] <= tol).collect(),
                    rank_info: (0..ef.lambda.len()).filter(|&i| ef.lambda[i] > tol).count(),
                    margin,
                    tol_used: tol,
                })
            }
            SetKind::Polyhedron { a, b, .. } => {
                let xbar = match self.exact_project(z)? {
                    AmbientPoint::DenseVector(v) => v,
                    _ => unreachable!(),
                };
                let margins = a * &xbar - b;
                let active: Vec<usize> = (0..a.nrows()).filter(|&i| margins[i] <= tol).collect();
                let inactive_margin = (0..a.nrows())
                    .filter(|i| !active.contains(i))
                    .map(|i| margins[i])
                    .fold(f64::INFINITY, f64::min);
                let resid = &xbar - z.as_vector();
                let (diff, margin) = if active.is_empty() {
                    (resid.norm() <= tol, inactive_margin)
                } else {
                    let k = active.len();
                    let mut asub = DMatrix::zeros(k, a.ncols());
                    for (r, &i) in active.iter().enumerate() {
                        asub.row_mut(r).copy_from(&a.row(i));
                    }
                    // Multipliers for x̄ − z = A_ℐᵀ λ; differentiability needs
                    // independent active rows with strictly positive λ.
                    let svd = asub.transpose().svd(true, true);
                    let smax = svd.singular_values.max();
                    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax.max(1.0)).count();
                    let lam = svd.solve(&resid, 1e-12).expect("least-squares solve failed");
                    let fit = (asub.transpose() * &lam - &resid).norm();
                    if rank < k || fit > tol * (1.0 + resid.norm()) {
                        (false, 0.0)
                    } else {
                        let lmin = lam.min();
                        (lmin > tol && inactive_margin > tol, lmin.min(inactive_margin))
                    }
                };
                Ok(FaceDiagnostics {
                    differentiable: diff,
                    strictly_complementary: None,
                    rank_info: active.len(),
                    active_set: active,
                    margin,
                    tol_used: tol,
                })
            }
            SetKind::LinfEpigraph { .. } => {
                let (z_o, zx) = split_linf(z);
                let mags = zx.abs();
                let mut sorted: Vec<f64> = mags.iter().copied().collect();
                sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
                let pr = proj::project_linf_coords(z_o, &zx);
                let d = diagnose_level_cut(z_o, &sorted, mags.sum(), pr.t, pr.k_star, tol);
                let mut order: Vec<usize> = (0..zx.len()).collect();
                order.sort_by(|&i, &j| mags[j].partial_cmp(&mags[i]).unwrap());
                Ok(FaceDiagnostics {
                    differentiable: d.0,
                    strictly_complementary: None,
                    active_set: order.into_iter().take(pr.k_star).collect(),
                    rank_info: pr.k_star,
                    margin: d.1,
                    tol_used: tol,
                })
            }
            SetKind::OpNormEpigraph { .. } => {
                let (z_o, zm) = z.as_scalar_matrix();
                let f = thin_svd(zm).expect("svd failed");
                Ok(diagnose_spectral(z_o, &f.sigma, tol))
            }
            SetKind::NuclearEpigraph { .. } => {
                // The projector here is I + Π_K∘(−·); its differentiability
                // and strict complementarity match the reflected query.
                let (z_o, zm) = z.as_scalar_matrix();
                let f = thin_svd(&(-zm)).expect("svd failed");
                Ok(diagnose_spectral(-z_o, &f.sigma, tol))
            }
            SetKind::SecondOrderCone3 => {
                let v = z.as_vector();
                let r = (v[1] * v[1] + v[2] * v[2]).sqrt();
                Ok(diagnose_spectral(v[0], &DVector::from_element(1, r), tol))
            }
        }
    }
}

/// Margin gate for barrier evaluations.
fn interior_margin(margin: f64) -> Result<(), SetError> {
    if margin > 0.0 {
        Ok(())
    } else {
        Err(SetError::BoundaryOrExterior { margin })
    }
}

fn psd_cholesky(m: &DMatrix<f64>) -> Result<nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>, SetError> {
    nalgebra::linalg::Cholesky::new(m.clone()).ok_or_else(|| {
        let margin = sym_eigen(m).map(|e| e.lambda.min()).unwrap_or(f64::NAN);
        SetError::BoundaryOrExterior { margin }
    })
}

pub(crate) fn split_linf(p: &AmbientPoint) -> (f64, DVector<f64>) {
    let v = p.as_vector();
    (v[0], DVector::from_fn(v.len() - 1, |i, _| v[1 + i]))
}

/// Differentiability verdict for the level-cut projection shared by the
/// ℓ∞ epigraph: returns (differentiable, certifying margin).
fn diagnose_level_cut(
    z_o: f64,
    sorted: &[f64],
    nuclear: f64,
    level: f64,
    k_star: usize,
    tol: f64,
) -> (bool, f64) {
    let n = sorted.len();
    let interior = z_o - sorted.first().copied().unwrap_or(0.0);
    if interior > tol {
        return (true, interior);
    }
    let polar = -z_o - nuclear;
    if polar > tol {
        return (true, polar);
    }
    let gap_up = if k_star >= 1 { sorted[k_star - 1] - level } else { f64::INFINITY };
    let gap_dn = if k_star < n { level - sorted[k_star] } else { f64::INFINITY };
    let margin = level.min(gap_up).min(gap_dn);
    (margin > tol, margin)
}

/// Diagnostics for the spectral epigraph cones, on the frame data
/// `(z_o, singular values in decreasing order)`.
fn diagnose_spectral(z_o: f64, sigma: &DVector<f64>, tol: f64) -> FaceDiagnostics {
    let q = sigma.len();
    let pr = proj::project_linf_coords(z_o, sigma);
    let sorted: Vec<f64> = sigma.iter().copied().collect();
    let (diff, margin) = diagnose_level_cut(z_o, &sorted, sigma.sum(), pr.t, pr.k_star, tol);

    // Strict complementarity via the rank pair of the complementary faces:
    // the clip multiplicity of the projection versus the rank of the residual
    // block.  Interior/polar cases degenerate to the margin conditions.
    let sc = if z_o - sigma.max() > tol || -z_o - sigma.sum() > tol {
        diff
    } else {
        let r = (0..q).filter(|&i| sigma[i] > pr.t - tol).count();
        let r_sharp = (0..q).filter(|&i| sigma[i] - pr.t > tol).count();
        pr.t > tol && r == r_sharp
    };

    FaceDiagnostics {
        differentiable: diff,
        strictly_complementary: Some(sc),
        active_set: (0..pr.k_star).collect(),
        rank_info: pr.k_star,
        margin,
        tol_used: tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn all_sets() -> Vec<SmoothedSet> {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]);
        let b = DVector::from_vec(vec![0.0, 0.0, -1.0, -1.0]);
        vec![
            SmoothedSet::orthant(3),
            SmoothedSet::psd_cone(3),
            SmoothedSet::polyhedron(a, b).unwrap(),
            SmoothedSet::linf_epigraph(4),
            SmoothedSet::opnorm_epigraph(2, 4),
            SmoothedSet::nuclear_epigraph(2, 3),
            SmoothedSet::second_order_cone3(),
        ]
    }

    #[test]
    fn theta_values() {
        let sets = all_sets();
        let want = [3.0, 3.0, 4.0, 8.0, 6.0, 5.0, 2.0];
        for (s, w) in sets.iter().zip(want) {
            assert_eq!(s.theta(), w, "{}", s.name());
        }
    }

    #[test]
    fn barrier_values_at_reference_points() {
        let s = SmoothedSet::orthant(2);
        assert_eq!(s.barrier_value(&AmbientPoint::vector_from(&[1.0, 1.0])).unwrap(), 0.0);

        let s = SmoothedSet::psd_cone(2);
        assert_eq!(s.barrier_value(&AmbientPoint::sym_matrix(DMatrix::identity(2, 2))).unwrap(), 0.0);

        let s = SmoothedSet::opnorm_epigraph(1, 1);
        let p = AmbientPoint::scalar_matrix(2.0, DMatrix::from_element(1, 1, 1.0));
        assert!((s.barrier_value(&p).unwrap() + 3.0f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn barrier_gradients_at_reference_points() {
        let s = SmoothedSet::orthant(2);
        let g = s.barrier_gradient(&AmbientPoint::vector_from(&[1.0, 2.0])).unwrap();
        assert!((g.as_vector() - DVector::from_vec(vec![-1.0, -0.5])).norm() < 1e-15);

        let s = SmoothedSet::psd_cone(2);
        let g = s.barrier_gradient(&AmbientPoint::sym_matrix(DMatrix::identity(2, 2))).unwrap();
        assert!((g.as_sym() + DMatrix::identity(2, 2)).norm() < 1e-12);

        let a = DMatrix::identity(2, 2);
        let s = SmoothedSet::polyhedron(a, DVector::zeros(2)).unwrap();
        let g = s.barrier_gradient(&AmbientPoint::vector_from(&[2.0, 4.0])).unwrap();
        assert!((g.as_vector() - DVector::from_vec(vec![-0.5, -0.25])).norm() < 1e-15);
    }

    #[test]
    fn boundary_points_are_rejected() {
        let s = SmoothedSet::orthant(2);
        assert!(matches!(
            s.barrier_value(&AmbientPoint::vector_from(&[1.0, -1.0])),
            Err(SetError::BoundaryOrExterior { .. })
        ));
        let s = SmoothedSet::nuclear_epigraph(1, 2);
        let p = AmbientPoint::scalar_matrix(1.0, DMatrix::from_row_slice(1, 2, &[2.0, 0.0]));
        assert!(matches!(s.barrier_value(&p), Err(SetError::BoundaryOrExterior { .. })));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut r = rng(21);
        for set in all_sets() {
            for _ in 0..50 {
                let p = set.random_interior(&mut r);
                let g = set.barrier_gradient(&p).unwrap().to_flat();
                let flat = p.to_flat();
                let eps = 1e-6 * (1.0 + flat.norm());
                // Random direction in flat coordinates.
                let d = DVector::from_fn(flat.len(), |_, _| 2.0 * r.random::<f64>() - 1.0).normalize();
                let plus = p.from_flat_like(&(&flat + eps * &d));
                let minus = p.from_flat_like(&(&flat - eps * &d));
                let fd = (set.barrier_value(&plus).unwrap() - set.barrier_value(&minus).unwrap())
                    / (2.0 * eps);
                let an = g.dot(&d);
                assert!(
                    (fd - an).abs() <= 1e-6 * (1.0 + an.abs()),
                    "{}: grad fd {fd:.8e} vs {an:.8e}",
                    set.name()
                );
            }
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let mut r = rng(22);
        for set in all_sets() {
            for _ in 0..50 {
                let p = set.random_interior(&mut r);
                let flat = p.to_flat();
                let d = DVector::from_fn(flat.len(), |_, _| 2.0 * r.random::<f64>() - 1.0).normalize();
                let u = p.from_flat_like(&d);
                let hu = set.barrier_hessian_apply(&p, &u).unwrap().to_flat();
                let eps = 1e-6 * (1.0 + flat.norm());
                let plus = p.from_flat_like(&(&flat + eps * &d));
                let minus = p.from_flat_like(&(&flat - eps * &d));
                let fd = (set.barrier_gradient(&plus).unwrap().to_flat()
                    - set.barrier_gradient(&minus).unwrap().to_flat())
                    / (2.0 * eps);
                let quad_fd = fd.dot(&d);
                let quad = hu.dot(&d);
                assert!(
                    (quad_fd - quad).abs() <= 1e-6 * (1.0 + quad.abs()),
                    "{}: hess fd {quad_fd:.8e} vs {quad:.8e}",
                    set.name()
                );
                assert!(quad > 0.0, "{}: Hessian not positive along d", set.name());
            }
        }
    }

    #[test]
    fn hessian_is_self_adjoint() {
        let mut r = rng(23);
        for set in all_sets() {
            for _ in 0..20 {
                let p = set.random_interior(&mut r);
                let u = set.random_ambient(&mut r, 1.0);
                let v = set.random_ambient(&mut r, 1.0);
                let hu = set.barrier_hessian_apply(&p, &u).unwrap();
                let hv = set.barrier_hessian_apply(&p, &v).unwrap();
                let lhs = u.inner(&hv);
                let rhs = v.inner(&hu);
                assert!(
                    (lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()),
                    "{}: asymmetry {lhs:.3e} vs {rhs:.3e}",
                    set.name()
                );
            }
        }
    }

    #[test]
    fn dense_hessian_matches_apply() {
        let mut r = rng(24);
        for set in all_sets() {
            match set.kind() {
                SetKind::Orthant { .. }
                | SetKind::Polyhedron { .. }
                | SetKind::LinfEpigraph { .. }
                | SetKind::SecondOrderCone3 => {}
                _ => continue,
            }
            for _ in 0..20 {
                let p = set.random_interior(&mut r);
                let h = set.barrier_hessian_dense(&p).unwrap();
                let u = set.random_ambient(&mut r, 1.0);
                let dense = &h * u.to_flat();
                let apply = set.barrier_hessian_apply(&p, &u).unwrap().to_flat();
                assert!((&dense - &apply).norm() <= 1e-10 * (1.0 + apply.norm()), "{}", set.name());
            }
        }
    }

    #[test]
    fn projection_reference_points() {
        let s = SmoothedSet::orthant(2);
        let p = s.exact_project(&AmbientPoint::vector_from(&[3.0, -4.0])).unwrap();
        assert!((p.as_vector() - DVector::from_vec(vec![3.0, 0.0])).norm() < 1e-15);

        let s = SmoothedSet::linf_epigraph(2);
        let p = s.exact_project(&AmbientPoint::vector_from(&[0.0, 2.0, 0.5])).unwrap();
        assert!((p.as_vector() - DVector::from_vec(vec![1.0, 1.0, 0.5])).norm() < 1e-14);
        let p = s.exact_project(&AmbientPoint::vector_from(&[-3.0, 1.0, 1.0])).unwrap();
        assert!(p.norm() < 1e-14);

        let s = SmoothedSet::nuclear_epigraph(1, 1);
        let z = AmbientPoint::scalar_matrix(-5.0, DMatrix::from_element(1, 1, 0.0));
        let p = s.exact_project(&z).unwrap();
        assert!(p.norm() < 1e-14);
    }

    #[test]
    fn projection_is_idempotent_and_nonexpansive() {
        let mut r = rng(25);
        for set in all_sets() {
            for _ in 0..30 {
                let z1 = set.random_ambient(&mut r, 2.0);
                let z2 = set.random_ambient(&mut r, 2.0);
                let p1 = set.exact_project(&z1).unwrap();
                let p2 = set.exact_project(&z2).unwrap();
                let pp1 = set.exact_project(&p1).unwrap();
                assert!(
                    pp1.sub(&p1).norm() <= 1e-10 * (1.0 + p1.norm()),
                    "{}: not idempotent, drift {:.3e} at z1 = {:?}",
                    set.name(),
                    pp1.sub(&p1).norm(),
                    z1.to_flat().as_slice()
                );
                assert!(
                    p1.sub(&p2).norm() <= z1.sub(&z2).norm() + 1e-10,
                    "{}: expansive",
                    set.name()
                );
            }
        }
    }

    #[test]
    fn moreau_identity_for_the_cone_pair() {
        let mut r = rng(26);
        let k = SmoothedSet::opnorm_epigraph(2, 3);
        let ks = SmoothedSet::nuclear_epigraph(2, 3);
        for _ in 0..50 {
            let z = k.random_ambient(&mut r, 2.0);
            let (z_o, zm) = z.as_scalar_matrix();
            let neg = AmbientPoint::scalar_matrix(-z_o, -zm);
            let pk = k.exact_project(&neg).unwrap();
            let pks = ks.exact_project(&z).unwrap();
            // z decomposes as the difference of the mutually polar parts.
            let diff = pks.sub(&pk).sub(&z).norm();
            assert!(diff <= 1e-10 * (1.0 + z.norm()), "moreau residual {diff:.3e}");
            // The two parts are orthogonal.
            let ip = pks.inner(&pk);
            assert!(ip.abs() <= 1e-9 * (1.0 + z.norm().powi(2)), "pairing {ip:.3e}");
        }
    }

    #[test]
    fn diagnose_reference_cases() {
        let s = SmoothedSet::orthant(2);
        let d = s.diagnose(&AmbientPoint::vector_from(&[3.0, -4.0]), None).unwrap();
        assert!(d.differentiable && d.strictly_complementary == Some(true));
        assert_eq!(d.rank_info, 1);

        let s = SmoothedSet::psd_cone(2);
        let mut z = DMatrix::zeros(2, 2);
        z[(0, 0)] = 1.0;
        let d = s.diagnose(&AmbientPoint::sym_matrix(z), None).unwrap();
        assert!(!d.differentiable && d.strictly_complementary == Some(false));

        let s = SmoothedSet::opnorm_epigraph(2, 3);
        let mut x = DMatrix::zeros(2, 3);
        x[(0, 0)] = 2.0;
        let d = s.diagnose(&AmbientPoint::scalar_matrix(5.0, x), None).unwrap();
        assert!(d.differentiable, "interior point must be differentiable");
        assert_eq!(d.rank_info, 0);
    }

    #[test]
    fn diagnose_spectral_middle_cases() {
        // Singular values (2, 0.5) with z_o = 0.4 clip only the top value to
        // level 1.2: strict gaps on both sides.
        let s = SmoothedSet::opnorm_epigraph(2, 3);
        let mut x = DMatrix::zeros(2, 3);
        x[(0, 0)] = 2.0;
        x[(1, 1)] = 0.5;
        let d = s.diagnose(&AmbientPoint::scalar_matrix(0.4, x.clone()), None).unwrap();
        assert!(d.differentiable && d.strictly_complementary == Some(true));
        assert_eq!(d.rank_info, 1);

        // z_o = 0 puts the level exactly at the second singular value (tie):
        // not differentiable, not strictly complementary.
        x[(1, 1)] = 1.0;
        let d = s.diagnose(&AmbientPoint::scalar_matrix(0.0, x.clone()), None).unwrap();
        assert!(!d.differentiable && d.strictly_complementary == Some(false));

        // The nuclear side sees the reflected picture.
        let ks = SmoothedSet::nuclear_epigraph(2, 3);
        let d = ks
            .diagnose(&AmbientPoint::scalar_matrix(-0.4, { let mut y = DMatrix::zeros(2, 3); y[(0,0)] = -2.0; y[(1,1)] = -0.5; y }), None)
            .unwrap();
        assert!(d.differentiable && d.strictly_complementary == Some(true));
    }

    #[test]
    fn diagnose_matches_strict_complementarity_on_cones() {
        // For the cone kinds the two verdicts must coincide on cleanly
        // separated instances, strict or degenerate.
        let mut r = rng(27);
        for _ in 0..40 {
            let s = SmoothedSet::psd_cone(3);
            let q = nalgebra::linalg::QR::new(DMatrix::from_fn(3, 3, |_, _| r.random::<f64>())).q();
            let strict = r.random::<bool>();
            let lam = DVector::from_fn(3, |i, _| {
                if !strict && i == 1 {
                    0.0
                } else {
                    (0.5 + r.random::<f64>()) * if r.random::<bool>() { 1.0 } else { -1.0 }
                }
            });
            let z = AmbientPoint::sym_matrix(&q * DMatrix::from_diagonal(&lam) * q.transpose());
            let d = s.diagnose(&z, None).unwrap();
            assert_eq!(d.differentiable, d.strictly_complementary.unwrap());
            assert_eq!(d.differentiable, strict);
        }
    }

    #[test]
    fn diagnose_polyhedron_multipliers() {
        let s = SmoothedSet::polyhedron(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        let d = s.diagnose(&AmbientPoint::vector_from(&[2.0, -3.0]), None).unwrap();
        assert!(d.differentiable, "strict multiplier case");
        assert_eq!(d.active_set, vec![1]);

        // Projection residual zero on an active constraint: multiplier 0.
        let d = s.diagnose(&AmbientPoint::vector_from(&[2.0, 0.0]), None).unwrap();
        assert!(!d.differentiable, "zero multiplier is degenerate");
    }

    #[test]
    fn nuclear_barrier_matches_conjugacy_identity() {
        // f♯(s) + f(x̄) = −⟨s, x̄⟩ with ∇f(x̄) = −s: evaluate both sides
        // through independent routes.
        let mut r = rng(28);
        let ks = SmoothedSet::nuclear_epigraph(2, 3);
        let k = SmoothedSet::opnorm_epigraph(2, 3);
        for _ in 0..20 {
            let s = ks.random_interior(&mut r);
            let val = ks.barrier_value(&s).unwrap();
            let xbar_neg = ks.barrier_gradient(&s).unwrap();
            let xbar = xbar_neg.scale(-1.0);
            let fk = k.barrier_value(&xbar).unwrap();
            let pairing = s.inner(&xbar);
            assert!(
                (val + fk + pairing).abs() <= 1e-8 * (1.0 + val.abs() + fk.abs()),
                "conjugacy identity violated: {val:.6e} + {fk:.6e} + {pairing:.6e}"
            );
            // And the gradient of f at x̄ recovers −s.
            let gk = k.barrier_gradient(&xbar).unwrap();
            assert!(gk.add(&s).norm() <= 1e-8 * (1.0 + s.norm()));
        }
    }

    #[test]
    fn canonical_interiors_are_interior() {
        for set in all_sets() {
            let p = set.canonical_interior();
            assert!(set.barrier_value(&p).is_ok(), "{}", set.name());
        }
    }
}
