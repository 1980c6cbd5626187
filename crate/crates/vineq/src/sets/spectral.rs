//! Shared spectral kernels for the operator-norm epigraph cone and its dual
//! (the nuclear-norm epigraph).
//!
//! Every operation on these cones reduces, after one thin SVD of the matrix
//! part, to scalar work on the diagonal frame.  For `x = (t, X)` with
//! `X = u [Diag(σ) 0] vᵀ` (m ≤ n), the log-det barrier of the block matrix
//! `[[t Iₙ, Xᵀ], [X, t Iₘ]]` collapses to
//!
//! ```text
//! φ(t, σ) = −Σᵢ log(t² − σᵢ²) − (n − m) log t .
//! ```
//!
//! This module provides, all in the reduced frame and valid for *signed*
//! diagonal values (the conjugate solve visits them):
//!
//! * `reduced_barrier_value` / `reduced_barrier_gradient` for φ;
//! * [`SpectralHessian`]: the action and the exact inverse-action of
//!   `a·I + b·∇²f` on full in-frame matrices, decomposed into one coupled
//!   `(m+1)`-dimensional system for the scalar/diagonal coordinates, 2×2
//!   systems for off-diagonal pairs `(h̄ᵢⱼ, h̄ⱼᵢ)`, and scalar divisions for
//!   the rectangular block;
//! * `conjugate_reduced_solve`: the Newton solve of `c·∇φ(x) = −s`, used for
//!   the conjugate barrier of the nuclear epigraph.  It runs in margin-primary
//!   coordinates `(x₀, mᵢ = x₀ − |χᵢ|)` so the tiny margins that appear near
//!   the boundary stay fully resolved in f64.

use nalgebra::{DMatrix, DVector};

use crate::inewton::solve_interior_system;

/// Barrier value φ(t, σ) in the reduced frame; `sig` may be signed.
pub(crate) fn reduced_barrier_value(t: f64, sig: &DVector<f64>, n: usize) -> f64 {
    let q = sig.len();
    let mut val = -((n - q) as f64) * t.ln();
    for i in 0..q {
        val -= ((t - sig[i]) * (t + sig[i])).ln();
    }
    val
}

/// Gradient (∂φ/∂t, ∂φ/∂σ) in the reduced frame.
pub(crate) fn reduced_barrier_gradient(t: f64, sig: &DVector<f64>, n: usize) -> (f64, DVector<f64>) {
    let q = sig.len();
    let mut g_t = -((n - q) as f64) / t;
    let mut g_s = DVector::zeros(q);
    for i in 0..q {
        let p = (t - sig[i]) * (t + sig[i]);
        g_t -= 2.0 * t / p;
        g_s[i] = 2.0 * sig[i] / p;
    }
    (g_t, g_s)
}

/// In-frame representation of `a·I + b·∇²f` at a point `(t, X)` of the
/// operator-norm epigraph cone, where `∇²f` is the barrier Hessian.
///
/// The scalar data (`d1`, `delta`, `d2`) are the diagonal blocks of the
/// factored Hessian; both the forward action and the exact inverse action
/// decouple over the frame coordinates.
pub(crate) struct SpectralHessian {
    /// t / (t² − σᵢ²)
    pub d1: DVector<f64>,
    /// −σᵢ / (t² − σᵢ²)
    pub delta: DVector<f64>,
    /// 1/t, acting on the n−m trailing frame columns
    pub d2: f64,
    pub q: usize,
    pub n: usize,
}

impl SpectralHessian {
    /// Build from frame coordinates; `prod[i]`, when given, supplies
    /// `t² − σᵢ²` in certified stable form `(t−|σᵢ|)·(t+|σᵢ|)`.
    pub(crate) fn new(t: f64, sig: DVector<f64>, n: usize, prod: Option<&DVector<f64>>) -> Self {
        let q = sig.len();
        let mut d1 = DVector::zeros(q);
        let mut delta = DVector::zeros(q);
        for i in 0..q {
            let p = match prod {
                Some(pr) => pr[i],
                None => (t - sig[i]) * (t + sig[i]),
            };
            d1[i] = t / p;
            delta[i] = -sig[i] / p;
        }
        SpectralHessian { d1, delta, d2: 1.0 / t, q, n }
    }

    /// Forward action `(a·I + b·∇²f)(h)` on an in-frame pair
    /// `(h_o, h̄ ∈ ℝ^{q×n})`.
    pub(crate) fn apply(&self, a: f64, b: f64, h_o: f64, hbar: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let (q, n) = (self.q, self.n);
        assert_eq!((hbar.nrows(), hbar.ncols()), (q, n), "shape mismatch in spectral apply");
        let trace_sq: f64 = (0..q).map(|i| self.d1[i] * self.d1[i] + self.delta[i] * self.delta[i]).sum();
        let mut scal = h_o * (2.0 * trace_sq + ((n - q) as f64) * self.d2 * self.d2);
        for i in 0..q {
            scal += 4.0 * self.delta[i] * hbar[(i, i)] * self.d1[i];
        }
        let mut out = DMatrix::zeros(q, n);
        for i in 0..q {
            for j in 0..q {
                let mut e = 2.0 * (self.d1[i] * hbar[(i, j)] * self.d1[j]
                    + self.delta[i] * hbar[(j, i)] * self.delta[j]);
                if i == j {
                    e += 4.0 * h_o * self.delta[i] * self.d1[i];
                }
                out[(i, j)] = a * hbar[(i, j)] + b * e;
            }
            for j in q..n {
                out[(i, j)] = (a + 2.0 * b * self.d1[i] * self.d2) * hbar[(i, j)];
            }
        }
        (a * h_o + b * scal, out)
    }

    /// Exact inverse action: solves `(a·I + b·∇²f)(h) = w` for an in-frame
    /// pair `(w_o, w̄)`.  Requires `a + b·(spectrum) > 0`, which holds for the
    /// resolvent (`a = 1, b = μ²`) and for the plain inverse Hessian
    /// (`a = 0, b = 1`) at interior points.
    pub(crate) fn solve(&self, a: f64, b: f64, w_o: f64, wbar: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let (q, n) = (self.q, self.n);
        assert_eq!((wbar.nrows(), wbar.ncols()), (q, n), "shape mismatch in spectral solve");
        let trace_sq: f64 = (0..q).map(|i| self.d1[i] * self.d1[i] + self.delta[i] * self.delta[i]).sum();

        // Coupled system for (h_o, h̄₁₁, …, h̄_qq).
        let mut mat = DMatrix::zeros(q + 1, q + 1);
        let mut rhs = DVector::zeros(q + 1);
        mat[(0, 0)] = a + b * (2.0 * trace_sq + ((n - q) as f64) * self.d2 * self.d2);
        rhs[0] = w_o;
        for i in 0..q {
            let c = 4.0 * b * self.delta[i] * self.d1[i];
            mat[(0, i + 1)] = c;
            mat[(i + 1, 0)] = c;
            mat[(i + 1, i + 1)] =
                a + 2.0 * b * (self.d1[i] * self.d1[i] + self.delta[i] * self.delta[i]);
            rhs[i + 1] = wbar[(i, i)];
        }
        let sol = mat
            .lu()
            .solve(&rhs)
            .expect("coupled diagonal system of the spectral Hessian is singular");
        let h_o = sol[0];
        let mut hbar = DMatrix::zeros(q, n);
        for i in 0..q {
            hbar[(i, i)] = sol[i + 1];
        }

        // 2×2 systems per off-diagonal pair (i < j).
        for i in 0..q {
            for j in (i + 1)..q {
                let diag = a + 2.0 * b * self.d1[i] * self.d1[j];
                let off = 2.0 * b * self.delta[i] * self.delta[j];
                let det = diag * diag - off * off;
                hbar[(i, j)] = (diag * wbar[(i, j)] - off * wbar[(j, i)]) / det;
                hbar[(j, i)] = (diag * wbar[(j, i)] - off * wbar[(i, j)]) / det;
            }
        }

        // Rectangular block: scalar solves.
        for i in 0..q {
            let c = a + 2.0 * b * self.d1[i] * self.d2;
            for j in q..n {
                hbar[(i, j)] = wbar[(i, j)] / c;
            }
        }
        (h_o, hbar)
    }
}

/// Transform a full matrix into the frame: `uᵀ · w · v`.
pub(crate) fn to_frame(u: &DMatrix<f64>, v: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    u.transpose() * w * v
}

/// Transform an in-frame matrix back: `u · h̄ · vᵀ`.
pub(crate) fn from_frame(u: &DMatrix<f64>, v: &DMatrix<f64>, hbar: &DMatrix<f64>) -> DMatrix<f64> {
    u * hbar * v.transpose()
}

/// Solution of the conjugate equation `c·∇φ(x₀, χ) = −(s₀, s)`.
pub(crate) struct ConjugateSolution {
    pub x_o: f64,
    /// Signed diagonal values, aligned with the input `s_diag`.
    pub chi: DVector<f64>,
    /// Certified margins `x₀ − |χᵢ|` (primary unknowns of the solve).
    pub margins: DVector<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Solve `c·∇φ(x₀, χ) = −(s₀, s_diag)` over the interior `x₀ > |χᵢ|`.
///
/// Solvability requires `(s₀, s_diag)` to lie in the interior of the dual
/// cone, `s₀ > Σ|s_diagᵢ|`; the caller checks that.  The Newton iteration
/// runs in the margin-primary unknowns `(x₀, mᵢ = x₀ − sgnᵢ·χᵢ)` with
/// `sgnᵢ = −sign(s_diagᵢ)`, so margins are first-class f64 quantities and the
/// achieved residual reaches the roundoff floor even when `x₀/mᵢ` is huge.
pub(crate) fn conjugate_reduced_solve(
    c: f64,
    s_o: f64,
    s_diag: &DVector<f64>,
    n: usize,
    tol: f64,
) -> ConjugateSolution {
    let q = s_diag.len();
    debug_assert!(s_o > 0.0 && c > 0.0);
    let extra = (n - q) as f64;
    let mag = s_diag.abs();

    let residual = |w: &DVector<f64>| {
        let x_o = w[0];
        let mut r = DVector::zeros(q + 1);
        let mut sum = extra / x_o;
        for i in 0..q {
            let m = w[1 + i];
            let p = m * (2.0 * x_o - m);
            sum += 2.0 * x_o / p;
            r[1 + i] = c * 2.0 * (x_o - m) / p - mag[i];
        }
        r[0] = c * sum - s_o;
        r
    };
    let jacobian = |w: &DVector<f64>| {
        let x_o = w[0];
        let mut jac = DMatrix::zeros(q + 1, q + 1);
        jac[(0, 0)] = -c * extra / (x_o * x_o);
        for i in 0..q {
            let m = w[1 + i];
            let p = m * (2.0 * x_o - m);
            let chi = x_o - m;
            jac[(0, 0)] += c * (2.0 / p - 4.0 * x_o * m / (p * p));
            jac[(0, 1 + i)] = -4.0 * c * x_o * chi / (p * p);
            jac[(1 + i, 0)] = c * (2.0 / p - 4.0 * chi * m / (p * p));
            jac[(1 + i, 1 + i)] = c * (-2.0 * p - 4.0 * chi * chi) / (p * p);
        }
        jac
    };
    let margins = |w: &DVector<f64>| {
        let x_o = w[0];
        let mut m = DVector::zeros(2 * q + 1);
        for i in 0..q {
            m[i] = w[1 + i];
            m[q + i] = 2.0 * x_o - w[1 + i];
        }
        m[2 * q] = x_o;
        m
    };

    let x0 = c * ((n + q) as f64) / s_o;
    let mut start = DVector::from_element(q + 1, x0);
    start[0] = x0;

    let report = solve_interior_system(start, residual, jacobian, margins, tol, 100);
    let x_o = report.point[0];
    let mut chi = DVector::zeros(q);
    let mut marg = DVector::zeros(q);
    for i in 0..q {
        let m = report.point[1 + i];
        let sgn = if s_diag[i] > 0.0 { -1.0 } else { 1.0 };
        chi[i] = sgn * (x_o - m);
        marg[i] = m.min(2.0 * x_o - m);
    }
    ConjugateSolution {
        x_o,
        chi,
        margins: marg,
        residual_norm: report.residual_norm,
        iterations: report.iterations,
    }
}
