//! Barrier-based smoothings `p_μ` of Euclidean projections, together with
//! the derivative actions `u ↦ Dp_μ(z)[u]`.
//!
//! For a set `X` carrying a self-concordant barrier `f`, the smoothed
//! projection is the unique interior solution of
//!
//! ```text
//!     p + μ² ∇f(p) = z,        p = p_μ(z) ∈ int X,    μ > 0,
//! ```
//!
//! which tends to the Euclidean projection `Π_X(z)` as `μ → 0` and is smooth
//! in `(z, μ)` for `μ > 0`.  Differentiating the defining equation in `z`
//! gives the resolvent form of the derivative,
//!
//! ```text
//!     Dp_μ(z) = (I + μ² ∇²f(p_μ(z)))⁻¹,        0 ≺ Dp_μ(z) ≺ I,
//! ```
//!
//! evaluated per set by a fast path (diagonal, Löwner, spectral block solve,
//! reflection) or by a generic resolvent solve (dense Cholesky up to
//! dimension 200, conjugate gradients above).
//!
//! Every evaluation is certified: [`SmoothingEval`] reports the residual of
//! the defining equation actually achieved and the smallest interior margin
//! of `p`.  The implicit solvers run in margin-primary coordinates — the
//! distances to the boundary are first-class unknowns rather than quantities
//! recovered by subtracting large numbers — which is what keeps the
//! certificates at the roundoff floor even when margins are of order `μ²`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::inewton::solve_interior_system;
use crate::sets::spectral::{from_frame, to_frame, SpectralHessian};
use crate::sets::{split_linf, SetError, SetKind, SmoothedSet};
use crate::space::{assemble_from_svd, sym_eigen, thin_svd, AmbientPoint};

/// Residual acceptance threshold, relative to `1 + ‖z‖`.
const ACCEPT: f64 = 1e-11;

/// Failure modes of the smoothing evaluations.
#[derive(Debug, Error)]
pub enum SmoothingError {
    /// The inner Newton solve for an implicitly defined `p_μ` stalled above
    /// the residual acceptance threshold.
    #[error("inner Newton stalled at residual {residual:.3e} after {iters} iterations")]
    InnerNewtonDiverged { residual: f64, iters: usize },
    /// The set has no strictly feasible point, so no smoothing exists.
    #[error("set has no strictly feasible point")]
    InfeasibleSet,
    /// A derivative factorization or auxiliary linear solve failed.
    #[error("derivative solve failed: {0}")]
    InnerSolveFailed(String),
}

/// One evaluation of `p_μ(z)` together with its certificates.
#[derive(Clone, Debug)]
pub struct SmoothingEval {
    /// The smoothed projection `p_μ(z)`.
    pub value: AmbientPoint,
    /// Smallest interior margin of `value` (e.g. `min_i (Ap − b)_i`, or
    /// `min(t − σ_i, t + σ_i)` for the epigraph sets); strictly positive for
    /// `μ > 0`.  Reported as `0` at `μ = 0`, where the projection generically
    /// sits on the boundary.
    pub interior_certificate: f64,
    /// Iterations spent in inner Newton solves (0 for closed forms).
    pub inner_newton_iters: usize,
    /// Achieved residual `‖p + μ²∇f(p) − z‖` (0 at `μ = 0` by definition).
    pub residual: f64,
}

fn lift_set_error(e: SetError) -> SmoothingError {
    match e {
        SetError::InfeasibleSet => SmoothingError::InfeasibleSet,
        SetError::OracleFallbackNotConverged { residual, iters } => {
            SmoothingError::InnerNewtonDiverged { residual, iters }
        }
        SetError::BoundaryOrExterior { margin } => SmoothingError::InnerSolveFailed(format!(
            "unexpected boundary evaluation (margin {margin:.3e})"
        )),
    }
}

/// Scalar smoothed clip `½(z + √(z² + 4μ²))` in a cancellation-free form.
fn chks(z: f64, mu: f64) -> f64 {
    let s = (z * z + 4.0 * mu * mu).sqrt();
    if z >= 0.0 {
        0.5 * (z + s)
    } else {
        2.0 * mu * mu / (s - z)
    }
}

/// Derivative of the scalar smoothed clip, `½(1 + z/√(z² + 4μ²))`.
fn chks_deriv(z: f64, mu: f64) -> f64 {
    0.5 * (1.0 + z / (z * z + 4.0 * mu * mu).sqrt())
}

fn orthant_smooth(v: &DVector<f64>, mu: f64) -> (DVector<f64>, f64, f64) {
    let mu2 = mu * mu;
    let mut p = DVector::zeros(v.len());
    let mut cert = f64::INFINITY;
    let mut rss = 0.0;
    for i in 0..v.len() {
        p[i] = chks(v[i], mu);
        cert = cert.min(p[i]);
        let r = (p[i] - v[i]) - mu2 / p[i];
        rss += r * r;
    }
    (p, cert, rss.sqrt())
}

fn psd_smooth(zm: &DMatrix<f64>, mu: f64) -> Result<(DMatrix<f64>, f64, f64), SmoothingError> {
    let ef = sym_eigen(zm).map_err(|e| SmoothingError::InnerSolveFailed(e.to_string()))?;
    let mu2 = mu * mu;
    let n = zm.nrows();
    let mut pvals = DVector::zeros(n);
    let mut cert = f64::INFINITY;
    let mut rss = 0.0;
    for i in 0..n {
        pvals[i] = chks(ef.lambda[i], mu);
        cert = cert.min(pvals[i]);
        let r = (pvals[i] - ef.lambda[i]) - mu2 / pvals[i];
        rss += r * r;
    }
    let pm = &ef.q * DMatrix::from_diagonal(&pvals) * ef.q.transpose();
    Ok((0.5 * (&pm + pm.transpose()), cert, rss.sqrt()))
}

/// Closed-form smoothing for the 3-dimensional second-order cone.  Returns
/// `(p, t − ‖x‖, t + ‖x‖, residual)`; the margins are rationalized so no
/// catastrophic cancellation occurs deep in the polar cone.
fn soc3_smooth(v: &DVector<f64>, mu: f64) -> (DVector<f64>, f64, f64, f64) {
    let mu2 = mu * mu;
    let t0 = v[0];
    let nz = (v[1] * v[1] + v[2] * v[2]).sqrt();
    let d1 = t0 - nz;
    let d2 = t0 + nz;
    let s1 = (d1 * d1 + 8.0 * mu2).sqrt();
    let s2 = (d2 * d2 + 8.0 * mu2).sqrt();
    let m1 = if d1 >= 0.0 { 0.5 * (d1 + s1) } else { 4.0 * mu2 / (s1 - d1) };
    let m2 = if d2 >= 0.0 { 0.5 * (d2 + s2) } else { 4.0 * mu2 / (s2 - d2) };
    let t = 0.5 * (m1 + m2);
    // The radial coefficient c = ‖x‖/‖z°‖ has two algebraically identical
    // forms; `½ + t°/(s1+s2)` cancels catastrophically deep in the polar cone
    // (c ~ μ² there), so that side uses the margin-product form, whose
    // factors are all sums of positives when t° < 0.
    let c = if t0 >= 0.0 {
        0.5 + t0 / (s1 + s2)
    } else {
        (m1 / (4.0 * mu2)) * m2 * ((s1 + s2 - 2.0 * t0) / (s1 + s2))
    };
    let p = DVector::from_column_slice(&[t, c * v[1], c * v[2]]);
    let ratio = (2.0 * mu2 / m1) / m2;
    let rt = t * (1.0 - ratio) - t0;
    let rx = c * (1.0 + ratio) - 1.0;
    let resid = (rt * rt + (rx * v[1]).powi(2) + (rx * v[2]).powi(2)).sqrt();
    (p, m1, m2, resid)
}

struct LinfCore {
    t: f64,
    m: DVector<f64>,
    signs: DVector<f64>,
    iters: usize,
    residual: f64,
}

/// Implicit smoothing for the ℓ∞-norm epigraph: Newton in `(t, m)` where
/// `mᵢ = t − sᵢxᵢ` is the margin against the nearest face and `2t − mᵢ` the
/// margin against the opposite one (`sᵢ = sign zᵢ`).
fn linf_core(
    z_o: f64,
    zc: &DVector<f64>,
    mu: f64,
    warm: Option<&AmbientPoint>,
) -> Result<LinfCore, SmoothingError> {
    let n = zc.len();
    let mu2 = mu * mu;
    let signs = DVector::from_fn(n, |i, _| if zc[i] < 0.0 { -1.0 } else { 1.0 });
    let zabs = zc.abs();
    let scale = 1.0 + (z_o * z_o + zc.norm_squared()).sqrt();

    let mut start = DVector::zeros(n + 1);
    let mut warm_ok = false;
    if let Some(w) = warm {
        let (tw, xw) = split_linf(w);
        if tw > 0.0 {
            start[0] = tw;
            warm_ok = true;
            for i in 0..n {
                let mi = tw - signs[i] * xw[i];
                if mi <= 0.0 || mi >= 2.0 * tw {
                    warm_ok = false;
                    break;
                }
                start[1 + i] = mi;
            }
        }
    }
    if !warm_ok {
        let maxabs = zabs.max();
        let t0 = maxabs + (z_o - maxabs).max(1.0);
        start[0] = t0;
        for i in 0..n {
            start[1 + i] = t0 - zabs[i].min(0.9 * t0);
        }
    }

    let residual = |w: &DVector<f64>| {
        let t = w[0];
        let mut r = DVector::zeros(n + 1);
        let mut acc = 0.0;
        for i in 0..n {
            let (mi, ci) = (w[1 + i], 2.0 * t - w[1 + i]);
            acc += 1.0 / mi + 1.0 / ci;
            r[1 + i] = (t - mi) + mu2 * (1.0 / mi - 1.0 / ci) - zabs[i];
        }
        r[0] = t - mu2 * acc - z_o;
        r
    };
    let jacobian = |w: &DVector<f64>| {
        let t = w[0];
        let mut j = DMatrix::zeros(n + 1, n + 1);
        let mut acc = 0.0;
        for i in 0..n {
            let (mi, ci) = (w[1 + i], 2.0 * t - w[1 + i]);
            let (im2, ic2) = (1.0 / (mi * mi), 1.0 / (ci * ci));
            acc += 2.0 * ic2;
            j[(0, 1 + i)] = mu2 * (im2 - ic2);
            j[(1 + i, 0)] = 1.0 + 2.0 * mu2 * ic2;
            j[(1 + i, 1 + i)] = -1.0 - mu2 * (im2 + ic2);
        }
        j[(0, 0)] = 1.0 + mu2 * acc;
        j
    };
    let margins = |w: &DVector<f64>| {
        let t = w[0];
        let mut m = DVector::zeros(2 * n + 1);
        for i in 0..n {
            m[i] = w[1 + i];
            m[n + i] = 2.0 * t - w[1 + i];
        }
        m[2 * n] = t;
        m
    };

    let rep = solve_interior_system(start, residual, jacobian, margins, 1e-12 * scale, 100);
    if rep.residual_norm > ACCEPT * scale {
        return Err(SmoothingError::InnerNewtonDiverged {
            residual: rep.residual_norm,
            iters: rep.iterations,
        });
    }
    let t = rep.point[0];
    let m = DVector::from_fn(n, |i, _| rep.point[1 + i]);
    Ok(LinfCore { t, m, signs, iters: rep.iterations, residual: rep.residual_norm })
}

struct OpCore {
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    t: f64,
    /// Smoothed singular values `t − mᵢ`, aligned with the frame.
    sig: DVector<f64>,
    /// Margins `t − σᵢ` (primary unknowns of the solve).
    m: DVector<f64>,
    /// Certified `t² − σᵢ² = mᵢ(2t − mᵢ)`.
    prod: DVector<f64>,
    n: usize,
    iters: usize,
    residual: f64,
}

/// Implicit smoothing for the operator-norm epigraph: thin SVD of the matrix
/// part, then Newton in `(t, m)` on the reduced singular-value system; the
/// result reassembles in the same frame.
fn opnorm_core(
    z_o: f64,
    zm: &DMatrix<f64>,
    mu: f64,
    warm: Option<&AmbientPoint>,
) -> Result<OpCore, SmoothingError> {
    let (q, n) = zm.shape();
    let mu2 = mu * mu;
    let f = thin_svd(zm).map_err(|e| SmoothingError::InnerSolveFailed(e.to_string()))?;
    let sig0 = f.sigma.clone();
    let extra = (n - q) as f64;
    let scale = 1.0 + (z_o * z_o + zm.norm_squared()).sqrt();

    let mut start = DVector::zeros(q + 1);
    let mut warm_ok = false;
    if let Some(w) = warm {
        let (tw, xw) = w.as_scalar_matrix();
        if tw > 0.0 {
            if let Ok(fw) = thin_svd(xw) {
                start[0] = tw;
                warm_ok = true;
                for i in 0..q {
                    let mi = tw - fw.sigma[i];
                    if mi <= 0.0 || mi >= 2.0 * tw {
                        warm_ok = false;
                        break;
                    }
                    start[1 + i] = mi;
                }
            }
        }
    }
    if !warm_ok {
        let t0 = sig0[0] + (z_o - sig0[0]).max(1.0);
        start[0] = t0;
        for i in 0..q {
            start[1 + i] = t0 - sig0[i].min(0.9 * t0);
        }
    }

    let residual = |w: &DVector<f64>| {
        let t = w[0];
        let mut r = DVector::zeros(q + 1);
        let mut acc = extra / t;
        for i in 0..q {
            let mi = w[1 + i];
            let p = mi * (2.0 * t - mi);
            acc += 2.0 * t / p;
            r[1 + i] = (t - mi) * (1.0 + 2.0 * mu2 / p) - sig0[i];
        }
        r[0] = t - mu2 * acc - z_o;
        r
    };
    let jacobian = |w: &DVector<f64>| {
        let t = w[0];
        let mut j = DMatrix::zeros(q + 1, q + 1);
        let mut jt = 1.0 + mu2 * extra / (t * t);
        for i in 0..q {
            let mi = w[1 + i];
            let p = mi * (2.0 * t - mi);
            let si = t - mi;
            jt -= mu2 * (2.0 / p - 4.0 * t * mi / (p * p));
            j[(0, 1 + i)] = 4.0 * mu2 * t * si / (p * p);
            j[(1 + i, 0)] = 1.0 + 2.0 * mu2 / p - 4.0 * mu2 * si * mi / (p * p);
            j[(1 + i, 1 + i)] = -1.0 - 2.0 * mu2 / p - 4.0 * mu2 * si * si / (p * p);
        }
        j[(0, 0)] = jt;
        j
    };
    let margins = |w: &DVector<f64>| {
        let t = w[0];
        let mut m = DVector::zeros(2 * q + 1);
        for i in 0..q {
            m[i] = w[1 + i];
            m[q + i] = 2.0 * t - w[1 + i];
        }
        m[2 * q] = t;
        m
    };

    let rep = solve_interior_system(start, residual, jacobian, margins, 1e-12 * scale, 100);
    if rep.residual_norm > ACCEPT * scale {
        return Err(SmoothingError::InnerNewtonDiverged {
            residual: rep.residual_norm,
            iters: rep.iterations,
        });
    }
    let t = rep.point[0];
    let m = DVector::from_fn(q, |i, _| rep.point[1 + i]);
    let sig = DVector::from_fn(q, |i, _| t - m[i]);
    let prod = DVector::from_fn(q, |i, _| m[i] * (2.0 * t - m[i]));
    Ok(OpCore { u: f.u, v: f.v, t, sig, m, prod, n, iters: rep.iterations, residual: rep.residual_norm })
}

struct PolyCore {
    s: DVector<f64>,
    p: DVector<f64>,
    iters: usize,
    residual: f64,
}

/// Certifying primal-dual Newton on the slack system `s = (Az − b) + AAᵀν`,
/// `νᵢsᵢ = μ²`, seeded from strictly positive slacks.  Returns
/// `(ν, s, iterations, residual)`; the caller judges the residual.
fn poly_dual_newton(
    a: &DMatrix<f64>,
    gram: &DMatrix<f64>,
    azb: &DVector<f64>,
    mu2: f64,
    scale: f64,
    s0: DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>, usize, f64), SmoothingError> {
    let rows = a.nrows();
    let mut s = s0;
    let mut nu = s.map(|si| mu2 / si);

    let merit = |nu: &DVector<f64>, s: &DVector<f64>| -> f64 {
        let r1 = s - azb - gram * nu;
        let mut acc = r1.norm_squared();
        for i in 0..rows {
            let g = nu[i] - mu2 / s[i];
            acc += g * g;
        }
        acc
    };

    let mut iters = 0usize;
    let mut stall = 0usize;
    for _ in 0..300 {
        let r1 = &s - azb - gram * &nu;
        let g = DVector::from_fn(rows, |i, _| nu[i] - mu2 / s[i]);
        if (a.transpose() * &g).norm() <= 1e-12 * scale && r1.norm() <= 1e-12 * scale {
            break;
        }
        iters += 1;

        // Schur reduction of the Newton system onto Δν (SPD by ν, s > 0).
        let mut mat = gram.clone();
        let mut rhs = r1.clone();
        for i in 0..rows {
            mat[(i, i)] += s[i] / nu[i];
            rhs[i] -= s[i] - mu2 / nu[i];
        }
        let chol = match Cholesky::new(mat) {
            Some(c) => c,
            None => {
                return Err(SmoothingError::InnerSolveFailed(
                    "primal-dual Schur factorization failed".into(),
                ))
            }
        };
        let dnu = chol.solve(&rhs);
        let ds = gram * &dnu - &r1;

        let mut alpha: f64 = 1.0;
        for i in 0..rows {
            if dnu[i] < 0.0 {
                alpha = alpha.min(0.95 * nu[i] / -dnu[i]);
            }
            if ds[i] < 0.0 {
                alpha = alpha.min(0.95 * s[i] / -ds[i]);
            }
        }
        let base = merit(&nu, &s);
        let mut accepted = false;
        for _ in 0..40 {
            let nu_t = &nu + &dnu * alpha;
            let s_t = &s + &ds * alpha;
            if merit(&nu_t, &s_t) <= (1.0 - 1e-4 * alpha) * base {
                nu = nu_t;
                s = s_t;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if accepted {
            stall = 0;
        } else {
            stall += 1;
            if stall >= 3 {
                break;
            }
        }
    }

    let r1 = &s - azb - gram * &nu;
    let g = DVector::from_fn(rows, |i, _| nu[i] - mu2 / s[i]);
    let residual = (a.transpose() * &g).norm() + r1.norm();
    Ok((nu, s, iters, residual))
}

/// Implicit smoothing over `{x : Ax ≥ b}` through the primal-dual pair
/// `(ν, s)`: the solution satisfies `p = z + Aᵀν` with `νᵢsᵢ = μ²` and
/// `s = Ap − b`, so the slacks are primary unknowns and the reported residual
/// `‖Aᵀ(ν − μ²/s)‖ + ‖s − (Az − b) − AAᵀν‖` certifies the defining equation
/// at a point within the second term of the returned `p`.
fn poly_core(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    p_int: &DVector<f64>,
    z: &DVector<f64>,
    mu: f64,
    warm: Option<&AmbientPoint>,
) -> Result<PolyCore, SmoothingError> {
    let rows = a.nrows();
    let ncols = a.ncols();
    let mu2 = mu * mu;
    let scale = 1.0 + z.norm();
    let azb = a * z - b;
    let gram = a * a.transpose();

    // A warm point near the solution goes straight to the certifying
    // primal-dual phase: boundary-hugging slacks are exactly where the
    // primal barrier Newton below crawls, while the dual system linearizes
    // well there.  Any failure falls through to the cold path.
    if let Some(w) = warm {
        let sw = a * w.as_vector() - b;
        if sw.min() > 0.0 {
            if let Ok((nu, s, iters, residual)) =
                poly_dual_newton(a, &gram, &azb, mu2, scale, sw)
            {
                if residual <= ACCEPT * scale {
                    let p = z + a.transpose() * &nu;
                    return Ok(PolyCore { s, p, iters, residual });
                }
            }
        }
    }

    // Phase 1: damped Newton on the strictly convex primal objective
    // h(p) = ½‖p − z‖² + μ²f(p).  The barrier blows up at the boundary and
    // the line search monitors h itself, so the iterates cannot collapse
    // onto a face; this lands inside the quadratic basin of the certifying
    // primal-dual system, which a cold start generally is not in.
    let mut p = p_int.clone();
    let mut phase1_iters = 0usize;
    let hval = |p: &DVector<f64>| -> f64 {
        let m = a * p - b;
        if m.min() <= 0.0 {
            return f64::INFINITY;
        }
        0.5 * (p - z).norm_squared() - mu2 * m.iter().map(|x| x.ln()).sum::<f64>()
    };
    for _ in 0..120 {
        let m = a * &p - b;
        // Hand over once the iterate hugs a face: from here the primal
        // Hessian weights μ²/s² climb toward the rounding ceiling, while the
        // primal-dual phase, whose slacks are independent unknowns, is in
        // its element.
        if m.min() <= 1e-2 * mu {
            break;
        }
        let grad = &p - z - a.transpose() * m.map(|x| mu2 / x);
        if grad.norm() <= 1e-8 * scale {
            break;
        }
        phase1_iters += 1;
        let wdiag = DMatrix::from_diagonal(&m.map(|x| mu2 / (x * x)));
        let hess = DMatrix::identity(ncols, ncols) + a.transpose() * wdiag * a;
        let chol = match Cholesky::new(hess) {
            Some(c) => c,
            None => {
                return Err(SmoothingError::InnerSolveFailed(
                    "primal Hessian factorization failed".into(),
                ))
            }
        };
        let dp = chol.solve(&(-&grad));
        let adp = a * &dp;
        let mut alpha: f64 = 1.0;
        for i in 0..rows {
            if adp[i] < 0.0 {
                alpha = alpha.min(0.95 * m[i] / -adp[i]);
            }
        }
        let base = hval(&p);
        let slope = grad.dot(&dp);
        let mut accepted = false;
        for _ in 0..50 {
            let cand = &p + &dp * alpha;
            // The epsilon term keeps the sufficient-decrease test meaningful
            // when h is huge (far z) and the true decrease of a short step
            // sits below the rounding granularity of h itself.
            if hval(&cand) <= base + 1e-4 * alpha * slope + 2.0 * f64::EPSILON * base.abs() {
                p = cand;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    // Phase 2: polish to the roundoff floor of the certified residual, which
    // direct primal margins cannot reach once they are of order μ².
    let (nu, s, dual_iters, residual) =
        poly_dual_newton(a, &gram, &azb, mu2, scale, a * &p - b)?;
    let iters = phase1_iters + dual_iters;
    if residual > ACCEPT * scale {
        eprintln!(
            "POLY-FAIL mu={mu:.3e} ||z||={:.3e} residual={residual:.3e} iters={iters} phase1={phase1_iters}",
            z.norm()
        );
        return Err(SmoothingError::InnerNewtonDiverged { residual, iters });
    }
    let p = z + a.transpose() * &nu;
    Ok(PolyCore { s, p, iters, residual })
}

/// Nuclear-norm epigraph smoothing by reflection: `P♯_μ(z) = z + P_μ(−z)`
/// where `P_μ` is the operator-norm smoothing.  In exact arithmetic the
/// reflection turns the conjugate-barrier optimality condition for `P♯_μ`
/// identically into the operator-norm condition for `P_μ`, so the inner
/// certified residual is the residual here.  (Re-measuring the defect in the
/// ambient conjugate equation instead would amplify the rounding of the
/// `z + P_μ(−z)` sum by roughly `margins²/μ²`, which no representable point
/// escapes once μ is small; a direct conjugate cross-check at moderate μ
/// lives in the tests.)
fn nuclear_smooth(
    z_o: f64,
    zm: &DMatrix<f64>,
    mu: f64,
    warm: Option<&AmbientPoint>,
) -> Result<(AmbientPoint, f64, usize, f64), SmoothingError> {
    let mu2 = mu * mu;
    let q = zm.nrows();
    // A warm nuclear value reflects to a warm operator-norm value through
    // the same identity the result is assembled with: p_op(−z) = p♯(z) − z.
    let warm_op = warm.map(|w| {
        let (tw, xw) = w.as_scalar_matrix();
        AmbientPoint::scalar_matrix(tw - z_o, xw - zm)
    });
    let inner = opnorm_core(-z_o, &(-zm), mu, warm_op.as_ref())?;
    let po = z_o + inner.t;
    let pmat = zm + assemble_from_svd(&inner.u, &inner.sig, &inner.v);

    // In-frame diagonal of the result: dᵢ = −2μ²σᵢ/(t²−σᵢ²), exact at the
    // inner solution and formed from certified positive factors; the
    // certificate is the nuclear-norm slack of the returned point.
    let d = DVector::from_fn(q, |i, _| -2.0 * mu2 * inner.sig[i] / inner.prod[i]);
    let sum_abs: f64 = d.iter().map(|x| x.abs()).sum();
    let cert = po - sum_abs;

    let value = AmbientPoint::scalar_matrix(po, pmat);
    Ok((value, cert, inner.iters, inner.residual))
}

/// Evaluate the smoothed projection `p_μ(z)`; at `μ = 0` this is the exact
/// Euclidean projection.
pub fn smooth_project(
    set: &SmoothedSet,
    z: &AmbientPoint,
    mu: f64,
) -> Result<SmoothingEval, SmoothingError> {
    smooth_project_warm(set, z, mu, None)
}

/// [`smooth_project`] with an optional warm start: a previously computed
/// smoothed projection for nearby `(z, μ)`, exploited by the implicit-Newton
/// sets (polyhedron and the two matrix epigraphs) and ignored by the closed
/// forms.
pub fn smooth_project_warm(
    set: &SmoothedSet,
    z: &AmbientPoint,
    mu: f64,
    warm: Option<&AmbientPoint>,
) -> Result<SmoothingEval, SmoothingError> {
    set.check_shape(z);
    assert!(mu >= 0.0, "smoothing parameter must be nonnegative");
    if mu == 0.0 {
        let value = set.exact_project(z).map_err(lift_set_error)?;
        return Ok(SmoothingEval {
            value,
            interior_certificate: 0.0,
            inner_newton_iters: 0,
            residual: 0.0,
        });
    }
    match set.kind() {
        SetKind::Orthant { .. } => {
            let (p, cert, residual) = orthant_smooth(z.as_vector(), mu);
            Ok(SmoothingEval {
                value: AmbientPoint::vector(p),
                interior_certificate: cert,
                inner_newton_iters: 0,
                residual,
            })
        }
        SetKind::PsdCone { .. } => {
            let (p, cert, residual) = psd_smooth(z.as_sym(), mu)?;
            Ok(SmoothingEval {
                value: AmbientPoint::sym_matrix(p),
                interior_certificate: cert,
                inner_newton_iters: 0,
                residual,
            })
        }
        SetKind::Polyhedron { a, b, interior_point } => {
            let core = poly_core(a, b, interior_point, z.as_vector(), mu, warm)?;
            Ok(SmoothingEval {
                value: AmbientPoint::vector(core.p),
                interior_certificate: core.s.min(),
                inner_newton_iters: core.iters,
                residual: core.residual,
            })
        }
        SetKind::LinfEpigraph { .. } => {
            let (z_o, zc) = split_linf(z);
            let core = linf_core(z_o, &zc, mu, warm)?;
            let n = zc.len();
            let mut flat = DVector::zeros(n + 1);
            flat[0] = core.t;
            let mut cert = core.t;
            for i in 0..n {
                flat[1 + i] = core.signs[i] * (core.t - core.m[i]);
                cert = cert.min(core.m[i]).min(2.0 * core.t - core.m[i]);
            }
            Ok(SmoothingEval {
                value: AmbientPoint::vector(flat),
                interior_certificate: cert,
                inner_newton_iters: core.iters,
                residual: core.residual,
            })
        }
        SetKind::OpNormEpigraph { .. } => {
            let (z_o, zmat) = z.as_scalar_matrix();
            let core = opnorm_core(z_o, zmat, mu, warm)?;
            let mut cert = core.t;
            for i in 0..core.m.len() {
                cert = cert.min(core.m[i]).min(2.0 * core.t - core.m[i]);
            }
            let x = assemble_from_svd(&core.u, &core.sig, &core.v);
            Ok(SmoothingEval {
                value: AmbientPoint::scalar_matrix(core.t, x),
                interior_certificate: cert,
                inner_newton_iters: core.iters,
                residual: core.residual,
            })
        }
        SetKind::NuclearEpigraph { .. } => {
            let (z_o, zmat) = z.as_scalar_matrix();
            let (value, cert, iters, residual) = nuclear_smooth(z_o, zmat, mu, warm)?;
            Ok(SmoothingEval {
                value,
                interior_certificate: cert,
                inner_newton_iters: iters,
                residual,
            })
        }
        SetKind::SecondOrderCone3 => {
            let (p, m1, m2, residual) = soc3_smooth(z.as_vector(), mu);
            Ok(SmoothingEval {
                value: AmbientPoint::vector(p),
                interior_certificate: m1.min(m2),
                inner_newton_iters: 0,
                residual,
            })
        }
    }
}

/// Barrier Hessian action in flat coordinates, parameterized directly by the
/// certified margin data of a smoothing solve (never by re-subtraction).
enum FlatHessian {
    /// `∇²f = Aᵀ Diag(w) A` with `w = 1/s²`.
    Poly { a: DMatrix<f64>, w: DVector<f64> },
    /// Coordinates `(t, x)`; `ia2 = 1/(t−xᵢ)²`, `ib2 = 1/(t+xᵢ)²`.
    Linf { ia2: DVector<f64>, ib2: DVector<f64> },
    /// `f = −log(t² − ‖x‖²)` at `(t, x₁, x₂)` with `minv = 1/(t² − ‖x‖²)`.
    Soc { t: f64, x1: f64, x2: f64, minv: f64 },
}

impl FlatHessian {
    fn apply(&self, h: &DVector<f64>) -> DVector<f64> {
        match self {
            FlatHessian::Poly { a, w } => {
                let ah = a * h;
                a.transpose() * DVector::from_fn(ah.len(), |i, _| w[i] * ah[i])
            }
            FlatHessian::Linf { ia2, ib2 } => {
                let n = ia2.len();
                let mut out = DVector::zeros(n + 1);
                let mut acc = 0.0;
                for i in 0..n {
                    let diag = ia2[i] + ib2[i];
                    let cross = ib2[i] - ia2[i];
                    acc += h[0] * diag + h[1 + i] * cross;
                    out[1 + i] = h[0] * cross + h[1 + i] * diag;
                }
                out[0] = acc;
                out
            }
            FlatHessian::Soc { t, x1, x2, minv } => {
                let g = DVector::from_column_slice(&[2.0 * t * minv, -2.0 * x1 * minv, -2.0 * x2 * minv]);
                let gh = g.dot(h);
                let mut out = &g * gh;
                out[0] -= 2.0 * minv * h[0];
                out[1] += 2.0 * minv * h[1];
                out[2] += 2.0 * minv * h[2];
                out
            }
        }
    }

    fn dense(&self, dim: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let mut e = DVector::zeros(dim);
            e[j] = 1.0;
            m.set_column(j, &self.apply(&e));
        }
        m
    }
}

struct SpectralDeriv {
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    hess: SpectralHessian,
    mu2: f64,
}

enum DerivImpl {
    Diagonal { d: DVector<f64> },
    Loewner { frame: DMatrix<f64>, coef: DMatrix<f64> },
    Spectral(SpectralDeriv),
    NuclearReflect(SpectralDeriv),
    DenseResolvent { shape: AmbientPoint, chol: Cholesky<f64, Dyn> },
    CgResolvent { shape: AmbientPoint, hess: FlatHessian, mu2: f64 },
}

/// Operator handle for `u ↦ Dp_μ(z)[u]` with its factorization computed once
/// at construction; immutable and safe to share afterwards.
pub struct DerivativeApply {
    imp: DerivImpl,
}

/// Conjugate gradients on `(I + μ²H)x = rhs`; the operator is symmetric
/// positive definite by construction, so plain CG with a tight relative
/// tolerance suffices.
fn cg_resolvent(hess: &FlatHessian, mu2: f64, rhs: &DVector<f64>) -> DVector<f64> {
    let apply = |x: &DVector<f64>| x + &(hess.apply(x) * mu2);
    let mut x = DVector::zeros(rhs.len());
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rs = r.norm_squared();
    let tol = 1e-14 * rhs.norm();
    for _ in 0..(10 * rhs.len()).max(100) {
        if rs.sqrt() <= tol {
            break;
        }
        let ap = apply(&p);
        let alpha = rs / p.dot(&ap);
        x += &p * alpha;
        r -= &ap * alpha;
        let rs2 = r.norm_squared();
        p = &r + &p * (rs2 / rs);
        rs = rs2;
    }
    x
}

fn resolvent_from(
    hess: FlatHessian,
    like: &AmbientPoint,
    mu2: f64,
    dim: usize,
) -> Result<DerivImpl, SmoothingError> {
    let shape = like.zeros_like();
    if dim <= 200 {
        let mat = DMatrix::identity(dim, dim) + hess.dense(dim) * mu2;
        match Cholesky::new(mat) {
            Some(chol) => Ok(DerivImpl::DenseResolvent { shape, chol }),
            None => Err(SmoothingError::InnerSolveFailed("resolvent factorization failed".into())),
        }
    } else {
        Ok(DerivImpl::CgResolvent { shape, hess, mu2 })
    }
}

impl DerivativeApply {
    /// Apply the cached derivative to a direction of the same shape as `z`.
    pub fn apply(&self, u: &AmbientPoint) -> AmbientPoint {
        match &self.imp {
            DerivImpl::Diagonal { d } => {
                let uv = u.as_vector();
                AmbientPoint::vector(DVector::from_fn(d.len(), |i, _| d[i] * uv[i]))
            }
            DerivImpl::Loewner { frame, coef } => {
                let um = u.as_sym();
                let inner = frame.transpose() * um * frame;
                let scaled = inner.component_mul(coef);
                let back = frame * scaled * frame.transpose();
                AmbientPoint::sym_matrix(0.5 * (&back + back.transpose()))
            }
            DerivImpl::Spectral(sd) => {
                let (u_o, um) = u.as_scalar_matrix();
                let ub = to_frame(&sd.u, &sd.v, um);
                let (h_o, hb) = sd.hess.solve(1.0, sd.mu2, u_o, &ub);
                AmbientPoint::scalar_matrix(h_o, from_frame(&sd.u, &sd.v, &hb))
            }
            DerivImpl::NuclearReflect(sd) => {
                let (u_o, um) = u.as_scalar_matrix();
                let ub = to_frame(&sd.u, &sd.v, um);
                let (h_o, hb) = sd.hess.solve(1.0, sd.mu2, u_o, &ub);
                AmbientPoint::scalar_matrix(u_o - h_o, um - from_frame(&sd.u, &sd.v, &hb))
            }
            DerivImpl::DenseResolvent { shape, chol } => {
                let f = u.to_flat();
                shape.from_flat_like(&chol.solve(&f))
            }
            DerivImpl::CgResolvent { shape, hess, mu2 } => {
                let f = u.to_flat();
                shape.from_flat_like(&cg_resolvent(hess, *mu2, &f))
            }
        }
    }
}

/// Build the derivative handle `Dp_μ(z) = (I + μ²∇²f(p_μ(z)))⁻¹`.
///
/// Requires `μ > 0`; at `μ = 0` the projector is generally nondifferentiable
/// and the appropriate tool is the exact-derivative oracle where one exists.
pub fn smooth_derivative_apply(
    set: &SmoothedSet,
    z: &AmbientPoint,
    mu: f64,
) -> Result<DerivativeApply, SmoothingError> {
    smooth_derivative_apply_warm(set, z, mu, None)
}

/// [`smooth_derivative_apply`] with an optional warm start: a previously
/// computed smoothed projection for nearby `(z, μ)`.  The implicitly
/// smoothed sets re-solve their inner system to anchor the derivative, and
/// seeding that solve from the value just computed is both cheaper and far
/// more robust than a cold start when `μ` is small.
pub fn smooth_derivative_apply_warm(
    set: &SmoothedSet,
    z: &AmbientPoint,
    mu: f64,
    warm: Option<&AmbientPoint>,
) -> Result<DerivativeApply, SmoothingError> {
    set.check_shape(z);
    assert!(mu > 0.0, "derivative handles require mu > 0");
    let mu2 = mu * mu;
    let imp = match set.kind() {
        SetKind::Orthant { .. } => {
            let v = z.as_vector();
            DerivImpl::Diagonal { d: v.map(|zi| chks_deriv(zi, mu)) }
        }
        SetKind::PsdCone { .. } => {
            let ef = sym_eigen(z.as_sym()).map_err(|e| SmoothingError::InnerSolveFailed(e.to_string()))?;
            let n = ef.lambda.len();
            let s = DVector::from_fn(n, |i, _| (ef.lambda[i] * ef.lambda[i] + 4.0 * mu2).sqrt());
            let coef = DMatrix::from_fn(n, n, |i, j| {
                0.5 * (1.0 + (ef.lambda[i] + ef.lambda[j]) / (s[i] + s[j]))
            });
            DerivImpl::Loewner { frame: ef.q, coef }
        }
        SetKind::Polyhedron { a, b, interior_point } => {
            let core = poly_core(a, b, interior_point, z.as_vector(), mu, warm)?;
            let w = core.s.map(|si| 1.0 / (si * si));
            resolvent_from(FlatHessian::Poly { a: a.clone(), w }, z, mu2, set.dim())?
        }
        SetKind::LinfEpigraph { .. } => {
            let (z_o, zc) = split_linf(z);
            let core = linf_core(z_o, &zc, mu, warm)?;
            let n = zc.len();
            let mut ia2 = DVector::zeros(n);
            let mut ib2 = DVector::zeros(n);
            for i in 0..n {
                let (mi, ci) = (core.m[i], 2.0 * core.t - core.m[i]);
                let (ai, bi) = if core.signs[i] > 0.0 { (mi, ci) } else { (ci, mi) };
                ia2[i] = 1.0 / (ai * ai);
                ib2[i] = 1.0 / (bi * bi);
            }
            resolvent_from(FlatHessian::Linf { ia2, ib2 }, z, mu2, set.dim())?
        }
        SetKind::OpNormEpigraph { .. } => {
            let (z_o, zmat) = z.as_scalar_matrix();
            let core = opnorm_core(z_o, zmat, mu, warm)?;
            let hess = SpectralHessian::new(core.t, core.sig.clone(), core.n, Some(&core.prod));
            DerivImpl::Spectral(SpectralDeriv { u: core.u, v: core.v, hess, mu2 })
        }
        SetKind::NuclearEpigraph { .. } => {
            let (z_o, zmat) = z.as_scalar_matrix();
            let warm_op = warm.map(|w| {
                let (tw, xw) = w.as_scalar_matrix();
                AmbientPoint::scalar_matrix(tw - z_o, xw - zmat)
            });
            let core = opnorm_core(-z_o, &(-zmat), mu, warm_op.as_ref())?;
            let hess = SpectralHessian::new(core.t, core.sig.clone(), core.n, Some(&core.prod));
            DerivImpl::NuclearReflect(SpectralDeriv { u: core.u, v: core.v, hess, mu2 })
        }
        SetKind::SecondOrderCone3 => {
            let (p, m1, m2, _) = soc3_smooth(z.as_vector(), mu);
            let hess = FlatHessian::Soc { t: p[0], x1: p[1], x2: p[2], minv: 1.0 / (m1 * m2) };
            resolvent_from(hess, z, mu2, 3)?
        }
    };
    Ok(DerivativeApply { imp })
}

/// Assemble the derivative as a dense matrix over flat coordinates; intended
/// for small dimensions (diagnostics and regression tests).
pub fn derivative_matrix(
    set: &SmoothedSet,
    z: &AmbientPoint,
    mu: f64,
) -> Result<DMatrix<f64>, SmoothingError> {
    let handle = smooth_derivative_apply(set, z, mu)?;
    let d = set.dim();
    let mut jac = DMatrix::zeros(d, d);
    for j in 0..d {
        let mut e = DVector::zeros(d);
        e[j] = 1.0;
        let col = handle.apply(&z.from_flat_like(&e)).to_flat();
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// Jacobian at `(0, 1, 0)` of the smoothing built from the *mismatched*
/// barrier `−log(u² − ‖v‖²) − log(u − v₁) − log(u + v₁)` for the 3-dim
/// second-order cone.  Its `(3,3)` entry is `2/3` for every `μ`, so the
/// `μ → 0` limit disagrees with the projector Jacobian entry `1/2`: a
/// regression witness that the smoothing Jacobian limit is a property of the
/// *matched* barrier, not of barriers per se.
pub fn wrong_barrier_soc_jacobian(mu: f64) -> DMatrix<f64> {
    assert!(mu > 0.0);
    let a = (1.0 + 16.0 * mu * mu).sqrt();
    let off = 1.0 / (2.0 * a);
    DMatrix::from_row_slice(3, 3, &[0.5, off, 0.0, off, 0.5, 0.0, 0.0, 0.0, 2.0 / 3.0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn test_sets(rng: &mut ChaCha8Rng) -> Vec<SmoothedSet> {
        let a = DMatrix::from_fn(6, 4, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let x0 = DVector::from_fn(4, |_, _| rng.random::<f64>() - 0.5);
        let b = &a * &x0 - DVector::from_fn(6, |_, _| 0.3 + rng.random::<f64>());
        vec![
            SmoothedSet::orthant(5),
            SmoothedSet::psd_cone(4),
            SmoothedSet::polyhedron(a, b).unwrap(),
            SmoothedSet::linf_epigraph(5),
            SmoothedSet::opnorm_epigraph(3, 4),
            SmoothedSet::nuclear_epigraph(3, 4),
            SmoothedSet::second_order_cone3(),
        ]
    }

    fn random_direction(rng: &mut ChaCha8Rng, like: &AmbientPoint) -> AmbientPoint {
        let d = like.dim();
        let flat = DVector::from_fn(d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let u = like.from_flat_like(&flat);
        u.scale(1.0 / u.norm())
    }

    #[test]
    fn scalar_closed_form_examples() {
        let set = SmoothedSet::orthant(1);
        let e1 = smooth_project(&set, &AmbientPoint::vector_from(&[0.0]), 1.0).unwrap();
        assert!((e1.value.as_vector()[0] - 1.0).abs() < 1e-14);
        let e2 = smooth_project(&set, &AmbientPoint::vector_from(&[3.0]), 2.0).unwrap();
        assert!((e2.value.as_vector()[0] - 4.0).abs() < 1e-14);
        assert!(e2.residual < 1e-14);
        assert!(e2.interior_certificate > 0.0);
    }

    #[test]
    fn psd_eigenwise_example() {
        let set = SmoothedSet::psd_cone(2);
        let z = AmbientPoint::sym_matrix(DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -4.0]));
        let e = smooth_project(&set, &z, 2.0).unwrap();
        let p = e.value.as_sym();
        assert!((p[(0, 0)] - 4.0).abs() < 1e-12);
        let expect = 0.5 * (-4.0 + 32.0f64.sqrt());
        assert!((p[(1, 1)] - expect).abs() < 1e-12, "got {}", p[(1, 1)]);
        assert!(p[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn soc_closed_form_at_mu_zero_matches_projection() {
        let set = SmoothedSet::second_order_cone3();
        let z = AmbientPoint::vector_from(&[0.0, 1.0, 0.0]);
        let e = smooth_project(&set, &z, 0.0).unwrap();
        let p = e.value.as_vector();
        assert!((p[0] - 0.5).abs() < 1e-14 && (p[1] - 0.5).abs() < 1e-14 && p[2].abs() < 1e-14);
        assert_eq!(e.residual, 0.0);
    }

    #[test]
    fn residual_and_certificate_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let sets = test_sets(&mut rng);
        for set in &sets {
            for k in 0..15 {
                let z = set.random_ambient(&mut rng, if k % 3 == 0 { 5.0 } else { 1.5 });
                let mu = 10f64.powf(rng.random::<f64>() * -4.0);
                let e = smooth_project(set, &z, mu)
                    .unwrap_or_else(|err| panic!("{} mu={mu:.3e}: {err}", set.name()));
                let bound = 1e-11 * (1.0 + z.norm());
                assert!(
                    e.residual <= bound,
                    "{} mu={mu:.3e}: residual {:.3e} > {:.3e}",
                    set.name(),
                    e.residual,
                    bound
                );
                assert!(
                    e.interior_certificate > 0.0,
                    "{} mu={mu:.3e}: certificate {:.3e}",
                    set.name(),
                    e.interior_certificate
                );
            }
        }
    }

    #[test]
    fn uniform_lipschitz_in_mu() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let sets = test_sets(&mut rng);
        for set in &sets {
            let bound_factor = set.theta().sqrt() * (1.0 + 1e-8);
            for _ in 0..6 {
                let z = set.random_ambient(&mut rng, 2.0);
                let mus = [0.0, 1e-3, 0.07, 0.4, 1.0];
                let evals: Vec<AmbientPoint> = mus
                    .iter()
                    .map(|&m| smooth_project(set, &z, m).unwrap().value)
                    .collect();
                for i in 0..mus.len() {
                    for j in (i + 1)..mus.len() {
                        let dist = evals[i].sub(&evals[j]).norm();
                        let allowed = bound_factor * (mus[i] - mus[j]).abs();
                        assert!(
                            dist <= allowed + 1e-9,
                            "{}: ‖p_{} − p_{}‖ = {dist:.3e} > {allowed:.3e}",
                            set.name(),
                            mus[i],
                            mus[j]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn curvature_bound_and_orthant_tightness() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let sets = test_sets(&mut rng);
        let eps = 1e-3;
        for set in &sets {
            for &mu in &[1e-2, 1e-1, 1.0] {
                let z = set.random_ambient(&mut rng, 1.5);
                let d = random_direction(&mut rng, &z);
                let plus = smooth_project(set, &z.axpy(eps, &d), mu).unwrap().value;
                let minus = smooth_project(set, &z.axpy(-eps, &d), mu).unwrap().value;
                let mid = smooth_project(set, &z, mu).unwrap().value;
                let second = plus.add(&minus).axpy(-2.0, &mid).norm() / (eps * eps);
                let bound = (1.0 + 1e-4) / (4.0 * mu);
                assert!(
                    second <= bound,
                    "{} mu={mu}: second difference {second:.4e} > {bound:.4e}",
                    set.name()
                );
            }
        }
        // Scalar tightness: the analytic second derivative at the kink is
        // exactly 1/(4μ), and the symmetric difference approaches it from
        // below.  The step is chosen so the true h² deficit (≈ h²/16μ²
        // relative) dominates the rounding noise of the difference quotient
        // (≈ 8εμ²/h² relative).
        for &mu in &[1e-2f64, 1e-1, 1.0] {
            let analytic = 2.0 * mu * mu / (4.0 * mu * mu).powf(1.5);
            let sup = 1.0 / (4.0 * mu);
            assert!((analytic - sup).abs() <= 1e-8 * sup);
            let set = SmoothedSet::orthant(1);
            let h = 3e-3 * mu;
            let pp = smooth_project(&set, &AmbientPoint::vector_from(&[h]), mu).unwrap().value;
            let pm = smooth_project(&set, &AmbientPoint::vector_from(&[-h]), mu).unwrap().value;
            let p0 = smooth_project(&set, &AmbientPoint::vector_from(&[0.0]), mu).unwrap().value;
            let fd = (pp.as_vector()[0] + pm.as_vector()[0] - 2.0 * p0.as_vector()[0]) / (h * h);
            assert!(fd <= sup && fd >= sup * (1.0 - 1e-5), "fd {fd:.6e} vs sup {sup:.6e}");
        }
    }

    #[test]
    fn resolvent_is_a_strict_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let sets = test_sets(&mut rng);
        for set in &sets {
            for &mu in &[1e-3, 0.3] {
                let z = set.random_ambient(&mut rng, 2.0);
                let handle = smooth_derivative_apply(set, &z, mu).unwrap();
                for _ in 0..4 {
                    let u = random_direction(&mut rng, &z);
                    let du = handle.apply(&u);
                    let quad = u.inner(&du);
                    assert!(
                        quad > 0.0 && quad < u.norm().powi(2),
                        "{} mu={mu}: quadratic form {quad:.6e} outside (0, ‖u‖²)",
                        set.name()
                    );
                }
            }
        }
    }

    #[test]
    fn nuclear_reflection_and_conjugacy() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let nuc = SmoothedSet::nuclear_epigraph(3, 4);
        let op = SmoothedSet::opnorm_epigraph(3, 4);
        for &mu in &[0.03, 0.3] {
            for _ in 0..5 {
                let z = nuc.random_ambient(&mut rng, 2.0);
                let (z_o, zm) = z.as_scalar_matrix();
                let psharp = smooth_project(&nuc, &z, mu).unwrap();
                // Reflection identity against an independent opnorm solve.
                let neg = AmbientPoint::scalar_matrix(-z_o, -zm);
                let inner = smooth_project(&op, &neg, mu).unwrap();
                let diff = psharp.value.sub(&inner.value.add(&z)).norm();
                assert!(diff <= 1e-10 * (1.0 + z.norm()), "reflection defect {diff:.3e}");
                // Conjugate-barrier consistency: p♯ + μ²∇f♯(p♯) = z, with the
                // gradient evaluated by the independent conjugate solver in
                // the sets layer.
                let grad = nuc.barrier_gradient(&psharp.value).unwrap();
                let defect = psharp.value.axpy(mu * mu, &grad).sub(&z).norm();
                assert!(
                    defect <= 1e-9 * (1.0 + z.norm()),
                    "mu={mu}: implicit-equation defect {defect:.3e}"
                );
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let sets = test_sets(&mut rng);
        for set in &sets {
            for _ in 0..7 {
                let z = set.random_ambient(&mut rng, 1.5);
                let mu = 10f64.powf(rng.random::<f64>() * -3.0);
                let u = random_direction(&mut rng, &z);
                let handle = smooth_derivative_apply(set, &z, mu).unwrap();
                let action = handle.apply(&u);
                let eps = 1e-6 * (1.0 + z.norm());
                let plus = smooth_project(set, &z.axpy(eps, &u), mu).unwrap().value;
                let minus = smooth_project(set, &z.axpy(-eps, &u), mu).unwrap().value;
                let fd = plus.sub(&minus).scale(0.5 / eps);
                let rel = action.sub(&fd).norm() / (1.0 + fd.norm());
                assert!(
                    rel <= 1e-5,
                    "{} mu={mu:.3e}: derivative vs FD rel err {rel:.3e}",
                    set.name()
                );
            }
        }
    }

    /// Conjugate gradients on `(I + μ²∇²f(p))h = u` straight from the barrier
    /// Hessian action of the sets layer — the generic strategy every fast
    /// path must agree with.
    fn generic_resolvent(
        set: &SmoothedSet,
        p: &AmbientPoint,
        mu: f64,
        u: &AmbientPoint,
    ) -> AmbientPoint {
        let mu2 = mu * mu;
        let apply = |x: &AmbientPoint| {
            x.add(&set.barrier_hessian_apply(p, x).unwrap().scale(mu2))
        };
        let mut x = u.zeros_like();
        let mut r = u.clone();
        let mut d = r.clone();
        let mut rs = r.inner(&r);
        let tol = 1e-26 * rs.max(1e-300);
        for _ in 0..2000 {
            if rs <= tol {
                break;
            }
            let ad = apply(&d);
            let alpha = rs / d.inner(&ad);
            x = x.axpy(alpha, &d);
            r = r.axpy(-alpha, &ad);
            let rs2 = r.inner(&r);
            d = r.axpy(rs2 / rs, &d);
            rs = rs2;
        }
        x
    }

    #[test]
    fn fast_paths_match_generic_resolvent() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let sets = test_sets(&mut rng);
        for set in &sets {
            for &mu in &[0.08, 0.5] {
                let z = set.random_ambient(&mut rng, 1.5);
                let p = smooth_project(set, &z, mu).unwrap().value;
                let handle = smooth_derivative_apply(set, &z, mu).unwrap();
                for _ in 0..3 {
                    let u = random_direction(&mut rng, &z);
                    let fast = handle.apply(&u);
                    let generic = generic_resolvent(set, &p, mu, &u);
                    let diff = fast.sub(&generic).norm();
                    assert!(
                        diff <= 1e-9 * (1.0 + u.norm()),
                        "{} mu={mu}: fast vs generic {diff:.3e}",
                        set.name()
                    );
                }
            }
        }
    }

    #[test]
    fn soc_derivative_approaches_projection_jacobian() {
        let set = SmoothedSet::second_order_cone3();
        let star = DVector::from_column_slice(&[0.0, 1.0, 0.0]);
        let offset = DVector::from_column_slice(&[1.0, 1.0, 1.0]).normalize();
        let z = AmbientPoint::vector(&star + 1e-4 * offset);
        let jac = derivative_matrix(&set, &z, 1e-4).unwrap();
        let exact = oracles::soc_projection_jacobian(&star).unwrap();
        let err = (&jac - &exact).amax();
        assert!(err <= 1e-3, "max entry error {err:.3e}");
    }

    #[test]
    fn wrong_barrier_jacobian_witness() {
        // μ → 0 limit of the off-diagonal entries.
        let j = wrong_barrier_soc_jacobian(1e-8);
        assert!((j[(0, 1)] - 0.5).abs() < 1e-8);
        assert!((j[(1, 0)] - 0.5).abs() < 1e-8);
        // The (3,3) entry is 2/3 for every μ — off by exactly 1/6 from the
        // matched-barrier value 1/2.
        for &mu in &[1e-6, 1e-2, 0.25, 1.0] {
            let j = wrong_barrier_soc_jacobian(mu);
            assert_eq!(j[(2, 2)], 2.0 / 3.0);
            assert!(((j[(2, 2)] - 0.5) - 1.0 / 6.0).abs() < 1e-15);
        }
        // Spot value at μ = 1/4: a = √2.
        let j = wrong_barrier_soc_jacobian(0.25);
        assert!((j[(0, 1)] - 1.0 / (2.0 * 2.0f64.sqrt())).abs() < 1e-15);
        // The matched-barrier handle at the same point instead approaches 1/2
        // in the (3,3) slot.
        let set = SmoothedSet::second_order_cone3();
        let z = AmbientPoint::vector_from(&[0.0, 1.0, 0.0]);
        let matched = derivative_matrix(&set, &z, 1e-5).unwrap();
        assert!((matched[(2, 2)] - 0.5).abs() < 1e-3, "got {}", matched[(2, 2)]);
    }

    #[test]
    fn psd_deep_interior_derivative_is_near_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(48);
        let set = SmoothedSet::psd_cone(4);
        let base = set.random_interior(&mut rng);
        let z = base.add(&AmbientPoint::sym_matrix(DMatrix::identity(4, 4) * 3.0));
        let handle = smooth_derivative_apply(&set, &z, 1e-2).unwrap();
        let u = random_direction(&mut rng, &z);
        let drift = handle.apply(&u).sub(&u).norm();
        assert!(drift <= 1e-4 * u.norm(), "drift {drift:.3e}");
    }

    #[test]
    fn polyhedron_warm_start_reuses_previous_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(49);
        let sets = test_sets(&mut rng);
        let poly = &sets[2];
        let z1 = poly.random_ambient(&mut rng, 2.0);
        let d = random_direction(&mut rng, &z1);
        let z2 = z1.axpy(0.05, &d);
        let mu = 1e-3;
        let cold1 = smooth_project(poly, &z1, mu).unwrap();
        let cold2 = smooth_project(poly, &z2, mu).unwrap();
        let warm2 = smooth_project_warm(poly, &z2, mu, Some(&cold1.value)).unwrap();
        let diff = warm2.value.sub(&cold2.value).norm();
        assert!(diff <= 1e-9 * (1.0 + z2.norm()), "warm vs cold value drift {diff:.3e}");
        assert!(
            warm2.inner_newton_iters <= cold2.inner_newton_iters + 2,
            "warm {} vs cold {}",
            warm2.inner_newton_iters,
            cold2.inner_newton_iters
        );
    }

    #[test]
    fn smoothing_at_mu_zero_is_the_exact_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let sets = test_sets(&mut rng);
        for set in &sets {
            let z = set.random_ambient(&mut rng, 2.0);
            let e = smooth_project(set, &z, 0.0).unwrap();
            let exact = set.exact_project(&z).unwrap();
            assert!(e.value.sub(&exact).norm() <= 1e-12 * (1.0 + z.norm()));
            assert_eq!(e.residual, 0.0);
            assert_eq!(e.inner_newton_iters, 0);
        }
    }
}
