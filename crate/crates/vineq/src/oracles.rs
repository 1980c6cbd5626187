//! Independent ground-truth computations for validating the rest of the
//! library: finite-difference derivatives, brute-force projections, and exact
//! projector derivatives at differentiable points.
//!
//! Everything here is deliberately written against the raw definitions, with
//! no code shared with the modules under test beyond the `space` primitives,
//! so that an agreement between an oracle and a production path is evidence
//! rather than tautology.  The brute polyhedral projector is itself guarded
//! by a second independent method (cyclic Dykstra over half-spaces).

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::space::{sym_eigen, thin_svd, AmbientPoint};

#[derive(Debug, Error)]
pub enum OracleError {
    /// The brute-force polyhedral enumerator is capped at 16 rows.
    #[error("too many constraints for brute enumeration ({m} > 16)")]
    TooManyConstraints { m: usize },
    /// The truncation-level bracketing failed; mathematically impossible, so
    /// this signals an implementation bug (or adversarial ties at roundoff).
    #[error("no truncation level satisfied the bracketing test")]
    NoBracket,
    /// An exact-derivative oracle was queried at a point where the projector
    /// is not differentiable (or too close to the boundary to certify).
    #[error("projector is not differentiable at the query point (margin {margin:.3e})")]
    NotDifferentiable { margin: f64 },
}

/// One scalar comparison between an oracle value and a candidate value.
#[derive(Clone, Debug)]
pub struct OracleReport {
    pub name: String,
    pub oracle: f64,
    pub candidate: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub pass: bool,
    pub tolerance: f64,
}

impl OracleReport {
    /// Compare two scalars under an absolute-or-relative tolerance.
    pub fn compare(name: &str, oracle: f64, candidate: f64, tolerance: f64) -> Self {
        let abs_err = (oracle - candidate).abs();
        let rel_err = abs_err / (1.0 + oracle.abs());
        OracleReport {
            name: name.to_string(),
            oracle,
            candidate,
            abs_err,
            rel_err,
            pass: rel_err <= tolerance,
            tolerance,
        }
    }

    /// Report a precomputed distance against zero.
    pub fn distance(name: &str, err: f64, tolerance: f64) -> Self {
        OracleReport {
            name: name.to_string(),
            oracle: 0.0,
            candidate: err,
            abs_err: err,
            rel_err: err,
            pass: err <= tolerance,
            tolerance,
        }
    }
}

/// Dense Jacobian of `map` at `at` by central differences over flat
/// coordinates.  `eps` defaults to `1e-6 · (1 + ‖at‖)`.
pub fn fd_jacobian<F>(map: F, at: &AmbientPoint, eps: Option<f64>) -> DMatrix<f64>
where
    F: Fn(&AmbientPoint) -> AmbientPoint,
{
    let flat = at.to_flat();
    let n = flat.len();
    let eps = eps.unwrap_or(1e-6 * (1.0 + flat.norm()));
    let out_dim = map(at).dim();
    let mut jac = DMatrix::zeros(out_dim, n);
    for j in 0..n {
        let mut fp = flat.clone();
        fp[j] += eps;
        let mut fm = flat.clone();
        fm[j] -= eps;
        let col = (map(&at.from_flat_like(&fp)).to_flat() - map(&at.from_flat_like(&fm)).to_flat())
            / (2.0 * eps);
        jac.set_column(j, &col);
    }
    jac
}

/// Brute-force projection onto `{x : Ax ≥ b}` by KKT-verified enumeration of
/// active sets: for each index subset ℐ solve the equality-constrained
/// projection `x = z + A_ℐᵀλ`, keep candidates that are feasible with
/// nonnegative multipliers, and return the closest.  Any candidate passing
/// both checks is the projection (the KKT conditions are sufficient here),
/// so the minimum is a redundancy guard, not a selection heuristic.
pub fn brute_project_polyhedron(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    z: &DVector<f64>,
) -> Result<DVector<f64>, OracleError> {
    let m = a.nrows();
    let n = a.ncols();
    if m > 16 {
        return Err(OracleError::TooManyConstraints { m });
    }
    let slack = 1e-9 * (1.0 + z.norm() + b.amax());

    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1u32 << m) {
        let rows: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
        if rows.len() > n {
            continue;
        }
        let (x, lambda_ok) = if rows.is_empty() {
            (z.clone(), true)
        } else {
            let mut asub = DMatrix::zeros(rows.len(), n);
            let mut rhs = DVector::zeros(rows.len());
            for (r, &i) in rows.iter().enumerate() {
                asub.row_mut(r).copy_from(&a.row(i));
                rhs[r] = b[i] - a.row(i).dot(&z.transpose());
            }
            let gram = &asub * asub.transpose();
            let lambda = match gram.svd(true, true).solve(&rhs, 1e-12) {
                Ok(l) => l,
                Err(_) => continue,
            };
            (z + asub.transpose() * &lambda, lambda.min() >= -slack)
        };
        if !lambda_ok {
            continue;
        }
        let margins = a * &x - b;
        if margins.min() < -slack {
            continue;
        }
        let dist = (&x - z).norm();
        if best.as_ref().map_or(true, |(d, _)| dist < *d) {
            best = Some((dist, x));
        }
    }
    Ok(best.expect("nonempty polyhedron always yields at least one KKT candidate").1)
}

/// Second independent polyhedral projector: cyclic Dykstra over the
/// half-spaces.  Converges to the exact projection onto the intersection;
/// used to guard the enumerator.
pub fn dykstra_project_polyhedron(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    z: &DVector<f64>,
    cycles: usize,
) -> DVector<f64> {
    let m = a.nrows();
    let mut x = z.clone();
    let mut corrections: Vec<DVector<f64>> = vec![DVector::zeros(a.ncols()); m];
    for _ in 0..cycles {
        for i in 0..m {
            let y = &x + &corrections[i];
            let row = a.row(i);
            let nrm2 = row.norm_squared();
            let viol = (b[i] - row.dot(&y.transpose())).max(0.0);
            let projected = if nrm2 > 0.0 { &y + (viol / nrm2) * row.transpose() } else { y.clone() };
            corrections[i] = y - &projected;
            x = projected;
        }
    }
    x
}

/// Exhaustive truncation-level search for the projection onto
/// `{(t, x) : t ≥ ‖x‖∞}`: try every clip count `k`, compute
/// `t(k) = max((z_o + Σ_{i≤k} |z_π(i)|)/(k+1), 0)`, and keep the unique `k`
/// passing the bracketing `|z_π(k)| > t(k) ≥ |z_π(k+1)|` (sentinels ∞ and 0).
pub fn brute_project_linf(
    z_o: f64,
    z: &DVector<f64>,
) -> Result<(f64, DVector<f64>, usize), OracleError> {
    let n = z.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| z[j].abs().partial_cmp(&z[i].abs()).unwrap());

    for k in 0..=n {
        let mut sum = z_o;
        for &i in order.iter().take(k) {
            sum += z[i].abs();
        }
        let t_k = (sum / ((k + 1) as f64)).max(0.0);
        let upper = if k == 0 { f64::INFINITY } else { z[order[k - 1]].abs() };
        let lower = if k == n { 0.0 } else { z[order[k]].abs() };
        if upper > t_k && t_k >= lower {
            let mut x = z.clone();
            for &i in order.iter().take(k) {
                x[i] = t_k * z[i].signum();
            }
            return Ok((t_k, x, k));
        }
    }
    Err(OracleError::NoBracket)
}

/// Directional derivative of the exact projection onto the operator-norm
/// epigraph `{(t, X) : t ≥ ‖X‖₂}` at a differentiable point, applied to the
/// direction `(w_o, w)`.
///
/// The three regimes are: strictly interior (identity), strictly inside the
/// polar cone (zero), and the generic boundary case, where the derivative is
/// assembled in the singular frame of `z` from a symmetric block (clip-level
/// averaging over the tied top block, quotient weights across it), a skew
/// block, and a cokernel block.
pub fn exact_proj_derivative_opnorm(
    z_o: f64,
    z: &DMatrix<f64>,
    w_o: f64,
    w: &DMatrix<f64>,
) -> Result<(f64, DMatrix<f64>), OracleError> {
    let (m, n) = z.shape();
    let f = thin_svd(z).expect("svd failed");
    let sig = &f.sigma;
    let scale = 1.0 + (z_o * z_o + z.norm_squared()).sqrt();
    let gate = 1e-8 * scale;

    if z_o - sig.max() > gate {
        return Ok((w_o, w.clone()));
    }
    if -z_o - sig.sum() > gate {
        return Ok((0.0, DMatrix::zeros(m, n)));
    }

    let (level, _clipped, k_star) = brute_project_linf(z_o, sig).map_err(|_| {
        OracleError::NotDifferentiable { margin: 0.0 }
    })?;
    let gap_up = if k_star >= 1 { sig[k_star - 1] - level } else { f64::INFINITY };
    let gap_dn = if k_star < m { level - sig[k_star] } else { f64::INFINITY };
    let margin = level.min(gap_up).min(gap_dn);
    if margin <= gate {
        return Err(OracleError::NotDifferentiable { margin });
    }

    let v1 = f.v.columns(0, m);
    let a_bar = f.u.transpose() * w * v1; // m x m
    let sym = 0.5 * (&a_bar + a_bar.transpose());
    let skw = 0.5 * (&a_bar - a_bar.transpose());
    let q: DVector<f64> = DVector::from_fn(m, |i, _| sig[i].min(level));

    let delta2 = (1 + k_star) as f64;
    let trace_alpha: f64 = (0..k_star).map(|i| sym[(i, i)]).sum();
    let w_o_out = (w_o + trace_alpha) / delta2;

    let mut mblock = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let in_a_i = i < k_star;
            let in_a_j = j < k_star;
            let sym_w = if in_a_i && in_a_j {
                // the tied top block moves only by the common clip-level
                // drift, added after the loop
                0.0
            } else if in_a_i != in_a_j {
                (q[i] - q[j]) / (sig[i] - sig[j])
            } else {
                1.0
            };
            let skw_w = if sig[i] + sig[j] > gate { (q[i] + q[j]) / (sig[i] + sig[j]) } else { 1.0 };
            mblock[(i, j)] = sym_w * sym[(i, j)] + skw_w * skw[(i, j)];
        }
    }
    for i in 0..k_star {
        mblock[(i, i)] += w_o_out;
    }

    let mut w_out = &f.u * &mblock * v1.transpose();
    if n > m {
        let v2 = f.v.columns(m, n - m);
        let b_bar = f.u.transpose() * w * v2; // m x (n-m)
        let mut scaled = b_bar.clone();
        for i in 0..m {
            let wgt = if sig[i] > gate { q[i] / sig[i] } else { 1.0 };
            scaled.row_mut(i).scale_mut(wgt);
        }
        w_out += &f.u * scaled * v2.transpose();
    }
    Ok((w_o_out, w_out))
}

/// Directional derivative of the nuclear-norm-epigraph projection by the
/// reflection identity `Π♯(z) = z + Π(−z)`.
pub fn exact_proj_derivative_nuclear(
    z_o: f64,
    z: &DMatrix<f64>,
    w_o: f64,
    w: &DMatrix<f64>,
) -> Result<(f64, DMatrix<f64>), OracleError> {
    let (d_o, d) = exact_proj_derivative_opnorm(-z_o, &(-z), w_o, w)?;
    Ok((w_o - d_o, w - d))
}

/// Directional derivative of the PSD-cone projection at a nonsingular point:
/// the eigenframe quotient formula `Q [Γ ∘ (QᵀwQ)] Qᵀ` with
/// `Γᵢⱼ = (λᵢ⁺ − λⱼ⁺)/(λᵢ − λⱼ)` (indicator of positivity on ties).
pub fn exact_proj_derivative_psd(
    z: &DMatrix<f64>,
    w: &DMatrix<f64>,
) -> Result<DMatrix<f64>, OracleError> {
    let ef = sym_eigen(z).expect("symmetric eigendecomposition failed");
    let n = z.nrows();
    let gate = 1e-8 * (1.0 + z.norm());
    let margin = ef.lambda.iter().fold(f64::INFINITY, |acc, &l| acc.min(l.abs()));
    if margin <= gate {
        return Err(OracleError::NotDifferentiable { margin });
    }
    let wq = ef.q.transpose() * w * &ef.q;
    let mut scaled = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (li, lj) = (ef.lambda[i], ef.lambda[j]);
            let g = if (li - lj).abs() > 1e-12 * (1.0 + li.abs().max(lj.abs())) {
                (li.max(0.0) - lj.max(0.0)) / (li - lj)
            } else if li > 0.0 {
                1.0
            } else {
                0.0
            };
            scaled[(i, j)] = g * wq[(i, j)];
        }
    }
    Ok(&ef.q * scaled * ef.q.transpose())
}

/// Directional derivative of the ℓ∞-epigraph projection at a differentiable
/// point: the clipped coordinates and the scalar move together by the average
/// drift of the tied block; unclipped coordinates pass through.
pub fn exact_proj_derivative_linf(
    z_o: f64,
    z: &DVector<f64>,
    w_o: f64,
    w: &DVector<f64>,
) -> Result<(f64, DVector<f64>), OracleError> {
    let n = z.len();
    let scale = 1.0 + (z_o * z_o + z.norm_squared()).sqrt();
    let gate = 1e-8 * scale;
    if z_o - z.abs().max() > gate {
        return Ok((w_o, w.clone()));
    }
    if -z_o - z.abs().sum() > gate {
        return Ok((0.0, DVector::zeros(n)));
    }
    let (level, _x, k_star) =
        brute_project_linf(z_o, z).map_err(|_| OracleError::NotDifferentiable { margin: 0.0 })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| z[j].abs().partial_cmp(&z[i].abs()).unwrap());
    let gap_up = if k_star >= 1 { z[order[k_star - 1]].abs() - level } else { f64::INFINITY };
    let gap_dn = if k_star < n { level - z[order[k_star]].abs() } else { f64::INFINITY };
    let margin = level.min(gap_up).min(gap_dn);
    if margin <= gate {
        return Err(OracleError::NotDifferentiable { margin });
    }

    let mut drift = w_o;
    for &i in order.iter().take(k_star) {
        drift += z[i].signum() * w[i];
    }
    drift /= (1 + k_star) as f64;
    let mut out = w.clone();
    for &i in order.iter().take(k_star) {
        out[i] = z[i].signum() * drift;
    }
    Ok((drift, out))
}

/// Directional derivative of the polyhedral projection at a differentiable
/// point: the orthogonal projector onto the nullspace of the active rows.
pub fn exact_proj_derivative_polyhedron(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    z: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<DVector<f64>, OracleError> {
    let xbar = brute_project_polyhedron(a, b, z)?;
    let gate = 1e-8 * (1.0 + z.norm() + b.amax());
    let margins = a * &xbar - b;
    let active: Vec<usize> = (0..a.nrows()).filter(|&i| margins[i] <= gate).collect();
    if active.is_empty() {
        return Ok(w.clone());
    }
    let k = active.len();
    let mut asub = DMatrix::zeros(k, a.ncols());
    for (r, &i) in active.iter().enumerate() {
        asub.row_mut(r).copy_from(&a.row(i));
    }
    let gram = &asub * asub.transpose();
    // Strict complementarity and independence gate: positive multipliers on a
    // full-rank active block, plus strict inactivity elsewhere.
    let chol = nalgebra::linalg::Cholesky::new(gram.clone())
        .ok_or(OracleError::NotDifferentiable { margin: 0.0 })?;
    let resid = &xbar - z;
    let lambda = chol.solve(&(&asub * &resid));
    let inactive_margin = (0..a.nrows())
        .filter(|i| !active.contains(i))
        .map(|i| margins[i])
        .fold(f64::INFINITY, f64::min);
    let margin = lambda.min().min(inactive_margin);
    if margin <= gate {
        return Err(OracleError::NotDifferentiable { margin });
    }
    Ok(w - asub.transpose() * chol.solve(&(&asub * w)))
}

/// Jacobian of the exact projection onto the 3-dimensional second-order cone
/// `{(t, x) : t ≥ ‖x‖₂}`, closed form in the three regimes.
pub fn soc_projection_jacobian(v: &DVector<f64>) -> Result<DMatrix<f64>, OracleError> {
    assert_eq!(v.len(), 3);
    let t = v[0];
    let r = (v[1] * v[1] + v[2] * v[2]).sqrt();
    let gate = 1e-10 * (1.0 + v.norm());
    if t - r > gate {
        return Ok(DMatrix::identity(3, 3));
    }
    if -t - r > gate {
        return Ok(DMatrix::zeros(3, 3));
    }
    if r - t.abs() <= gate || r <= gate {
        return Err(OracleError::NotDifferentiable { margin: (r - t.abs()).min(r) });
    }
    let zb = DVector::from_vec(vec![v[1] / r, v[2] / r]);
    let mut jac = DMatrix::zeros(3, 3);
    jac[(0, 0)] = 0.5;
    for i in 0..2 {
        jac[(0, 1 + i)] = 0.5 * zb[i];
        jac[(1 + i, 0)] = 0.5 * zb[i];
        for j in 0..2 {
            let outer = zb[i] * zb[j];
            let eye = if i == j { 1.0 } else { 0.0 };
            jac[(1 + i, 1 + j)] = 0.5 * outer + (t + r) / (2.0 * r) * (eye - outer);
        }
    }
    Ok(jac)
}

/// Regression pinning down why the second-order-cone smoothing must use the
/// cone's self-concordant barrier `−log(t²−‖x‖²)` and not the seemingly
/// equivalent product-of-faces barrier: the two smoothings have different
/// Jacobian limits at the boundary-normal point `(0, 1, 0)`.
///
/// Four rows: the production smoothed Jacobian near the limit point against
/// the exact projection Jacobian there; that projection Jacobian against
/// central finite differences of an inline projection formula; the
/// wrong-barrier limit's (3,3) entry against ⅔; and the resulting mismatch
/// between the two barrier choices against the symbolic value 1/6.
pub fn soc_barrier_choice_regression() -> Vec<OracleReport> {
    use crate::sets::SmoothedSet;
    use crate::smoothing::{derivative_matrix, wrong_barrier_soc_jacobian};

    let limit_point = DVector::from_column_slice(&[0.0, 1.0, 0.0]);
    let projection_limit =
        soc_projection_jacobian(&limit_point).expect("limit point is differentiable");

    // Production smoothing at mu = offset = 1e-4 along a generic direction.
    let set = SmoothedSet::second_order_cone3();
    let off = 1e-4 / 3f64.sqrt();
    let z = AmbientPoint::vector_from(&[off, 1.0 + off, off]);
    let smoothed = derivative_matrix(&set, &z, 1e-4).expect("derivative handle");
    let mut rows = vec![OracleReport::distance(
        "soc-regression: smoothed jacobian vs projection limit",
        (&smoothed - &projection_limit).amax(),
        1e-3,
    )];

    // Independent check of the limit matrix itself: central differences of an
    // inline middle-regime projection formula.
    let project = |p: &AmbientPoint| {
        let v = p.as_vector();
        let r = (v[1] * v[1] + v[2] * v[2]).sqrt();
        let c = 0.5 * (v[0] + r);
        AmbientPoint::vector_from(&[c, c * v[1] / r, c * v[2] / r])
    };
    let fd = fd_jacobian(project, &AmbientPoint::vector(limit_point), Some(1e-6));
    rows.push(OracleReport::distance(
        "soc-regression: projection jacobian vs finite differences",
        (&fd - &projection_limit).amax(),
        1e-7,
    ));

    let wrong = wrong_barrier_soc_jacobian(1e-5);
    rows.push(OracleReport::compare(
        "soc-regression: wrong-barrier (3,3) limit",
        2.0 / 3.0,
        wrong[(2, 2)],
        1e-6,
    ));
    rows.push(OracleReport::compare(
        "soc-regression: barrier-choice mismatch",
        1.0 / 6.0,
        wrong[(2, 2)] - projection_limit[(2, 2)],
        1e-6,
    ));
    rows
}
