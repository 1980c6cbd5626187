//! Damped Newton iteration for small dense nonlinear systems whose unknowns
//! must keep a family of margin functionals strictly positive.
//!
//! Every implicit solve in this crate (the epigraph smoothing systems and the
//! conjugate-barrier solves) fits the same mold: a smooth square system
//! `R(v) = 0` posed on an open region `{v : m(v) > 0}` cut out by finitely many
//! margin functionals that are *linear* in `v`.  The iteration is plain Newton
//! with two safeguards:
//!
//! * fraction-to-boundary damping: the step is scaled so every margin retains
//!   at least 5% of its current value, which is exact for linear margins;
//! * a halving line search on `‖R‖` with an Armijo-style acceptance test.
//!
//! The loop stops when `‖R‖` reaches the requested tolerance, when iterations
//! run out, or when the residual stagnates at its floating-point floor; the
//! best iterate seen is always returned so callers can decide what to do with
//! a near-converged point.

use nalgebra::{DMatrix, DVector};

/// Outcome of an interior Newton solve.  `point` is the best iterate seen
/// (lowest residual norm), which equals the final iterate when converged.
pub(crate) struct InteriorNewtonReport {
    pub point: DVector<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Damped Newton on the square system `residual(v) = 0` over the open region
/// where every component of `margins(v)` is strictly positive.
///
/// `margins` must be linear in `v`; the fraction-to-boundary factor is exact
/// under that assumption.  `start` must lie strictly inside the region.
pub(crate) fn solve_interior_system<R, J, M>(
    start: DVector<f64>,
    residual: R,
    jacobian: J,
    margins: M,
    tol: f64,
    max_iter: usize,
) -> InteriorNewtonReport
where
    R: Fn(&DVector<f64>) -> DVector<f64>,
    J: Fn(&DVector<f64>) -> DMatrix<f64>,
    M: Fn(&DVector<f64>) -> DVector<f64>,
{
    let m0 = margins(&start);
    assert!(
        m0.iter().all(|&m| m > 0.0),
        "interior Newton started outside its region (min margin {:.3e})",
        m0.min()
    );

    let mut v = start;
    let mut r = residual(&v);
    let mut rn = r.norm();
    let mut best = v.clone();
    let mut best_rn = rn;
    let mut stall = 0usize;
    let mut iterations = 0usize;

    while iterations < max_iter && rn > tol {
        let jac = jacobian(&v);
        let dir = match jac.lu().solve(&(-&r)) {
            Some(d) => d,
            None => break,
        };

        // Exact fraction-to-boundary cap for linear margins: keep every margin
        // at 5% or more of its current value.
        let mv = margins(&v);
        let mt = margins(&(&v + &dir));
        let mut alpha: f64 = 1.0;
        for i in 0..mv.len() {
            let drop = mv[i] - mt[i];
            if drop > 0.0 {
                alpha = alpha.min(0.95 * mv[i] / drop);
            }
        }

        // Halving line search on the residual norm.
        let mut accepted = false;
        for _ in 0..40 {
            let trial = &v + alpha * &dir;
            if margins(&trial).iter().all(|&m| m > 0.0) {
                let rt = residual(&trial);
                let rtn = rt.norm();
                if rtn <= (1.0 - 1e-4 * alpha) * rn {
                    v = trial;
                    r = rt;
                    rn = rtn;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        iterations += 1;
        if !accepted {
            break;
        }
        if rn < best_rn {
            best = v.clone();
            best_rn = rn;
            stall = 0;
        } else {
            // No strict improvement on the best-seen residual: roundoff floor.
            stall += 1;
            if stall >= 3 {
                break;
            }
        }
    }

    InteriorNewtonReport { point: best, residual_norm: best_rn, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scalar smoothed-clip equation p - mu^2/p = z has the closed-form root
    /// (z + sqrt(z^2 + 4 mu^2))/2; the engine must reproduce it from a cold
    /// start for margins spanning many orders of magnitude.
    #[test]
    fn scalar_rational_equation_matches_closed_form() {
        for &(z, mu) in &[(3.0f64, 1.0f64), (-3.0, 1e-2), (-5.0, 1e-5), (0.0, 1e-3)] {
            let mu2: f64 = mu * mu;
            let report = solve_interior_system(
                DVector::from_element(1, z.max(0.0) + 1.0),
                |v: &DVector<f64>| DVector::from_element(1, v[0] - mu2 / v[0] - z),
                |v: &DVector<f64>| DMatrix::from_element(1, 1, 1.0 + mu2 / (v[0] * v[0])),
                |v: &DVector<f64>| v.clone(),
                1e-13 * (1.0 + z.abs()),
                100,
            );
            // Rationalized closed form (the naive (z + sqrt)/2 cancels for
            // negative z and would misreport the error by ~1e-5 relative).
            let s = (z * z + 4.0 * mu2).sqrt();
            let exact = if z >= 0.0 { 0.5 * (z + s) } else { 2.0 * mu2 / (s - z) };
            assert!(
                report.residual_norm <= 1e-13 * (1.0 + z.abs()),
                "no convergence at z={z}, mu={mu}"
            );
            assert!(
                (report.point[0] - exact).abs() <= 1e-10 * exact.max(1e-30),
                "z={z}, mu={mu}: got {:.17e}, want {:.17e}",
                report.point[0],
                exact
            );
        }
    }

    #[test]
    fn respects_margins_on_the_way() {
        // Equation with a spurious Newton step through the boundary:
        // v - 1e-6 = 0 started at 2.0 converges without ever leaving v > 0.
        let report = solve_interior_system(
            DVector::from_element(1, 2.0),
            |v: &DVector<f64>| DVector::from_element(1, (v[0] - 1e-6) * (v[0] + 3.0)),
            |v: &DVector<f64>| DMatrix::from_element(1, 1, 2.0 * v[0] + 3.0 - 1e-6),
            |v: &DVector<f64>| v.clone(),
            1e-14,
            100,
        );
        assert!(report.residual_norm <= 1e-14);
        assert!(report.point[0] > 0.0);
        assert!((report.point[0] - 1e-6).abs() < 1e-12);
    }
}
