//! Strict-feasibility probe for polyhedra `{x : Ax ≥ b}`.
//!
//! Construction of a polyhedral set requires a strictly feasible point, both
//! as a certificate that the barrier has a nonempty domain and as the warm
//! start for the smoothing solves.  The probe maximizes the normalized margin:
//! it runs a bisection on `t` over the feasibility of the shifted system
//!
//! ```text
//! Aᵢ x − bᵢ ≥ t · ‖Aᵢ‖      for every row i,
//! ```
//!
//! deciding each level with a Gauss–Newton minimization of the hinge residual
//! `½ Σ max(0, bᵢ + t‖Aᵢ‖ − Aᵢx)²` (a convex piecewise-quadratic function
//! whose minimum is zero exactly when the shifted system is solvable).  The
//! point found at the last feasible level is returned; failure at a
//! vanishingly small shift means the polyhedron has no strict interior.
//! Margin growth stops at a multiple of the data scale rather than at the
//! supremum, which keeps the returned point at moderate norm on unbounded
//! polyhedra.

use nalgebra::{DMatrix, DVector};

use super::SetError;

/// Minimize the hinge residual for margin level `t`; returns a point
/// satisfying all shifted constraints strictly, or `None`.
fn solve_hinge(a: &DMatrix<f64>, shifted: &DVector<f64>, start: &DVector<f64>) -> Option<DVector<f64>> {
    let (m, n) = (a.nrows(), a.ncols());
    let value = |x: &DVector<f64>| -> f64 {
        let mut g = 0.0;
        for i in 0..m {
            let h = shifted[i] - a.row(i).dot(&x.transpose());
            if h > 0.0 {
                g += 0.5 * h * h;
            }
        }
        g
    };
    let target = 1e-26 * (1.0 + shifted.amax()).powi(2);

    let mut x = start.clone();
    let mut g = value(&x);
    for _ in 0..300 {
        if g <= target {
            return Some(x);
        }
        let mut grad = DVector::zeros(n);
        let mut gn = DMatrix::from_diagonal_element(n, n, 1e-12);
        let mut any_active = false;
        for i in 0..m {
            let h = shifted[i] - a.row(i).dot(&x.transpose());
            if h > 0.0 {
                any_active = true;
                for c in 0..n {
                    grad[c] -= h * a[(i, c)];
                    for d in 0..n {
                        gn[(c, d)] += a[(i, c)] * a[(i, d)];
                    }
                }
            }
        }
        if !any_active {
            return Some(x);
        }
        let dir = gn.cholesky()?.solve(&(-&grad));
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let trial = &x + alpha * &dir;
            let gt = value(&trial);
            if gt < g {
                x = trial;
                g = gt;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if g <= target {
        Some(x)
    } else {
        None
    }
}

/// Find a strictly feasible point with a near-maximal normalized margin.
pub(crate) fn feasibility_probe(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, SetError> {
    let (m, n) = (a.nrows(), a.ncols());
    let row_norms = DVector::from_fn(m, |i, _| a.row(i).norm());
    // Rows with a zero normal are constants: b ≥ 0 there is unsatisfiable
    // strictly (0 > b fails even for b = 0).
    for i in 0..m {
        if row_norms[i] == 0.0 && b[i] >= 0.0 {
            return Err(SetError::InfeasibleSet);
        }
    }

    let scale = 1.0 + b.amax();
    let shifted_at = |t: f64| DVector::from_fn(m, |i, _| b[i] + t * row_norms[i]);

    let t_min = 1e-10 * scale;
    let mut point = match solve_hinge(a, &shifted_at(t_min), &DVector::zeros(n)) {
        Some(p) => p,
        None => return Err(SetError::InfeasibleSet),
    };
    let mut t_feasible = t_min;

    // Grow the margin by doubling, then tighten with a short bisection.  The
    // growth is capped at a level tied to the data scale: on an unbounded
    // polyhedron the margin can grow forever, and the probe point doubles as
    // the canonical interior point, so chasing the supremum would hand every
    // downstream consumer a starting point of absurd norm.
    let mut t_hi = scale;
    let mut hi_infeasible = false;
    loop {
        match solve_hinge(a, &shifted_at(t_hi), &point) {
            Some(p) => {
                point = p;
                t_feasible = t_hi;
                if t_hi >= 8.0 * scale {
                    break;
                }
                t_hi *= 2.0;
            }
            None => {
                hi_infeasible = true;
                break;
            }
        }
    }
    if hi_infeasible {
        let mut lo = t_feasible;
        let mut hi = t_hi;
        while hi / lo > 2.0 {
            let mid = (lo * hi).sqrt();
            match solve_hinge(a, &shifted_at(mid), &point) {
                Some(p) => {
                    point = p;
                    lo = mid;
                }
                None => hi = mid,
            }
        }
    }

    let margins = a * &point - b;
    if margins.min() <= 0.0 {
        return Err(SetError::InfeasibleSet);
    }
    Ok(point)
}
