//! Inexact linear solves for the continuation method's Newton systems.
//!
//! The solver never needs exact Newton directions: each outer iteration asks
//! for a step `Δw` with a *relative residual contract*
//!
//! ```text
//!   ‖A·Δw − rhs‖ ≤ rel_tol · ‖rhs‖,      A = DH_μ(w),
//! ```
//!
//! and the continuation theory consumes only that inequality.  The engine here
//! is restarted GMRES (restart length 50, modified Gram–Schmidt, Givens
//! rotations on the Hessenberg matrix) over [`PairPoint`]s, applied matrix-free
//! through the [`LinearOperator`] trait.  Two policies are deliberate:
//!
//! * the achieved residual is always *re-measured* by one extra operator
//!   application before a solve reports success — the contract is stated on
//!   true residuals, and the rotation recurrence can drift;
//! * a Krylov breakdown (zero-norm basis vector) just ends the cycle early;
//!   the re-measured residual then decides between success and another
//!   restart, so a happy breakdown is not misreported as failure.
//!
//! No preconditioner is applied by default (the desk-scale systems are mild);
//! [`solve_inexact_preconditioned`] accepts a left preconditioner for callers
//! that need one.  [`solve_dense`] is the LU-based direct solve used both as a
//! fallback on small systems and as the test oracle for the Krylov path.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::space::PairPoint;

/// GMRES restart length.
const RESTART: usize = 50;

/// Errors from the dense direct solver.
#[derive(Debug, Error)]
pub enum LinSolveError {
    /// LU elimination hit a zero pivot.
    #[error("matrix is singular to working precision")]
    SingularMatrix,
}

/// A square linear operator on pairs, applied matrix-free.  The canonical
/// implementor is [`crate::vi::DhOperator`] — the Jacobian of the smoothed
/// natural map.
pub trait LinearOperator {
    /// Flat dimension of the operator.
    fn dim(&self) -> usize;

    /// `A·d`.
    fn apply(&self, d: &PairPoint) -> PairPoint;
}

impl LinearOperator for crate::vi::DhOperator<'_> {
    fn dim(&self) -> usize {
        crate::vi::DhOperator::dim(self)
    }

    fn apply(&self, d: &PairPoint) -> PairPoint {
        crate::vi::DhOperator::apply(self, d)
    }
}

/// Outcome of an inexact solve.  `residual_norm` is the true residual
/// `‖A·solution − rhs‖` from an explicit operator application, and
/// `converged` holds exactly when it is within the requested contract.
#[derive(Debug, Clone)]
pub struct LinSolveResult {
    /// Approximate solution (zero when the iteration made no progress).
    pub solution: PairPoint,
    /// Re-measured residual norm `‖A·solution − rhs‖`.
    pub residual_norm: f64,
    /// Operator applications spent (excluding the re-measurements).
    pub iterations: usize,
    /// Whether `residual_norm ≤ rel_tol · ‖rhs‖`.
    pub converged: bool,
}

/// Restarted GMRES on `A·x = rhs` with the relative-residual contract
/// `‖A·x − rhs‖ ≤ rel_tol · ‖rhs‖`.  A non-converged result is returned with
/// `converged = false` (the caller decides how to escalate); `rhs = 0`
/// short-circuits to the zero solution.
pub fn solve_inexact(
    op: &dyn LinearOperator,
    rhs: &PairPoint,
    rel_tol: f64,
    max_iter: usize,
) -> LinSolveResult {
    solve_inexact_preconditioned(op, rhs, rel_tol, max_iter, None)
}

/// [`solve_inexact`] with an optional left preconditioner `M⁻¹` (the
/// iteration runs on `M⁻¹A·x = M⁻¹rhs`; the contract is still checked on the
/// unpreconditioned residual).
pub fn solve_inexact_preconditioned(
    op: &dyn LinearOperator,
    rhs: &PairPoint,
    rel_tol: f64,
    max_iter: usize,
    precond: Option<&dyn LinearOperator>,
) -> LinSolveResult {
    assert!(
        rel_tol > 0.0 && rel_tol < 1.0,
        "relative tolerance must lie in (0, 1), got {rel_tol}"
    );
    let rhs_norm = rhs.norm();
    if rhs_norm == 0.0 {
        return LinSolveResult {
            solution: rhs.scale(0.0),
            residual_norm: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let tol_abs = rel_tol * rhs_norm;
    let prec = |v: &PairPoint| match precond {
        Some(m) => m.apply(v),
        None => v.clone(),
    };

    let mut x = rhs.scale(0.0);
    let mut iterations = 0usize;
    loop {
        // True (unpreconditioned) residual at the current iterate; this is
        // both the restart vector and the honest convergence measurement.
        let resid = rhs.sub(&op.apply(&x));
        let true_norm = resid.norm();
        if true_norm <= tol_abs {
            return LinSolveResult { solution: x, residual_norm: true_norm, iterations, converged: true };
        }
        if iterations >= max_iter {
            return LinSolveResult { solution: x, residual_norm: true_norm, iterations, converged: false };
        }

        let r0 = prec(&resid);
        let beta = r0.norm();
        if beta == 0.0 {
            // Preconditioned residual vanished while the true one did not:
            // the preconditioner is singular along this direction.
            return LinSolveResult { solution: x, residual_norm: true_norm, iterations, converged: false };
        }

        let mut basis: Vec<PairPoint> = vec![r0.scale(1.0 / beta)];
        let mut h = DMatrix::<f64>::zeros(RESTART + 1, RESTART);
        let mut g = DVector::<f64>::zeros(RESTART + 1);
        g[0] = beta;
        let mut cs = [0.0f64; RESTART];
        let mut sn = [0.0f64; RESTART];
        let mut cols = 0usize;

        while cols < RESTART && iterations < max_iter {
            let j = cols;
            let mut w = prec(&op.apply(&basis[j]));
            iterations += 1;
            for (i, vi) in basis.iter().enumerate() {
                let hij = w.inner(vi);
                h[(i, j)] = hij;
                w = w.axpy(-hij, vi);
            }
            let hnext = w.norm();
            cols += 1;

            // Rotate the new column into upper-triangular form.
            for i in 0..j {
                let t = cs[i] * h[(i, j)] + sn[i] * h[(i + 1, j)];
                h[(i + 1, j)] = -sn[i] * h[(i, j)] + cs[i] * h[(i + 1, j)];
                h[(i, j)] = t;
            }
            let r = f64::hypot(h[(j, j)], hnext);
            if r == 0.0 {
                // Column of zeros: the operator made no progress along this
                // direction (it maps the new basis vector into the span of
                // the old ones with zero diagonal).  Discard the dead column
                // and let the re-measured residual decide.
                cols -= 1;
                break;
            }
            cs[j] = h[(j, j)] / r;
            sn[j] = hnext / r;
            h[(j, j)] = r;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];

            if hnext <= 1e-14 * beta {
                // (Near-)breakdown: the subspace became invariant, so the
                // least-squares solution over the current columns is as good
                // as this cycle gets.
                break;
            }
            basis.push(w.scale(1.0 / hnext));
            if g[j + 1].abs() <= tol_abs {
                break;
            }
        }

        if cols == 0 {
            return LinSolveResult { solution: x, residual_norm: true_norm, iterations, converged: false };
        }

        // Back-substitute H(0..cols, 0..cols) y = g and accumulate x += V y.
        let mut y = DVector::<f64>::zeros(cols);
        for i in (0..cols).rev() {
            let mut s = g[i];
            for k in (i + 1)..cols {
                s -= h[(i, k)] * y[k];
            }
            y[i] = s / h[(i, i)];
        }
        for (i, vi) in basis.iter().take(cols).enumerate() {
            x = x.axpy(y[i], vi);
        }
    }
}

/// Direct dense solve by LU with partial pivoting; the oracle for the Krylov
/// path and the fallback for small systems.
pub fn solve_dense(matrix: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>, LinSolveError> {
    assert_eq!(matrix.nrows(), matrix.ncols(), "dense solve needs a square matrix");
    assert_eq!(matrix.nrows(), rhs.len(), "dimension mismatch");
    matrix.clone().lu().solve(rhs).ok_or(LinSolveError::SingularMatrix)
}
