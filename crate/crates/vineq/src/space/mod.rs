//! Ambient spaces the solver works in.
//!
//! Three kinds of points occur: plain dense vectors, symmetric matrices (for
//! the semidefinite cone), and scalar–matrix pairs `(t, x)` with `x` an
//! `m x n` matrix, `m <= n` (for norm epigraphs; the l-inf epigraph and the
//! small second-order cone use the `1 x n` special case).  [`AmbientPoint`]
//! unifies them behind one arithmetic interface so the residual, Krylov, and
//! continuation layers never match on shapes.
//!
//! Inner products are the natural ones — dot product, trace inner product,
//! and `t1*t2 + trace(x1' x2)` — and the flattening used for dense operators
//! and finite differences is an isometry for each shape (symmetric matrices
//! flatten to svec form: upper triangle with off-diagonals scaled by
//! `sqrt 2`).
//!
//! The module also wraps the two factorizations the smoothing layer relies
//! on: a symmetric eigendecomposition with eigenvalues sorted descending, and
//! a thin SVD that returns a *complete* right factor (an orthonormal basis of
//! the full row space, including the trailing `n - m` columns), which the
//! epigraph derivative formulas need.

pub mod mmio;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Errors from the factorization helpers.
#[derive(Debug, Error)]
pub enum SpaceError {
    /// The iterative eigen/SVD algorithm did not converge.
    #[error("matrix factorization failed to converge")]
    Factorization,
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// A point in one of the three ambient spaces.
///
/// Arithmetic between points of different shapes is a caller bug and panics.
#[derive(Debug, Clone, PartialEq)]
pub enum AmbientPoint {
    /// A point of `R^n`.
    DenseVector(DVector<f64>),
    /// A symmetric `n x n` matrix; the stored matrix satisfies
    /// `a[(i, j)] == a[(j, i)]` bitwise (the constructor mirrors the upper
    /// triangle).
    SymMatrix(DMatrix<f64>),
    /// A pair `(t, x)` with `x` an `m x n` matrix, `m <= n`.
    ScalarMatrix {
        /// Scalar component (the epigraph variable).
        t: f64,
        /// Matrix component.
        x: DMatrix<f64>,
    },
}

impl AmbientPoint {
    /// Wraps a dense vector.
    pub fn vector(v: DVector<f64>) -> Self {
        AmbientPoint::DenseVector(v)
    }

    /// Wraps a vector given as a slice.
    pub fn vector_from(v: &[f64]) -> Self {
        AmbientPoint::DenseVector(DVector::from_row_slice(v))
    }

    /// Wraps a symmetric matrix.  The input must be square and symmetric up
    /// to roundoff; it is symmetrized as `(a + a') / 2` and the result is
    /// mirrored so the stored entries are bitwise symmetric.
    pub fn sym_matrix(a: DMatrix<f64>) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "symmetric point needs a square matrix");
        let n = a.nrows();
        let mut s = a.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
                s[(i, j)] = avg;
                s[(j, i)] = avg;
            }
        }
        AmbientPoint::SymMatrix(s)
    }

    /// Wraps a scalar–matrix pair `(t, x)`; requires `x.nrows() <= x.ncols()`.
    pub fn scalar_matrix(t: f64, x: DMatrix<f64>) -> Self {
        assert!(
            x.nrows() <= x.ncols(),
            "scalar-matrix points require m <= n (got {} x {})",
            x.nrows(),
            x.ncols()
        );
        AmbientPoint::ScalarMatrix { t, x }
    }

    /// Convenience constructor for the `1 x n` scalar–vector case used by the
    /// l-inf epigraph and the second-order cone.
    pub fn scalar_vector(t: f64, x: &[f64]) -> Self {
        AmbientPoint::scalar_matrix(t, DMatrix::from_row_slice(1, x.len(), x))
    }

    /// Total real dimension of the flattened point.
    pub fn dim(&self) -> usize {
        match self {
            AmbientPoint::DenseVector(v) => v.len(),
            AmbientPoint::SymMatrix(a) => a.nrows() * (a.nrows() + 1) / 2,
            AmbientPoint::ScalarMatrix { x, .. } => 1 + x.nrows() * x.ncols(),
        }
    }

    /// True when `other` lives in the same space (same variant and sizes).
    pub fn same_shape(&self, other: &AmbientPoint) -> bool {
        match (self, other) {
            (AmbientPoint::DenseVector(a), AmbientPoint::DenseVector(b)) => a.len() == b.len(),
            (AmbientPoint::SymMatrix(a), AmbientPoint::SymMatrix(b)) => a.nrows() == b.nrows(),
            (
                AmbientPoint::ScalarMatrix { x: a, .. },
                AmbientPoint::ScalarMatrix { x: b, .. },
            ) => a.shape() == b.shape(),
            _ => false,
        }
    }

    fn assert_same_shape(&self, other: &AmbientPoint, op: &str) {
        assert!(
            self.same_shape(other),
            "shape mismatch in AmbientPoint::{op}: {} vs {}",
            self.shape_name(),
            other.shape_name()
        );
    }

    fn shape_name(&self) -> String {
        match self {
            AmbientPoint::DenseVector(v) => format!("vector[{}]", v.len()),
            AmbientPoint::SymMatrix(a) => format!("sym[{}]", a.nrows()),
            AmbientPoint::ScalarMatrix { x, .. } => {
                format!("scalar-matrix[{} x {}]", x.nrows(), x.ncols())
            }
        }
    }

    /// The zero point of the same space.
    pub fn zeros_like(&self) -> AmbientPoint {
        match self {
            AmbientPoint::DenseVector(v) => AmbientPoint::DenseVector(DVector::zeros(v.len())),
            AmbientPoint::SymMatrix(a) => {
                AmbientPoint::SymMatrix(DMatrix::zeros(a.nrows(), a.ncols()))
            }
            AmbientPoint::ScalarMatrix { x, .. } => AmbientPoint::ScalarMatrix {
                t: 0.0,
                x: DMatrix::zeros(x.nrows(), x.ncols()),
            },
        }
    }

    /// Inner product; dot / trace / `t1 t2 + trace(x1' x2)` by shape.
    pub fn inner(&self, other: &AmbientPoint) -> f64 {
        self.assert_same_shape(other, "inner");
        match (self, other) {
            (AmbientPoint::DenseVector(a), AmbientPoint::DenseVector(b)) => a.dot(b),
            (AmbientPoint::SymMatrix(a), AmbientPoint::SymMatrix(b)) => a.dot(b),
            (
                AmbientPoint::ScalarMatrix { t: ta, x: xa },
                AmbientPoint::ScalarMatrix { t: tb, x: xb },
            ) => ta * tb + xa.dot(xb),
            _ => unreachable!(),
        }
    }

    /// Norm induced by [`AmbientPoint::inner`].
    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// `self + other`.
    pub fn add(&self, other: &AmbientPoint) -> AmbientPoint {
        self.axpy(1.0, other)
    }

    /// `self - other`.
    pub fn sub(&self, other: &AmbientPoint) -> AmbientPoint {
        self.axpy(-1.0, other)
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &AmbientPoint) -> AmbientPoint {
        self.assert_same_shape(other, "axpy");
        match (self, other) {
            (AmbientPoint::DenseVector(a), AmbientPoint::DenseVector(b)) => {
                AmbientPoint::DenseVector(a + alpha * b)
            }
            (AmbientPoint::SymMatrix(a), AmbientPoint::SymMatrix(b)) => {
                AmbientPoint::SymMatrix(a + alpha * b)
            }
            (
                AmbientPoint::ScalarMatrix { t: ta, x: xa },
                AmbientPoint::ScalarMatrix { t: tb, x: xb },
            ) => AmbientPoint::ScalarMatrix {
                t: ta + alpha * tb,
                x: xa + alpha * xb,
            },
            _ => unreachable!(),
        }
    }

    /// `alpha * self`.
    pub fn scale(&self, alpha: f64) -> AmbientPoint {
        match self {
            AmbientPoint::DenseVector(v) => AmbientPoint::DenseVector(alpha * v),
            AmbientPoint::SymMatrix(a) => AmbientPoint::SymMatrix(alpha * a),
            AmbientPoint::ScalarMatrix { t, x } => AmbientPoint::ScalarMatrix {
                t: alpha * t,
                x: alpha * x,
            },
        }
    }

    /// Isometric flattening into `R^dim` (svec for symmetric matrices).
    pub fn to_flat(&self) -> DVector<f64> {
        match self {
            AmbientPoint::DenseVector(v) => v.clone(),
            AmbientPoint::SymMatrix(a) => {
                let n = a.nrows();
                let mut out = DVector::zeros(n * (n + 1) / 2);
                let mut k = 0;
                for i in 0..n {
                    out[k] = a[(i, i)];
                    k += 1;
                    for j in (i + 1)..n {
                        out[k] = SQRT2 * a[(i, j)];
                        k += 1;
                    }
                }
                out
            }
            AmbientPoint::ScalarMatrix { t, x } => {
                let mut out = DVector::zeros(1 + x.nrows() * x.ncols());
                out[0] = *t;
                let mut k = 1;
                for i in 0..x.nrows() {
                    for j in 0..x.ncols() {
                        out[k] = x[(i, j)];
                        k += 1;
                    }
                }
                out
            }
        }
    }

    /// Inverse of [`AmbientPoint::to_flat`], using `self` as the shape
    /// template.
    pub fn from_flat_like(&self, flat: &DVector<f64>) -> AmbientPoint {
        assert_eq!(flat.len(), self.dim(), "flat vector length mismatch");
        match self {
            AmbientPoint::DenseVector(_) => AmbientPoint::DenseVector(flat.clone()),
            AmbientPoint::SymMatrix(a) => {
                let n = a.nrows();
                let mut out = DMatrix::zeros(n, n);
                let mut k = 0;
                for i in 0..n {
                    out[(i, i)] = flat[k];
                    k += 1;
                    for j in (i + 1)..n {
                        let v = flat[k] / SQRT2;
                        out[(i, j)] = v;
                        out[(j, i)] = v;
                        k += 1;
                    }
                }
                AmbientPoint::SymMatrix(out)
            }
            AmbientPoint::ScalarMatrix { x, .. } => {
                let (m, n) = x.shape();
                let mut out = DMatrix::zeros(m, n);
                let mut k = 1;
                for i in 0..m {
                    for j in 0..n {
                        out[(i, j)] = flat[k];
                        k += 1;
                    }
                }
                AmbientPoint::ScalarMatrix { t: flat[0], x: out }
            }
        }
    }

    /// Borrows the dense-vector payload; panics on other shapes.
    pub fn as_vector(&self) -> &DVector<f64> {
        match self {
            AmbientPoint::DenseVector(v) => v,
            other => panic!("expected a dense vector point, got {}", other.shape_name()),
        }
    }

    /// Borrows the symmetric-matrix payload; panics on other shapes.
    pub fn as_sym(&self) -> &DMatrix<f64> {
        match self {
            AmbientPoint::SymMatrix(a) => a,
            other => panic!("expected a symmetric matrix point, got {}", other.shape_name()),
        }
    }

    /// Borrows the scalar–matrix payload; panics on other shapes.
    pub fn as_scalar_matrix(&self) -> (f64, &DMatrix<f64>) {
        match self {
            AmbientPoint::ScalarMatrix { t, x } => (*t, x),
            other => panic!("expected a scalar-matrix point, got {}", other.shape_name()),
        }
    }
}

/// An `(x, y)` pair of same-shaped ambient points — the solver's iterates
/// `w = (x, y)` and the residual pairs live here.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPoint {
    /// Primal component.
    pub x: AmbientPoint,
    /// Dual/mirror component (same shape as `x`).
    pub y: AmbientPoint,
}

impl PairPoint {
    /// Builds a pair, checking the two components share a shape.
    pub fn new(x: AmbientPoint, y: AmbientPoint) -> Self {
        assert!(x.same_shape(&y), "pair components must share a shape");
        PairPoint { x, y }
    }

    /// Total flat dimension (`2 * x.dim()`).
    pub fn dim(&self) -> usize {
        2 * self.x.dim()
    }

    /// Componentwise inner product.
    pub fn inner(&self, other: &PairPoint) -> f64 {
        self.x.inner(&other.x) + self.y.inner(&other.y)
    }

    /// Norm induced by [`PairPoint::inner`].
    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &PairPoint) -> PairPoint {
        PairPoint {
            x: self.x.axpy(alpha, &other.x),
            y: self.y.axpy(alpha, &other.y),
        }
    }

    /// `self - other`.
    pub fn sub(&self, other: &PairPoint) -> PairPoint {
        self.axpy(-1.0, other)
    }

    /// `alpha * self`.
    pub fn scale(&self, alpha: f64) -> PairPoint {
        PairPoint {
            x: self.x.scale(alpha),
            y: self.y.scale(alpha),
        }
    }

    /// Flattens to `[x_flat; y_flat]`.
    pub fn to_flat(&self) -> DVector<f64> {
        let xf = self.x.to_flat();
        let yf = self.y.to_flat();
        let mut out = DVector::zeros(xf.len() + yf.len());
        out.rows_mut(0, xf.len()).copy_from(&xf);
        out.rows_mut(xf.len(), yf.len()).copy_from(&yf);
        out
    }

    /// Inverse of [`PairPoint::to_flat`] with `self` as shape template.
    pub fn from_flat_like(&self, flat: &DVector<f64>) -> PairPoint {
        let d = self.x.dim();
        assert_eq!(flat.len(), 2 * d, "flat pair length mismatch");
        PairPoint {
            x: self.x.from_flat_like(&flat.rows(0, d).into_owned()),
            y: self.y.from_flat_like(&flat.rows(d, d).into_owned()),
        }
    }
}

/// Result of [`sym_eigen`]: `a = q * diag(lambda) * q'` with `lambda`
/// descending and `q` orthogonal.
pub struct EigenFactors {
    /// Orthogonal eigenvector matrix (columns are eigenvectors).
    pub q: DMatrix<f64>,
    /// Eigenvalues, sorted descending.
    pub lambda: DVector<f64>,
}

/// Symmetric eigendecomposition with eigenvalues sorted descending.
///
/// The backend does not promise any eigenvalue order, so the permutation is
/// applied here; downstream spectral formulas index "the top block" and rely
/// on it.
pub fn sym_eigen(a: &DMatrix<f64>) -> Result<EigenFactors, SpaceError> {
    assert_eq!(a.nrows(), a.ncols(), "sym_eigen needs a square matrix");
    let eig = nalgebra::SymmetricEigen::try_new(a.clone(), f64::EPSILON, 0)
        .ok_or(SpaceError::Factorization)?;
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("eigenvalues are finite")
    });
    let mut q = DMatrix::zeros(n, n);
    let mut lambda = DVector::zeros(n);
    for (k, &i) in order.iter().enumerate() {
        q.set_column(k, &eig.eigenvectors.column(i));
        lambda[k] = eig.eigenvalues[i];
    }
    Ok(EigenFactors { q, lambda })
}

/// Result of [`thin_svd`] for an `m x n` input with `m <= n`:
/// `a = u * [diag(sigma) 0] * v'` with `u` `m x m`, `v` `n x n` (complete
/// orthonormal basis), and `sigma` descending, nonnegative.
pub struct SvdFactors {
    /// Left singular vectors, `m x m` orthogonal.
    pub u: DMatrix<f64>,
    /// Singular values, descending, length `m`.
    pub sigma: DVector<f64>,
    /// Complete right factor, `n x n` orthogonal; the first `m` columns pair
    /// with `sigma`, the trailing `n - m` columns span the cokernel.
    pub v: DMatrix<f64>,
}

/// Thin SVD of a wide (or square) matrix with the right factor completed to a
/// full orthonormal basis.
///
/// The backend's direct SVD of wide matrices miscomputes the singular vectors
/// for (near-)rank-deficient inputs — and exactly-clipped spectra are routine
/// here — so the wide case is reduced to a square SVD through an LQ step:
/// a Householder QR of `[aᵀ | 0]` writes `a = R̂ᵀ Q̂₁ᵀ` with `R̂` the top
/// `m×m` block of `r`, the square SVD `R̂ᵀ = u Σ v₀ᵀ` then gives
/// `a = u [Σ 0] (Q̂ [v₀ ⊕ I])ᵀ`, and the trailing columns of `Q̂` complete
/// `v` to an orthonormal basis for free.
pub fn thin_svd(a: &DMatrix<f64>) -> Result<SvdFactors, SpaceError> {
    let (m, n) = a.shape();
    assert!(m <= n, "thin_svd expects m <= n (got {m} x {n})");
    if m == n {
        let (u, sigma, v0) = sorted_square_svd(a.clone())?;
        return Ok(SvdFactors { u, sigma, v: v0 });
    }
    let mut padded = DMatrix::zeros(n, n);
    padded.columns_mut(0, m).copy_from(&a.transpose());
    let qr = nalgebra::linalg::QR::new(padded);
    let qfull = qr.q();
    let rhat_t = qr.r().view((0, 0), (m, m)).transpose().into_owned();
    let (u, sigma, v0) = sorted_square_svd(rhat_t)?;
    let mut v = DMatrix::zeros(n, n);
    v.columns_mut(0, m).copy_from(&(qfull.columns(0, m) * &v0));
    v.columns_mut(m, n - m).copy_from(&qfull.columns(m, n - m));
    Ok(SvdFactors { u, sigma, v })
}

/// Square SVD with a defensive descending sort of the singular triples.
fn sorted_square_svd(a: DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>), SpaceError> {
    let m = a.nrows();
    let svd = nalgebra::SVD::try_new(a, true, true, f64::EPSILON, 0)
        .ok_or(SpaceError::Factorization)?;
    let u0 = svd.u.ok_or(SpaceError::Factorization)?;
    let v0 = svd.v_t.ok_or(SpaceError::Factorization)?.transpose();
    let s0 = svd.singular_values;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| s0[j].partial_cmp(&s0[i]).expect("singular values are finite"));
    let mut u = DMatrix::zeros(m, m);
    let mut v = DMatrix::zeros(m, m);
    let mut sigma = DVector::zeros(m);
    for (k, &i) in order.iter().enumerate() {
        u.set_column(k, &u0.column(i));
        v.set_column(k, &v0.column(i));
        sigma[k] = s0[i];
    }
    Ok((u, sigma, v))
}

/// Rebuilds the `m x n` matrix `u * [diag(vals) 0] * v'` from SVD-style
/// factors (`vals` need not be nonnegative; the epigraph solvers use signed
/// spectra in a fixed frame).
pub fn assemble_from_svd(u: &DMatrix<f64>, vals: &DVector<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let m = u.nrows();
    assert_eq!(vals.len(), m, "need one value per left singular vector");
    let v1 = v.columns(0, m);
    let mut scaled = v1.transpose(); // m x n
    for i in 0..m {
        scaled.row_mut(i).scale_mut(vals[i]);
    }
    u * scaled
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

    fn random_matrix(r: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(m, n, |_, _| r.random::<f64>() * 2.0 - 1.0)
    }

    fn random_sym(r: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = random_matrix(r, n, n);
        0.5 * (&a + a.transpose())
    }

    #[test]
    fn inner_products_by_shape() {
        let a = AmbientPoint::vector_from(&[1.0, 2.0]);
        let b = AmbientPoint::vector_from(&[3.0, 4.0]);
        assert_eq!(a.inner(&b), 11.0);

        let i2 = AmbientPoint::sym_matrix(DMatrix::identity(2, 2));
        assert_eq!(i2.inner(&i2), 2.0);

        let p = AmbientPoint::scalar_matrix(1.0, DMatrix::from_element(1, 1, 2.0));
        let q = AmbientPoint::scalar_matrix(3.0, DMatrix::from_element(1, 1, 4.0));
        assert_eq!(p.inner(&q), 11.0);
    }

    #[test]
    fn inner_is_symmetric_and_bilinear() {
        let mut r = rng(7);
        for _ in 0..50 {
            let a = AmbientPoint::sym_matrix(random_sym(&mut r, 4));
            let b = AmbientPoint::sym_matrix(random_sym(&mut r, 4));
            let c = AmbientPoint::sym_matrix(random_sym(&mut r, 4));
            let alpha = r.random::<f64>() * 4.0 - 2.0;
            assert!((a.inner(&b) - b.inner(&a)).abs() < 1e-12);
            let lhs = a.axpy(alpha, &b).inner(&c);
            let rhs = a.inner(&c) + alpha * b.inner(&c);
            assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn flattening_is_an_isometry() {
        let mut r = rng(11);
        let pts = vec![
            AmbientPoint::vector(DVector::from_fn(6, |_, _| r.random::<f64>())),
            AmbientPoint::sym_matrix(random_sym(&mut r, 5)),
            AmbientPoint::scalar_matrix(r.random::<f64>(), random_matrix(&mut r, 2, 4)),
        ];
        for p in &pts {
            for q_seed in 0..5 {
                let mut r2 = rng(100 + q_seed);
                let qf = DVector::from_fn(p.dim(), |_, _| r2.random::<f64>() * 2.0 - 1.0);
                let q = p.from_flat_like(&qf);
                // round trip
                assert!((q.to_flat() - &qf).norm() < 1e-14);
                // isometry: flat dot equals ambient inner
                let ip = p.inner(&q);
                let fd = p.to_flat().dot(&qf);
                assert!((ip - fd).abs() < 1e-12 * (1.0 + ip.abs()));
            }
        }
    }

    #[test]
    #[should_panic(expected = "shape mismatch")]
    fn mismatched_shapes_panic() {
        let a = AmbientPoint::vector_from(&[1.0]);
        let b = AmbientPoint::vector_from(&[1.0, 2.0]);
        let _ = a.inner(&b);
    }

    #[test]
    fn sym_matrix_storage_is_bitwise_symmetric() {
        let mut r = rng(13);
        let raw = random_matrix(&mut r, 6, 6); // deliberately nonsymmetric
        if let AmbientPoint::SymMatrix(s) = AmbientPoint::sym_matrix(raw) {
            for i in 0..6 {
                for j in 0..6 {
                    assert!(s[(i, j)].to_bits() == s[(j, i)].to_bits());
                }
            }
        } else {
            unreachable!()
        }
    }

    #[test]
    fn eigen_sorted_and_reconstructs() {
        let d = DMatrix::from_diagonal(&DVector::from_row_slice(&[3.0, -4.0]));
        let f = sym_eigen(&d).unwrap();
        assert!((f.lambda[0] - 3.0).abs() < 1e-12);
        assert!((f.lambda[1] + 4.0).abs() < 1e-12);

        let mut r = rng(17);
        for _ in 0..20 {
            let a = random_sym(&mut r, 8);
            let f = sym_eigen(&a).unwrap();
            for k in 1..8 {
                assert!(f.lambda[k - 1] >= f.lambda[k] - 1e-13);
            }
            let rec = &f.q * DMatrix::from_diagonal(&f.lambda) * f.q.transpose();
            let rel = (&rec - &a).norm() / (1.0 + a.norm());
            assert!(rel < 1e-10, "reconstruction error {rel}");
            let orth = (f.q.transpose() * &f.q - DMatrix::<f64>::identity(8, 8)).norm();
            assert!(orth < 1e-12 * 8.0, "orthogonality defect {orth}");
        }
    }

    #[test]
    fn svd_of_wide_row() {
        let a = DMatrix::from_row_slice(1, 3, &[2.0, 0.0, 0.0]);
        let f = thin_svd(&a).unwrap();
        assert!((f.sigma[0] - 2.0).abs() < 1e-14);
        assert!((f.u[(0, 0)].abs() - 1.0).abs() < 1e-14);
        let orth = (f.v.transpose() * &f.v - DMatrix::<f64>::identity(3, 3)).norm();
        assert!(orth < 1e-12);
        let rec = assemble_from_svd(&f.u, &f.sigma, &f.v);
        assert!((rec - &a).norm() < 1e-12);
    }

    #[test]
    fn svd_complete_right_factor() {
        let mut r = rng(23);
        for trial in 0..20 {
            let (m, n) = ((trial % 3) + 2, (trial % 3) + 2 + trial % 4);
            let a = random_matrix(&mut r, m, n);
            let f = thin_svd(&a).unwrap();
            for k in 1..m {
                assert!(f.sigma[k - 1] >= f.sigma[k] - 1e-13);
                assert!(f.sigma[k] >= 0.0);
            }
            let orth_v = (f.v.transpose() * &f.v - DMatrix::<f64>::identity(n, n)).norm();
            assert!(orth_v < 1e-12 * n as f64, "v orthogonality defect {orth_v}");
            let orth_u = (f.u.transpose() * &f.u - DMatrix::<f64>::identity(m, m)).norm();
            assert!(orth_u < 1e-12 * m as f64);
            let rec = assemble_from_svd(&f.u, &f.sigma, &f.v);
            let rel = (&rec - &a).norm() / (1.0 + a.norm());
            assert!(rel < 1e-10, "reconstruction error {rel}");
        }
    }

    #[test]
    fn svd_handles_rank_deficiency() {
        // rank-1 2x4 matrix: one zero singular value, completion still sound
        let mut r = rng(29);
        let col = random_matrix(&mut r, 2, 1);
        let row = random_matrix(&mut r, 1, 4);
        let a = &col * &row;
        let f = thin_svd(&a).unwrap();
        assert!(f.sigma[1].abs() < 1e-12 * (1.0 + a.norm()));
        let orth_v = (f.v.transpose() * &f.v - DMatrix::<f64>::identity(4, 4)).norm();
        assert!(orth_v < 1e-11);
        let rec = assemble_from_svd(&f.u, &f.sigma, &f.v);
        assert!((rec - &a).norm() < 1e-11 * (1.0 + a.norm()));
    }

    #[test]
    fn pair_arithmetic() {
        let w = PairPoint::new(
            AmbientPoint::vector_from(&[1.0, 0.0]),
            AmbientPoint::vector_from(&[0.0, 2.0]),
        );
        assert_eq!(w.dim(), 4);
        assert!((w.norm() - 5.0_f64.sqrt()).abs() < 1e-15);
        let flat = w.to_flat();
        assert_eq!(flat.as_slice(), &[1.0, 0.0, 0.0, 2.0]);
        let back = w.from_flat_like(&flat);
        assert!(back.sub(&w).norm() < 1e-15);
    }
}
