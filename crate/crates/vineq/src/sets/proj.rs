//! Exact Euclidean projections onto the supported sets.
//!
//! The workhorse is the projection onto the epigraph of the ℓ∞ norm,
//! `C = {(t, x) : t ≥ ‖x‖∞}`: sort `|zᵢ|` in decreasing order, find the
//! unique truncation level
//!
//! ```text
//! t(k) = max( (z₀ + Σ_{i≤k} |z_π(i)|) / (k+1), 0 ),
//! k* the unique k with |z_π(k)| > t(k) ≥ |z_π(k+1)| ,
//! ```
//!
//! and clip the k* largest magnitudes to t(k*).  The operator-norm epigraph
//! projection reuses this on the singular values; the nuclear epigraph uses
//! the Moreau identity.  Polyhedra are projected by active-set enumeration at
//! oracle scale (m ≤ 16) and by an accelerated dual ascent above that.

use nalgebra::{DMatrix, DVector};

use super::SetError;

/// Result of the ℓ∞-epigraph coordinate projection.
pub(crate) struct LinfProjection {
    pub t: f64,
    pub x: DVector<f64>,
    /// Number of coordinates clipped to the common level `t`.
    pub k_star: usize,
}

/// Project `(z_o, z)` onto `{(t, x) : t ≥ ‖x‖∞}` by the sorted truncation
/// formula.  Runs in O(n log n).
pub(crate) fn project_linf_coords(z_o: f64, z: &DVector<f64>) -> LinfProjection {
    let n = z.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| z[j].abs().partial_cmp(&z[i].abs()).unwrap());

    // k* is the first k with t(k) >= |z_(k)| (sentinel at k = n); the
    // matching strict condition |z_(k-1)| > t(k) then holds automatically,
    // so stopping on the lower test alone is robust against rounding ties.
    let mut prefix = z_o;
    let mut level = z_o.max(0.0);
    let mut k_star = 0usize;
    for k in 0..=n {
        if k > 0 {
            prefix += z[order[k - 1]].abs();
        }
        let t_k = (prefix / ((k + 1) as f64)).max(0.0);
        if k == n || t_k >= z[order[k]].abs() {
            level = t_k;
            k_star = k;
            break;
        }
    }

    let mut x = z.clone();
    for &i in order.iter().take(k_star) {
        x[i] = level * z[i].signum();
    }
    LinfProjection { t: level, x, k_star }
}

/// Projection onto `{x : Ax ≥ b}` by active-set enumeration (`m ≤ 16`).
///
/// For each subset ℐ of rows, project onto the affine set `A_ℐ x = b_ℐ`
/// (least-squares multipliers through an SVD, so rank-deficient subsets are
/// harmless), keep the feasible candidates, and return the closest.  The true
/// projection appears as the candidate of its own active set, so the minimum
/// over feasible candidates is exact.
pub(crate) fn project_polyhedron_enum(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    z: &DVector<f64>,
) -> DVector<f64> {
    let m = a.nrows();
    let n = a.ncols();
    assert!(m <= 16, "active-set enumeration is capped at 16 rows");
    let feas_slack = 1e-9 * (1.0 + z.norm() + b.amax());

    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1u32 << m) {
        let rows: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
        if rows.len() > n {
            continue;
        }
        let x = if rows.is_empty() {
            z.clone()
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
            z + asub.transpose() * lambda
        };
        let margins = a * &x - b;
        if margins.min() < -feas_slack {
            continue;
        }
        let dist = (&x - z).norm();
        if best.as_ref().map_or(true, |(d, _)| dist < *d) {
            best = Some((dist, x));
        }
    }
    best.expect("feasible polyhedron yielded no feasible candidate").1
}

/// Accelerated projected dual ascent for polyhedral projection when the row
/// count exceeds the enumeration cap.  Maximizes the dual
/// `q(λ) = −½ λᵀAAᵀλ + λᵀ(b − Az)` over `λ ≥ 0`; the primal is
/// `x = z + Aᵀλ`.
pub(crate) fn project_polyhedron_dual(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    z: &DVector<f64>,
) -> Result<DVector<f64>, SetError> {
    let m = a.nrows();
    let gram = a * a.transpose();

    // Largest eigenvalue of the Gram matrix by power iteration.
    let mut pv = DVector::from_element(m, 1.0 / (m as f64).sqrt());
    let mut lip = 1.0;
    for _ in 0..200 {
        let w = &gram * &pv;
        let nw = w.norm();
        if nw == 0.0 {
            break;
        }
        lip = nw;
        pv = w / nw;
    }
    let step = 1.0 / (1.01 * lip.max(1e-30));

    let lin = b - a * z;
    let scale = 1.0 + z.norm() + b.amax();
    let tol = 1e-10 * scale;

    let mut lambda = DVector::zeros(m);
    let mut y = lambda.clone();
    let mut theta: f64 = 1.0;
    for iter in 0..50_000usize {
        let grad = &lin - &gram * &y;
        let mut next = &y + step * grad;
        next.iter_mut().for_each(|v| *v = v.max(0.0));
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        y = &next + ((theta - 1.0) / theta_next) * (&next - &lambda);
        lambda = next;
        theta = theta_next;

        if iter % 50 == 49 {
            let x = z + a.transpose() * &lambda;
            let margins = a * &x - b;
            let violation = (-margins.min()).max(0.0);
            let comp = (0..m)
                .map(|i| (lambda[i] * margins[i]).abs())
                .fold(0.0, f64::max)
                / (1.0 + lambda.norm());
            if violation <= tol && comp <= tol {
                return Ok(x);
            }
        }
    }
    let x = z + a.transpose() * &lambda;
    let res = (-(a * &x - b).min()).max(0.0);
    Err(SetError::OracleFallbackNotConverged { residual: res, iters: 50_000 })
}

/// Closed-form projection onto the 3-dimensional second-order cone
/// `{(t, x) : t ≥ ‖x‖₂}`.  Returns the projected point and a region code:
/// 0 = interior/identity, 1 = boundary clip, 2 = polar (maps to zero).
pub(crate) fn project_soc3(v: &DVector<f64>) -> (DVector<f64>, u8) {
    assert_eq!(v.len(), 3, "second-order cone points live in R^3");
    let t = v[0];
    let r = (v[1] * v[1] + v[2] * v[2]).sqrt();
    if t >= r {
        (v.clone(), 0)
    } else if t <= -r {
        (DVector::zeros(3), 2)
    } else {
        // Here r > 0 since t < r and t > -r.
        let s = 0.5 * (t + r);
        (DVector::from_vec(vec![s, s * v[1] / r, s * v[2] / r]), 1)
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

    #[test]
    fn linf_truncation_examples() {
        let p = project_linf_coords(0.0, &DVector::from_vec(vec![2.0, 0.5]));
        assert_eq!(p.k_star, 1);
        assert!((p.t - 1.0).abs() < 1e-15);
        assert!((p.x[0] - 1.0).abs() < 1e-15 && (p.x[1] - 0.5).abs() < 1e-15);

        let p = project_linf_coords(-3.0, &DVector::from_vec(vec![1.0, 1.0]));
        assert_eq!(p.k_star, 2);
        assert!(p.t == 0.0 && p.x.norm() == 0.0);

        // Interior point is untouched.
        let p = project_linf_coords(2.0, &DVector::from_vec(vec![1.0, -0.5]));
        assert_eq!(p.k_star, 0);
        assert!((p.t - 2.0).abs() < 1e-15);
    }

    #[test]
    fn linf_matches_variational_characterization() {
        // (p - z) ⊥-inequality against random feasible points.
        let mut r = rng(7);
        for _ in 0..200 {
            let n = 1 + r.random_range(0..6usize);
            let z_o = 4.0 * r.random::<f64>() - 2.0;
            let z = DVector::from_fn(n, |_, _| 4.0 * r.random::<f64>() - 2.0);
            let p = project_linf_coords(z_o, &z);
            assert!(p.t >= p.x.amax() - 1e-12);
            for _ in 0..20 {
                let yx = DVector::from_fn(n, |_, _| 2.0 * r.random::<f64>() - 1.0);
                let yt = yx.amax() + r.random::<f64>();
                let ip = (yt - p.t) * (z_o - p.t)
                    + (0..n).map(|i| (yx[i] - p.x[i]) * (z[i] - p.x[i])).sum::<f64>();
                assert!(ip <= 1e-10, "optimality violated: {ip}");
            }
        }
    }

    #[test]
    fn polyhedron_enum_box() {
        // Unit box [0,1]^2 as {x ≥ 0, −x ≥ −1}.
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]);
        let b = DVector::from_vec(vec![0.0, 0.0, -1.0, -1.0]);
        let x = project_polyhedron_enum(&a, &b, &DVector::from_vec(vec![2.0, -0.5]));
        assert!((x[0] - 1.0).abs() < 1e-12 && x[1].abs() < 1e-12);
        let inside = DVector::from_vec(vec![0.25, 0.75]);
        let x = project_polyhedron_enum(&a, &b, &inside);
        assert!((&x - &inside).norm() < 1e-12);
    }

    #[test]
    fn dual_fallback_agrees_with_enumeration() {
        let mut r = rng(11);
        for _ in 0..25 {
            let n = 2 + r.random_range(0..3usize);
            let m = 3 + r.random_range(0..6usize);
            let a = DMatrix::from_fn(m, n, |_, _| 2.0 * r.random::<f64>() - 1.0);
            // Keep the origin strictly feasible so the polyhedron is nonempty.
            let b = DVector::from_fn(m, |_, _| -0.2 - r.random::<f64>());
            let z = DVector::from_fn(n, |_, _| 4.0 * r.random::<f64>() - 2.0);
            let xe = project_polyhedron_enum(&a, &b, &z);
            let xd = project_polyhedron_dual(&a, &b, &z).unwrap();
            assert!(
                (&xe - &xd).norm() <= 1e-7 * (1.0 + z.norm()),
                "enum/dual mismatch {:.3e}",
                (&xe - &xd).norm()
            );
        }
    }

    #[test]
    fn soc_projection_regions() {
        let (p, c) = project_soc3(&DVector::from_vec(vec![2.0, 1.0, 0.0]));
        assert_eq!(c, 0);
        assert!((p[0] - 2.0).abs() < 1e-15);

        let (p, c) = project_soc3(&DVector::from_vec(vec![-3.0, 1.0, 0.0]));
        assert_eq!(c, 2);
        assert!(p.norm() == 0.0);

        let (p, c) = project_soc3(&DVector::from_vec(vec![0.0, 1.0, 0.0]));
        assert_eq!(c, 1);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }
}
