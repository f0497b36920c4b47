//! Dense linear-algebra primitives: range-space bases, strict pseudo-inverses
//! and brute-force spark.
//!
//! Everything here works on plain `DMatrix<f64>` so the rest of the crate can
//! stay agnostic about where a matrix came from. Rank decisions use a
//! relative singular-value cutoff (`rel_tol * sigma_max`); the crate default
//! is [`crate::DEFAULT_REL_TOL`].

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::{Error, Result, DEFAULT_REL_TOL};

/// Brute-force spark is capped at this many atoms.
pub const SPARK_SIZE_GUARD: usize = 20;

/// SVD computed by one-sided Jacobi rotations on the columns.
///
/// For an `m x l` input, `sigma` holds `l` singular values sorted
/// descending, `u` is `m x l` and `v` is `l x l`. Columns of `u` paired
/// with a zero singular value are zero (the left direction is undefined
/// there); `v` is always a complete orthonormal set because it accumulates
/// exact plane rotations, so for wide inputs it includes the null space.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub sigma: Vec<f64>,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

/// One-sided Jacobi SVD.
///
/// Chosen over a bidiagonalization SVD because the Jacobi iteration keeps
/// the singular vectors orthogonal to machine precision and resolves tiny
/// singular values with high relative accuracy; the subspace methods in
/// this crate select atoms on exactly those vectors, so their quality is
/// what the recovery guarantees stand on. Cost is a few `O(m l^2)` sweeps,
/// which is fine at the matrix sizes this crate works with. Very tall
/// inputs are first reduced by a Householder QR.
pub fn jacobi_svd(a: &DMatrix<f64>) -> SvdFactors {
    let (m, l) = a.shape();
    if m > 2 * l {
        // A = Q R with orthonormal Q, then rotate the small factor.
        let qr = a.clone().qr();
        let q = qr.q();
        let f = jacobi_rotate(&qr.r());
        return SvdFactors {
            sigma: f.sigma,
            u: q * f.u,
            v: f.v,
        };
    }
    jacobi_rotate(a)
}

fn jacobi_rotate(a: &DMatrix<f64>) -> SvdFactors {
    const MAX_SWEEPS: usize = 64;
    let (m, l) = a.shape();
    let mut work = a.clone();
    let mut v = DMatrix::<f64>::identity(l, l);
    let tol = 2.0 * f64::EPSILON;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..l {
            for j in (i + 1)..l {
                let (mut aa, mut bb, mut d) = (0.0, 0.0, 0.0);
                for r in 0..m {
                    let wi = work[(r, i)];
                    let wj = work[(r, j)];
                    aa += wi * wi;
                    bb += wj * wj;
                    d += wi * wj;
                }
                if d == 0.0 || d.abs() <= tol * (aa * bb).sqrt() {
                    continue;
                }
                rotated = true;
                // Rotation angle that diagonalizes the 2x2 Gram block.
                let zeta = (bb - aa) / (2.0 * d);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..m {
                    let wi = work[(r, i)];
                    let wj = work[(r, j)];
                    work[(r, i)] = c * wi - s * wj;
                    work[(r, j)] = s * wi + c * wj;
                }
                for r in 0..l {
                    let vi = v[(r, i)];
                    let vj = v[(r, j)];
                    v[(r, i)] = c * vi - s * vj;
                    v[(r, j)] = s * vi + c * vj;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..l).collect();
    let norms: Vec<f64> = (0..l).map(|j| work.column(j).norm()).collect();
    order.sort_by(|&p, &q| norms[q].partial_cmp(&norms[p]).unwrap().then(p.cmp(&q)));

    let mut sigma = Vec::with_capacity(l);
    let mut u = DMatrix::<f64>::zeros(m, l);
    let mut v_sorted = DMatrix::<f64>::zeros(l, l);
    for (dst, &src) in order.iter().enumerate() {
        let norm = norms[src];
        sigma.push(norm);
        if norm > 0.0 {
            u.column_mut(dst).copy_from(&(work.column(src) / norm));
        }
        v_sorted.column_mut(dst).copy_from(&v.column(src));
    }
    SvdFactors {
        sigma,
        u,
        v: v_sorted,
    }
}

/// Singular values of `m`, descending.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    jacobi_svd(m).sigma
}

/// Orthonormal basis of a range space, together with the rank decision that
/// produced it.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    /// `m x r` matrix with orthonormal columns spanning the numerical range.
    pub columns: DMatrix<f64>,
    /// Number of retained directions (`= columns.ncols()`).
    pub rank: usize,
    /// Relative singular-value cutoff that was applied.
    pub tolerance: f64,
}

impl SubspaceBasis {
    /// Ambient dimension of the subspace.
    pub fn ambient_dim(&self) -> usize {
        self.columns.nrows()
    }

    /// Projection of `v` onto the orthogonal complement: `(I - U U^T) v`.
    pub fn project_off(&self, v: &DVector<f64>) -> DVector<f64> {
        let coeffs = self.columns.tr_mul(v);
        v - &self.columns * coeffs
    }

    /// `|| phi_i^T U ||_2` for every column `phi_i` of `mat`.
    ///
    /// Invariant to the choice of orthonormal basis for the same range, which
    /// is why the rank-aware solvers select on this quantity.
    pub fn correlation_norms(&self, mat: &DMatrix<f64>) -> Vec<f64> {
        let coeffs = self.columns.tr_mul(mat); // r x n
        (0..coeffs.ncols()).map(|j| coeffs.column(j).norm()).collect()
    }
}

/// Orthonormal basis for the numerical range of `m`, keeping singular
/// directions with `sigma_i > rel_tol * sigma_1`.
///
/// Columns are ordered by decreasing singular value.
pub fn orthonormal_range_basis(m: &DMatrix<f64>, rel_tol: f64) -> Result<SubspaceBasis> {
    if !(0.0..1.0).contains(&rel_tol) {
        return Err(Error::param(format!(
            "rel_tol must lie in [0, 1), got {rel_tol}"
        )));
    }
    let f = jacobi_svd(m);
    let sigma_max = f.sigma[0];
    if sigma_max == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let threshold = rel_tol * sigma_max;
    let rank = f.sigma.iter().take_while(|&&s| s > threshold).count();
    let columns = f.u.columns(0, rank).into_owned();
    Ok(SubspaceBasis {
        columns,
        rank,
        tolerance: rel_tol,
    })
}

/// Pseudo-inverse of a full-column-rank matrix, via SVD.
///
/// This is deliberately not the general Moore-Penrose case: a rank-deficient
/// request is a bug somewhere upstream and fails loudly.
pub fn pseudo_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    pseudo_inverse_with_tol(a, DEFAULT_REL_TOL)
}

/// [`pseudo_inverse`] with an explicit rank-decision cutoff.
pub fn pseudo_inverse_with_tol(a: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let (m, s) = a.shape();
    if s > m {
        return Err(Error::RankDeficientPseudoInverse);
    }
    let f = jacobi_svd(a);
    let sigma_max = f.sigma[0];
    if sigma_max == 0.0 || f.sigma.iter().any(|&x| x <= rel_tol * sigma_max) {
        return Err(Error::RankDeficientPseudoInverse);
    }
    // A^+ = V diag(1/sigma) U^T
    let mut v_scaled = f.v; // s x s
    for (j, &sig) in f.sigma.iter().enumerate() {
        v_scaled.column_mut(j).scale_mut(1.0 / sig);
    }
    Ok(v_scaled * f.u.transpose())
}

/// Least-squares coefficients `A^+ B` for full-column-rank `A`.
pub fn solve_least_squares(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(pseudo_inverse(a)? * b)
}

/// Number of singular values exceeding `rel_tol * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sigma = singular_values(m);
    let sigma_max = sigma[0];
    if sigma_max == 0.0 {
        return 0;
    }
    sigma.iter().take_while(|&&x| x > rel_tol * sigma_max).count()
}

/// Smallest number of linearly dependent columns of `phi`, by exhaustive
/// search over subsets of increasing size.
///
/// Returns `n + 1` when no subset of any size is dependent (only possible for
/// matrices with at most `m` columns). Guarded to `n <= 20` atoms because the
/// search is combinatorial.
pub fn spark(phi: &DMatrix<f64>) -> Result<usize> {
    let (m, n) = phi.shape();
    if n > SPARK_SIZE_GUARD {
        return Err(Error::SparkSizeGuard {
            n,
            guard: SPARK_SIZE_GUARD,
        });
    }
    if n == 0 {
        return Err(Error::param("spark of an empty matrix"));
    }
    // Any m+1 columns in R^m are dependent, so the search never has to go
    // beyond subsets of that size.
    let s_max = n.min(m + 1);
    for s in 2..=s_max {
        for subset in (0..n).combinations(s) {
            let sub = phi.select_columns(subset.iter());
            if numerical_rank(&sub, DEFAULT_REL_TOL) < s {
                return Ok(s);
            }
        }
    }
    Ok(n + 1)
}

/// First dependent column subset of minimal size, with a unit-norm null
/// vector of that subset.
///
/// The null vector is the right singular vector of the smallest singular
/// value, which is deterministic and numerically stable. Returns `None` when
/// all column subsets are independent.
pub fn smallest_dependent_subset(phi: &DMatrix<f64>) -> Result<Option<(Vec<usize>, DVector<f64>)>> {
    let (m, n) = phi.shape();
    if n > SPARK_SIZE_GUARD {
        return Err(Error::SparkSizeGuard {
            n,
            guard: SPARK_SIZE_GUARD,
        });
    }
    let s_max = n.min(m + 1);
    for s in 2..=s_max {
        for subset in (0..n).combinations(s) {
            let sub = phi.select_columns(subset.iter());
            if numerical_rank(&sub, DEFAULT_REL_TOL) < s {
                let null = min_right_singular_vector(&sub);
                return Ok(Some((subset, null)));
            }
        }
    }
    Ok(None)
}

/// Unit-norm right singular vector for the smallest singular value of `a`.
///
/// Valid for wide matrices too: the accumulated rotation matrix spans the
/// full coefficient space, so null directions are available.
pub fn min_right_singular_vector(a: &DMatrix<f64>) -> DVector<f64> {
    let f = jacobi_svd(a);
    f.v.column(f.sigma.len() - 1).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    /// Independent rank oracle: Gaussian elimination with partial pivoting on
    /// the Gram matrix, counting pivots above an absolute floor.
    fn gram_rank(m: &DMatrix<f64>) -> usize {
        let mut g = m.tr_mul(m);
        let n = g.nrows();
        let scale = (0..n).map(|i| g[(i, i)]).fold(0.0_f64, f64::max);
        if scale == 0.0 {
            return 0;
        }
        let tol = 1e-12 * scale;
        let mut rank = 0;
        for col in 0..n {
            let mut pivot = rank;
            for r in rank..n {
                if g[(r, col)].abs() > g[(pivot, col)].abs() {
                    pivot = r;
                }
            }
            if g[(pivot, col)].abs() <= tol {
                continue;
            }
            g.swap_rows(rank, pivot);
            for r in (rank + 1)..n {
                let f = g[(r, col)] / g[(rank, col)];
                for c in col..n {
                    g[(r, c)] -= f * g[(rank, c)];
                }
            }
            rank += 1;
            if rank == n {
                break;
            }
        }
        rank
    }

    #[test]
    fn single_column_basis() {
        let y = DVector::from_vec(vec![3.0, 0.0, 4.0]);
        let m = DMatrix::from_columns(&[y.clone()]);
        let basis = orthonormal_range_basis(&m, 1e-10).unwrap();
        assert_eq!(basis.rank, 1);
        let expected = &y / y.norm();
        for i in 0..3 {
            assert_abs_diff_eq!(basis.columns[(i, 0)].abs(), expected[i].abs(), epsilon = 1e-12);
        }
    }

    #[test]
    fn collinear_columns_have_rank_one() {
        let y = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let m = DMatrix::from_columns(&[y.clone(), 2.0 * &y]);
        let basis = orthonormal_range_basis(&m, 1e-10).unwrap();
        assert_eq!(basis.rank, 1);
    }

    #[test]
    fn outer_product_rank_matches_gram_oracle() {
        // M = A B^T with A 8x3 and B 5x3 has rank 3 with probability one.
        let a = gaussian(8, 3, 101);
        let b = gaussian(5, 3, 102);
        let m = &a * b.transpose();
        assert_eq!(gram_rank(&m), 3);
        let basis = orthonormal_range_basis(&m, 1e-10).unwrap();
        assert_eq!(basis.rank, 3);
        // Columns of M are reproduced by the basis.
        let sigma_max = singular_values(&m)[0];
        for j in 0..m.ncols() {
            let residual = basis.project_off(&m.column(j).into_owned());
            assert!(residual.norm() <= 1e-10 * sigma_max * (m.ncols() as f64).sqrt());
        }
    }

    #[test]
    fn zero_matrix_is_rejected() {
        let m = DMatrix::zeros(4, 2);
        let err = orthonormal_range_basis(&m, 1e-10).unwrap_err();
        assert!(err.to_string().contains("zero matrix has no range basis"));
    }

    #[test]
    fn basis_is_orthonormal() {
        let m = gaussian(10, 6, 103);
        let basis = orthonormal_range_basis(&m, 1e-10).unwrap();
        let gram = basis.columns.tr_mul(&basis.columns);
        let eye = DMatrix::<f64>::identity(basis.rank, basis.rank);
        assert!((gram - eye).amax() <= 1e-10);
    }

    #[test]
    fn pseudo_inverse_of_identity() {
        let eye = DMatrix::<f64>::identity(3, 3);
        let pinv = pseudo_inverse(&eye).unwrap();
        assert!((pinv - DMatrix::<f64>::identity(3, 3)).amax() <= 1e-12);
    }

    #[test]
    fn pseudo_inverse_of_orthonormal_columns_is_transpose() {
        let m = gaussian(6, 3, 104);
        let q = orthonormal_range_basis(&m, 1e-10).unwrap().columns;
        let pinv = pseudo_inverse(&q).unwrap();
        assert!((&pinv - q.transpose()).amax() <= 1e-10);
    }

    #[test]
    fn pseudo_inverse_matches_normal_equations() {
        let a = gaussian(6, 3, 105);
        let pinv = pseudo_inverse(&a).unwrap();
        assert!((&pinv * &a - DMatrix::<f64>::identity(3, 3)).amax() <= 1e-8);
        assert!((&a * &pinv * &a - &a).amax() <= 1e-8);
        // Independent route: (A^T A)^{-1} A^T.
        let gram = a.tr_mul(&a);
        let inv = gram.try_inverse().unwrap();
        let oracle = inv * a.transpose();
        assert!((pinv - oracle).amax() <= 1e-8);
    }

    #[test]
    fn pseudo_inverse_rejects_rank_deficient() {
        let a = gaussian(6, 2, 106);
        let mut wide = DMatrix::zeros(6, 3);
        wide.column_mut(0).copy_from(&a.column(0));
        wide.column_mut(1).copy_from(&a.column(1));
        let dependent = a.column(0) - 2.0 * a.column(1);
        wide.column_mut(2).copy_from(&dependent);
        assert!(matches!(
            pseudo_inverse(&wide),
            Err(Error::RankDeficientPseudoInverse)
        ));
        // More columns than rows is rank deficient by shape.
        let fat = gaussian(2, 4, 107);
        assert!(matches!(
            pseudo_inverse(&fat),
            Err(Error::RankDeficientPseudoInverse)
        ));
    }

    #[test]
    fn spark_of_plane_fixture() {
        let s = 1.0 / 2.0_f64.sqrt();
        let phi = DMatrix::from_columns(&[
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0]),
            DVector::from_vec(vec![s, s]),
        ]);
        assert_eq!(spark(&phi).unwrap(), 3);
    }

    #[test]
    fn spark_of_identity_uses_convention() {
        let eye = DMatrix::<f64>::identity(2, 2);
        assert_eq!(spark(&eye).unwrap(), 3);
    }

    #[test]
    fn spark_of_gaussian_4x8() {
        let mut phi = gaussian(4, 8, 108);
        for mut col in phi.column_iter_mut() {
            let norm = col.norm();
            col /= norm;
        }
        assert_eq!(spark(&phi).unwrap(), 5);
    }

    #[test]
    fn spark_guard_trips() {
        let phi = gaussian(4, 21, 109);
        assert!(matches!(spark(&phi), Err(Error::SparkSizeGuard { .. })));
    }

    #[test]
    fn dependent_subset_null_vector() {
        let mut phi = gaussian(4, 8, 110);
        for mut col in phi.column_iter_mut() {
            let norm = col.norm();
            col /= norm;
        }
        let (subset, null) = smallest_dependent_subset(&phi).unwrap().unwrap();
        assert_eq!(subset.len(), spark(&phi).unwrap());
        let sub = phi.select_columns(subset.iter());
        assert!((sub * &null).norm() <= 1e-9);
        assert_abs_diff_eq!(null.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn projector_is_idempotent() {
        let m = gaussian(9, 4, 111);
        let basis = orthonormal_range_basis(&m, 1e-10).unwrap();
        let u = &basis.columns;
        let p = DMatrix::<f64>::identity(9, 9) - u * u.transpose();
        assert!((&p * &p - &p).amax() <= 1e-9);
    }

    #[test]
    fn svd_reconstructs_and_stays_orthogonal() {
        for (rows, cols, seed) in [(6, 9, 21), (9, 6, 22), (16, 8, 23), (30, 5, 24)] {
            let a = gaussian(rows, cols, seed);
            let f = jacobi_svd(&a);
            let p = rows.min(cols);
            let mut reconstructed = DMatrix::<f64>::zeros(rows, cols);
            for j in 0..cols.min(f.sigma.len()) {
                if f.sigma[j] > 0.0 {
                    reconstructed += f.sigma[j] * f.u.column(j) * f.v.column(j).transpose();
                }
            }
            assert!((reconstructed - &a).amax() <= 1e-12, "reconstruction {rows}x{cols}");
            let ut_u = f.u.columns(0, p).tr_mul(&f.u.columns(0, p));
            assert!((ut_u - DMatrix::<f64>::identity(p, p)).amax() <= 1e-13);
            let vt_v = f.v.tr_mul(&f.v);
            assert!((vt_v - DMatrix::<f64>::identity(cols, cols)).amax() <= 1e-13);
            for w in f.sigma.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn basis_of_rank_one_residual_is_accurate() {
        // A projection residual of a rank-one matrix: the extracted basis
        // direction must diagonalize it to working precision. (A general
        // bidiagonalization SVD was observed returning a principal vector
        // several degrees off on exactly this shape.)
        let u_true = {
            let v = gaussian(16, 1, 31).column(0).into_owned();
            &v / v.norm()
        };
        let row = gaussian(8, 1, 32).column(0).transpose();
        let r = &u_true * row; // 16 x 8, rank 1
        let basis = orthonormal_range_basis(&r, 1e-10).unwrap();
        assert_eq!(basis.rank, 1);
        let alignment = basis.columns.column(0).dot(&u_true).abs();
        assert!(
            alignment >= 1.0 - 1e-12,
            "principal direction misaligned: {alignment}"
        );
        // Perturb at noise level and require the same quality.
        let noisy = &r + gaussian(16, 8, 33) * 1e-15;
        let basis = orthonormal_range_basis(&noisy, 1e-10).unwrap();
        assert_eq!(basis.rank, 1);
        let alignment = basis.columns.column(0).dot(&u_true).abs();
        assert!(alignment >= 1.0 - 1e-10);
    }
}
