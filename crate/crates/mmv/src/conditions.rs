//! Identifiability and recovery-condition diagnostics: the exact recovery
//! condition (ERC), spark-based uniqueness bounds, and the MUSIC criterion.

use nalgebra::DMatrix;

use crate::numerics::{self, SubspaceBasis};
use crate::problem::Dictionary;
use crate::Result;

/// Verdict of the spark/rank uniqueness bound for a given sparsity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniquenessReport {
    pub spark_value: usize,
    pub rank_used: usize,
    /// `(spark - 1 + rank) / 2`; sparse solutions are unique iff `k` is
    /// strictly below this.
    pub bound: f64,
    pub k: usize,
    pub unique: bool,
}

/// Exact recovery condition value `max_{j not in omega} ||pinv(Phi_omega) phi_j||_1`.
///
/// A value strictly below one certifies that SOMP recovers every signal
/// supported on `omega`, for any norm choice.
pub fn erc(phi: &Dictionary, omega: &[usize]) -> Result<f64> {
    let pinv = numerics::pseudo_inverse(&phi.columns(omega))?;
    let coeffs = pinv * phi.entries(); // k x n, column j = pinv(Phi_omega) phi_j
    let mut worst = 0.0_f64;
    for j in 0..phi.atom_count() {
        if omega.contains(&j) {
            continue;
        }
        let l1 = coeffs.column(j).iter().map(|c| c.abs()).sum();
        worst = worst.max(l1);
    }
    Ok(worst)
}

/// Uniqueness verdict from the spark of the dictionary and the rank of the
/// signal (or of the measurements: the two coincide whenever
/// `k < spark - 1`, since the support submatrix is then full rank).
///
/// The spark is an argument rather than computed here so large-dictionary
/// flows can pass the probability-one value `m + 1` without a brute-force
/// search.
pub fn uniqueness_report(spark_value: usize, rank: usize, k: usize) -> UniquenessReport {
    let bound = (spark_value as f64 - 1.0 + rank as f64) / 2.0;
    UniquenessReport {
        spark_value,
        rank_used: rank,
        bound,
        k,
        unique: 2 * k < spark_value - 1 + rank,
    }
}

/// MUSIC criterion `||(I - U U^T) phi_i||_2` for every atom.
///
/// Atoms inside the signal subspace score (numerically) zero; in the
/// identifiable full-rank regime those are exactly the support atoms. The
/// residual is formed explicitly so on-support values stay at working
/// precision instead of losing half the digits to cancellation.
pub fn music_criterion(phi: &Dictionary, basis: &SubspaceBasis) -> Vec<f64> {
    music_criterion_matrix(phi.entries(), basis)
}

/// [`music_criterion`] over the columns of a plain matrix.
pub fn music_criterion_matrix(atoms: &DMatrix<f64>, basis: &SubspaceBasis) -> Vec<f64> {
    let coeffs = basis.columns.tr_mul(atoms); // r x n
    let reconstructed = &basis.columns * &coeffs;
    (0..atoms.ncols())
        .map(|j| (atoms.column(j) - reconstructed.column(j)).norm())
        .collect()
}

/// Atoms whose MUSIC criterion is below `tol`, i.e. the atoms lying in the
/// span of the basis.
pub fn atoms_in_subspace(phi: &Dictionary, basis: &SubspaceBasis, tol: f64) -> Vec<usize> {
    music_criterion(phi, basis)
        .iter()
        .enumerate()
        .filter(|(_, &c)| c <= tol)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::orthonormal_range_basis;
    use crate::problem::Dictionary;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};

    fn plane_fixture() -> Dictionary {
        let s = 1.0 / 2.0_f64.sqrt();
        Dictionary::fixture(DMatrix::from_columns(&[
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0]),
            DVector::from_vec(vec![s, s]),
        ]))
        .unwrap()
    }

    #[test]
    fn erc_of_plane_fixture_is_sqrt_two() {
        let phi = plane_fixture();
        let value = erc(&phi, &[0, 1]).unwrap();
        assert_abs_diff_eq!(value, 2.0_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn erc_zero_when_complement_is_orthogonal() {
        // Phi_omega = [e1, e2], remaining atoms e3, e4 in a 4-dim space.
        let eye = DMatrix::<f64>::identity(4, 4);
        let phi = Dictionary::fixture(eye).unwrap();
        assert_abs_diff_eq!(erc(&phi, &[0, 1]).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn uniqueness_bound_cases() {
        // SMV case: spark 5, rank 1, k = 2 -> 4 < 5.
        assert!(uniqueness_report(5, 1, 2).unique);
        // Full-spark full-rank edge: m = 32, spark 33.
        assert!(uniqueness_report(33, 31, 31).unique);
        assert!(!uniqueness_report(33, 32, 32).unique);
        // Non-unique regime used by the counterexample construction.
        assert!(!uniqueness_report(5, 3, 4).unique);
    }

    #[test]
    fn uniqueness_bound_matches_flag() {
        for spark in 2..10 {
            for rank in 1..6 {
                for k in rank..8 {
                    let report = uniqueness_report(spark, rank, k);
                    assert_eq!(report.unique, (report.k as f64) < report.bound);
                }
            }
        }
    }

    #[test]
    fn music_criterion_on_line_fixture() {
        let s = 1.0 / 3.0_f64.sqrt();
        let phi = Dictionary::fixture(DMatrix::from_columns(&[
            DVector::from_vec(vec![1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0, 0.0]),
            DVector::from_vec(vec![0.0, 0.0, 1.0]),
            DVector::from_vec(vec![s, s, s]),
        ]))
        .unwrap();
        let y = DMatrix::from_columns(&[
            DVector::from_vec(vec![1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0, 0.0]),
        ]);
        let basis = orthonormal_range_basis(&y, 1e-10).unwrap();
        let crit = music_criterion(&phi, &basis);
        assert_abs_diff_eq!(crit[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(crit[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(crit[2], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(crit[3], (1.0_f64 / 3.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn music_criterion_vanishes_for_full_basis() {
        let s = 1.0 / 2.0_f64.sqrt();
        let phi = plane_fixture();
        let y = DMatrix::from_columns(&[
            DVector::from_vec(vec![1.0, 1.0]),
            DVector::from_vec(vec![s, -s]),
        ]);
        let basis = orthonormal_range_basis(&y, 1e-10).unwrap();
        assert_eq!(basis.rank, 2);
        for c in music_criterion(&phi, &basis) {
            assert!(c <= 1e-12);
        }
    }
}
