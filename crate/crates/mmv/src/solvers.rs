//! Recovery algorithms.
//!
//! Rank-blind baselines select on q-norm correlations with the measurements
//! or the residual ([`q_thresholding`], [`somp`]). The rank-aware family
//! replaces the measurements by an orthonormal basis of their range before
//! correlating, which is invariant to how the channels mix the sources:
//! [`ra_thresholding`] (MUSIC in the full-rank case), [`ra_omp`] and
//! [`ra_ormp`]. The combinatorial searches [`exhaustive_oracle`] and
//! [`reduced_rank_search`] serve as ground-truth references on desk-scale
//! problems.
//!
//! Conventions shared by every solver:
//! - argmax ties break toward the lowest atom index;
//! - already-selected atoms are excluded from later selections;
//! - iteration stops after `k` selections or once the residual drops below
//!   `1e-10 * ||Y||_F` in Frobenius norm.

use nalgebra::DMatrix;

use crate::conditions::music_criterion_matrix;
use crate::numerics::{self, orthonormal_range_basis};
use crate::problem::Dictionary;
use crate::{Error, Result, DEFAULT_REL_TOL};

/// Relative Frobenius threshold for declaring the residual zero.
pub const EARLY_STOP_REL: f64 = 1e-10;

/// Projected atoms with norm at or below this are treated as lying in the
/// span of the selected atoms (RA-ORMP exclusion rule).
pub const ATOM_EXCLUSION_TOL: f64 = 1e-10;

/// Membership threshold for "this atom lies in the subspace" row counts.
pub const SUBSPACE_MEMBERSHIP_TOL: f64 = 1e-8;

/// Guard on combinatorial support enumerations.
pub const ENUMERATION_GUARD: u64 = 2_000_000;

/// Row-norm choice for the rank-blind selections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QNorm {
    One,
    Two,
    Inf,
}

impl QNorm {
    fn row_norm(self, mat: &DMatrix<f64>, row: usize) -> f64 {
        let r = mat.row(row);
        match self {
            QNorm::One => r.iter().map(|x| x.abs()).sum(),
            QNorm::Two => r.norm(),
            QNorm::Inf => r.iter().map(|x| x.abs()).fold(0.0, f64::max),
        }
    }
}

impl std::fmt::Display for QNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QNorm::One => write!(f, "1"),
            QNorm::Two => write!(f, "2"),
            QNorm::Inf => write!(f, "inf"),
        }
    }
}

/// Algorithm tag carried by results and benchmark rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    QThresholding,
    Somp,
    RaThresholding,
    RaOmp,
    RaOrmp,
    ExhaustiveOracle,
    ReducedRankSearch,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::QThresholding,
        Algorithm::Somp,
        Algorithm::RaThresholding,
        Algorithm::RaOmp,
        Algorithm::RaOrmp,
        Algorithm::ExhaustiveOracle,
        Algorithm::ReducedRankSearch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::QThresholding => "q-thresh",
            Algorithm::Somp => "somp",
            Algorithm::RaThresholding => "ra-thresh",
            Algorithm::RaOmp => "ra-omp",
            Algorithm::RaOrmp => "ra-ormp",
            Algorithm::ExhaustiveOracle => "oracle",
            Algorithm::ReducedRankSearch => "rr-search",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::param(format!(
                    "unknown algorithm {s:?}; expected one of {}",
                    Algorithm::ALL.map(|a| a.name()).join(", ")
                ))
            })
    }
}

/// Outcome quality marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultFlag {
    /// Normal completion.
    Clean,
    /// The selected atoms were rank deficient; coefficients are zero.
    Unrecoverable,
    /// RA-ORMP ran out of atoms outside the selected span before reaching
    /// the requested sparsity.
    SpanExhausted,
}

/// Per-iteration record: which atom was taken, the rank of the residual
/// after the update, and the selection criterion over all atoms.
#[derive(Debug, Clone)]
pub struct IterationDiag {
    pub step: usize,
    pub selected_atom: usize,
    pub residual_rank: usize,
    pub criterion_values: Option<Vec<f64>>,
}

/// Estimated support and coefficients, with per-iteration diagnostics.
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    support: Vec<usize>,
    coefficients: DMatrix<f64>,
    iterations: Vec<IterationDiag>,
    algorithm: Algorithm,
    q_norm: Option<QNorm>,
    flag: ResultFlag,
}

impl RecoveryResult {
    /// Estimated support, sorted ascending.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Estimated coefficient matrix (`n x l`; rows outside the support are
    /// zero).
    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    pub fn iterations(&self) -> &[IterationDiag] {
        &self.iterations
    }

    /// Atom indices in the order they were selected.
    pub fn selection_order(&self) -> Vec<usize> {
        self.iterations.iter().map(|d| d.selected_atom).collect()
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    /// Norm tag of the selection criterion; `None` for the rank-aware
    /// methods, whose criterion is basis-invariant by construction.
    pub fn q_norm(&self) -> Option<QNorm> {
        self.q_norm
    }

    pub fn flag(&self) -> ResultFlag {
        self.flag
    }

    pub fn is_clean(&self) -> bool {
        self.flag == ResultFlag::Clean
    }
}

fn validate_selection_count(phi: &Dictionary, k: usize) -> Result<()> {
    let m = phi.measurement_dim();
    let n = phi.atom_count();
    if k == 0 || k > m || k > n {
        return Err(Error::param(format!(
            "selection count k = {k} must satisfy 1 <= k <= min(m, n) = {}",
            m.min(n)
        )));
    }
    Ok(())
}

fn check_measurement_shape(phi: &Dictionary, y: &DMatrix<f64>) -> Result<()> {
    if y.nrows() != phi.measurement_dim() {
        return Err(Error::dim(format!(
            "measurements have {} rows but the dictionary maps into dimension {}",
            y.nrows(),
            phi.measurement_dim()
        )));
    }
    Ok(())
}

/// `k` largest values, ties toward the lower index, returned sorted.
fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// `k` smallest values among eligible indices, ties toward the lower index.
fn bottom_k_indices(values: &[f64], k: usize, eligible: &[bool]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| eligible[i]).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Index of the strictly largest eligible value (first one wins ties).
fn argmax_eligible(values: &[f64], eligible: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if !eligible(i) {
            continue;
        }
        match best {
            Some(b) if values[b] >= v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// q-norm correlations `||phi_i^T R||_q` for every atom.
fn q_correlations(phi: &Dictionary, r: &DMatrix<f64>, q: QNorm) -> Vec<f64> {
    let corr = phi.entries().tr_mul(r); // n x l
    (0..corr.nrows()).map(|i| q.row_norm(&corr, i)).collect()
}

/// Residual rank for the diagnostics: a residual that already counts as
/// zero against the measurement scale has rank zero, anything else is
/// judged by its own singular values.
fn diag_residual_rank(residual: &DMatrix<f64>, y_norm: f64, rel_tol: f64) -> usize {
    if residual.norm() <= EARLY_STOP_REL * y_norm {
        0
    } else {
        numerics::numerical_rank(residual, rel_tol)
    }
}

/// Least-squares coefficients on `support`, scattered into an `n x l`
/// matrix.
fn solve_on_support(
    phi: &Dictionary,
    y: &DMatrix<f64>,
    support: &[usize],
) -> Result<DMatrix<f64>> {
    let sub = phi.columns(support);
    let pinv = numerics::pseudo_inverse(&sub)?;
    let block = pinv * y; // k x l
    let mut full = DMatrix::zeros(phi.atom_count(), y.ncols());
    for (row, &idx) in support.iter().enumerate() {
        full.row_mut(idx).copy_from(&block.row(row));
    }
    Ok(full)
}

fn finish(
    phi: &Dictionary,
    y: &DMatrix<f64>,
    mut selected: Vec<usize>,
    iterations: Vec<IterationDiag>,
    algorithm: Algorithm,
    q_norm: Option<QNorm>,
) -> RecoveryResult {
    selected.sort_unstable();
    match solve_on_support(phi, y, &selected) {
        Ok(coefficients) => RecoveryResult {
            support: selected,
            coefficients,
            iterations,
            algorithm,
            q_norm,
            flag: ResultFlag::Clean,
        },
        Err(_) => RecoveryResult {
            support: selected,
            coefficients: DMatrix::zeros(phi.atom_count(), y.ncols()),
            iterations,
            algorithm,
            q_norm,
            flag: ResultFlag::Unrecoverable,
        },
    }
}

/// One-shot selection of the `k` atoms with the largest q-correlation with
/// the measurements, followed by an orthogonal coefficient fit.
pub fn q_thresholding(
    phi: &Dictionary,
    y: &DMatrix<f64>,
    k: usize,
    q: QNorm,
) -> Result<RecoveryResult> {
    validate_selection_count(phi, k)?;
    check_measurement_shape(phi, y)?;
    let criteria = q_correlations(phi, y, q);
    let support = top_k_indices(&criteria, k);
    let top_atom = argmax_eligible(&criteria, |_| true).expect("nonempty criteria");
    let mut result = finish(phi, y, support, Vec::new(), Algorithm::QThresholding, Some(q));
    let residual = y - phi.entries() * &result.coefficients;
    result.iterations.push(IterationDiag {
        step: 1,
        selected_atom: top_atom,
        residual_rank: diag_residual_rank(&residual, y.norm(), DEFAULT_REL_TOL),
        criterion_values: Some(criteria),
    });
    Ok(result)
}

/// Simultaneous Orthogonal Matching Pursuit: greedy selection on q-norm
/// correlations with the residual, orthogonal refit, residual update.
pub fn somp(phi: &Dictionary, y: &DMatrix<f64>, k: usize, q: QNorm) -> Result<RecoveryResult> {
    validate_selection_count(phi, k)?;
    check_measurement_shape(phi, y)?;
    let y_norm = y.norm();
    let mut residual = y.clone();
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut iterations: Vec<IterationDiag> = Vec::with_capacity(k);

    for step in 1..=k {
        if residual.norm() <= EARLY_STOP_REL * y_norm {
            break;
        }
        let criteria = q_correlations(phi, &residual, q);
        let Some(atom) = argmax_eligible(&criteria, |i| !selected.contains(&i)) else {
            break;
        };
        selected.push(atom);
        match solve_on_support(phi, y, &selected) {
            Ok(coefficients) => {
                residual = y - phi.entries() * &coefficients;
            }
            Err(_) => {
                let mut result =
                    finish(phi, y, selected, iterations, Algorithm::Somp, Some(q));
                result.flag = ResultFlag::Unrecoverable;
                result.coefficients.fill(0.0);
                return Ok(result);
            }
        }
        iterations.push(IterationDiag {
            step,
            selected_atom: atom,
            residual_rank: diag_residual_rank(&residual, y_norm, DEFAULT_REL_TOL),
            criterion_values: Some(criteria),
        });
    }
    Ok(finish(phi, y, selected, iterations, Algorithm::Somp, Some(q)))
}

/// Rank-aware thresholding: select the `k` atoms best aligned with an
/// orthonormal basis of the measurement range. Identical to MUSIC when the
/// measurements have full rank `k`.
pub fn ra_thresholding(
    phi: &Dictionary,
    y: &DMatrix<f64>,
    k: usize,
    rel_tol: f64,
) -> Result<RecoveryResult> {
    validate_selection_count(phi, k)?;
    check_measurement_shape(phi, y)?;
    let basis = orthonormal_range_basis(y, rel_tol)?;
    let criteria = basis.correlation_norms(phi.entries());
    let support = top_k_indices(&criteria, k);
    let top_atom = argmax_eligible(&criteria, |_| true).expect("nonempty criteria");
    let mut result = finish(phi, y, support, Vec::new(), Algorithm::RaThresholding, None);
    let residual = y - phi.entries() * &result.coefficients;
    result.iterations.push(IterationDiag {
        step: 1,
        selected_atom: top_atom,
        residual_rank: diag_residual_rank(&residual, y.norm(), rel_tol),
        criterion_values: Some(criteria),
    });
    Ok(result)
}

/// SOMP with the rank-aware selection step: correlations are taken against
/// an orthonormal basis of the residual's range instead of the residual
/// itself.
///
/// The diagnostics record the residual rank after every step; on full-rank
/// problems with correct selections it drops by one per iteration while the
/// residual stays `k`-joint-sparse, which is exactly the rank degeneration
/// that keeps this method short of full rank awareness.
pub fn ra_omp(
    phi: &Dictionary,
    y: &DMatrix<f64>,
    k: usize,
    rel_tol: f64,
) -> Result<RecoveryResult> {
    validate_selection_count(phi, k)?;
    check_measurement_shape(phi, y)?;
    let y_norm = y.norm();
    let mut residual = y.clone();
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut iterations: Vec<IterationDiag> = Vec::with_capacity(k);

    for step in 1..=k {
        if residual.norm() <= EARLY_STOP_REL * y_norm {
            break;
        }
        let basis = orthonormal_range_basis(&residual, rel_tol)?;
        let criteria = basis.correlation_norms(phi.entries());
        let Some(atom) = argmax_eligible(&criteria, |i| !selected.contains(&i)) else {
            break;
        };
        selected.push(atom);
        match solve_on_support(phi, y, &selected) {
            Ok(coefficients) => {
                residual = y - phi.entries() * &coefficients;
            }
            Err(_) => {
                let mut result = finish(phi, y, selected, iterations, Algorithm::RaOmp, None);
                result.flag = ResultFlag::Unrecoverable;
                result.coefficients.fill(0.0);
                return Ok(result);
            }
        }
        iterations.push(IterationDiag {
            step,
            selected_atom: atom,
            residual_rank: diag_residual_rank(&residual, y_norm, rel_tol),
            criterion_values: Some(criteria),
        });
    }
    Ok(finish(phi, y, selected, iterations, Algorithm::RaOmp, None))
}

/// Rank-aware order recursive matching pursuit.
///
/// Each step projects the measurements and the remaining atoms orthogonal
/// to the selected atoms, renormalizes the projected atoms, and selects on
/// their alignment with the residual's range basis. Projections are
/// maintained by Gram-Schmidt updates rather than explicit projectors.
pub fn ra_ormp(
    phi: &Dictionary,
    y: &DMatrix<f64>,
    k: usize,
    rel_tol: f64,
) -> Result<RecoveryResult> {
    validate_selection_count(phi, k)?;
    check_measurement_shape(phi, y)?;
    let n = phi.atom_count();
    let y_norm = y.norm();
    let mut residual = y.clone();
    // Atoms projected off the span of the selected set, and their norms.
    let mut projected = phi.entries().clone();
    let mut norms: Vec<f64> = (0..n).map(|i| projected.column(i).norm()).collect();
    // Orthonormal basis of the selected atoms, grown one column per step.
    let mut gs_basis: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(k);
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut iterations: Vec<IterationDiag> = Vec::with_capacity(k);
    let mut flag = ResultFlag::Clean;

    for step in 1..=k {
        if residual.norm() <= EARLY_STOP_REL * y_norm {
            break;
        }
        let basis = orthonormal_range_basis(&residual, rel_tol)?;
        let coeffs = basis.columns.tr_mul(&projected); // r x n
        let criteria: Vec<f64> = (0..n)
            .map(|i| {
                if norms[i] > ATOM_EXCLUSION_TOL {
                    coeffs.column(i).norm() / norms[i]
                } else {
                    0.0
                }
            })
            .collect();
        let eligible =
            |i: usize| !selected.contains(&i) && norms[i] > ATOM_EXCLUSION_TOL;
        let Some(atom) = argmax_eligible(&criteria, eligible) else {
            flag = ResultFlag::SpanExhausted;
            break;
        };
        selected.push(atom);

        // Extend the Gram-Schmidt basis with the projected direction of the
        // selected atom, with one re-orthogonalization pass for stability.
        let mut direction = projected.column(atom).into_owned();
        for b in &gs_basis {
            let c = b.dot(&direction);
            direction -= b * c;
        }
        let norm = direction.norm();
        if norm <= ATOM_EXCLUSION_TOL {
            flag = ResultFlag::SpanExhausted;
            selected.pop();
            break;
        }
        direction /= norm;

        // Deflate the residual and the remaining atoms.
        let res_coeff = direction.tr_mul(&residual); // 1 x l
        residual -= &direction * res_coeff;
        let atom_coeff = direction.tr_mul(&projected); // 1 x n
        projected -= &direction * atom_coeff;
        for i in 0..n {
            norms[i] = projected.column(i).norm();
        }
        gs_basis.push(direction);

        iterations.push(IterationDiag {
            step,
            selected_atom: atom,
            residual_rank: diag_residual_rank(&residual, y_norm, rel_tol),
            criterion_values: Some(criteria),
        });
    }

    let mut result = finish(phi, y, selected, iterations, Algorithm::RaOrmp, None);
    if flag != ResultFlag::Clean && result.flag == ResultFlag::Clean {
        result.flag = flag;
    }
    Ok(result)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u128::from(ENUMERATION_GUARD) * 1024 {
            return acc; // already hopeless, avoid overflow on big inputs
        }
    }
    acc
}

/// Lexicographic enumeration of all size-`k` subsets of `0..n`.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    if k == 0 || k > n {
        if k == 0 {
            f(&idx);
        }
        return;
    }
    loop {
        f(&idx);
        // Advance to the next combination.
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
        }
        if idx[i] == i + n - k {
            return;
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Global combinatorial search: the support of size `k` whose column span
/// explains the measurements with the smallest Frobenius residual.
///
/// Rank-deficient supports are skipped; exact ties keep the
/// lexicographically smallest support. Guarded to `C(n, k) <= 2e6`.
pub fn exhaustive_oracle(phi: &Dictionary, y: &DMatrix<f64>, k: usize) -> Result<RecoveryResult> {
    check_measurement_shape(phi, y)?;
    let n = phi.atom_count();
    if k == 0 || k > n {
        return Err(Error::param(format!(
            "oracle sparsity k = {k} must satisfy 1 <= k <= n = {n}"
        )));
    }
    if binomial(n, k) > u128::from(ENUMERATION_GUARD) {
        return Err(Error::EnumerationGuard {
            n,
            k,
            guard: ENUMERATION_GUARD,
        });
    }
    let tie_tol = 1e-12 * y.norm();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for_each_combination(n, k, |support| {
        let sub = phi.columns(support);
        let Ok(basis) = orthonormal_range_basis(&sub, DEFAULT_REL_TOL) else {
            return;
        };
        if basis.rank < k {
            return; // dependent columns
        }
        let coeffs = basis.columns.tr_mul(y);
        let projected = &basis.columns * coeffs;
        let residual_norm = (y - projected).norm();
        if best
            .as_ref()
            .map_or(true, |(_, b)| residual_norm < b - tie_tol)
        {
            best = Some((support.to_vec(), residual_norm));
        }
    });
    let Some((support, _)) = best else {
        return Ok(RecoveryResult {
            support: Vec::new(),
            coefficients: DMatrix::zeros(n, y.ncols()),
            iterations: Vec::new(),
            algorithm: Algorithm::ExhaustiveOracle,
            q_norm: None,
            flag: ResultFlag::Unrecoverable,
        });
    };
    Ok(finish(
        phi,
        y,
        support,
        Vec::new(),
        Algorithm::ExhaustiveOracle,
        None,
    ))
}

/// Reduced-rank combinatorial search.
///
/// With `tau = rank(Y)`, only the `k - tau` support atoms that escape the
/// range of `Y` have to be searched: each candidate set `gamma` is scored by
/// how many atoms stay outside the span of `[Phi_gamma, Y]`, and the winner
/// is completed to `k` atoms through the MUSIC criterion against that
/// augmented span. Equivalent to [`ra_thresholding`] when `tau = k`.
pub fn reduced_rank_search(
    phi: &Dictionary,
    y: &DMatrix<f64>,
    k: usize,
    rel_tol: f64,
) -> Result<RecoveryResult> {
    validate_selection_count(phi, k)?;
    check_measurement_shape(phi, y)?;
    let n = phi.atom_count();
    let m = phi.measurement_dim();
    let y_basis = orthonormal_range_basis(y, rel_tol)?;
    let tau = y_basis.rank;
    if tau > k {
        return Err(Error::RankExceedsSparsity { rank: tau, k });
    }
    let gamma_size = k - tau;
    if binomial(n, gamma_size) > u128::from(ENUMERATION_GUARD) {
        return Err(Error::EnumerationGuard {
            n,
            k: gamma_size,
            guard: ENUMERATION_GUARD,
        });
    }

    // Score every candidate gamma by the number of atoms left outside the
    // span of [Phi_gamma, Y]; fewer escapes means the augmented span eats
    // more of the dictionary, which is only possible on the true support.
    let mut best: Option<(Vec<usize>, usize)> = None;
    for_each_combination(n, gamma_size, |gamma| {
        let mut augmented = DMatrix::zeros(m, gamma.len() + y.ncols());
        for (c, &idx) in gamma.iter().enumerate() {
            augmented.column_mut(c).copy_from(&phi.entries().column(idx));
        }
        augmented
            .columns_mut(gamma.len(), y.ncols())
            .copy_from(y);
        let Ok(q) = orthonormal_range_basis(&augmented, rel_tol) else {
            return;
        };
        let crit = music_criterion_matrix(phi.entries(), &q);
        let escapes = (0..n)
            .filter(|&j| !gamma.contains(&j) && crit[j] > SUBSPACE_MEMBERSHIP_TOL)
            .count();
        if best.as_ref().map_or(true, |(_, b)| escapes < *b) {
            best = Some((gamma.to_vec(), escapes));
        }
    });
    let (gamma, _) = best.expect("at least one gamma candidate");

    // Full-rank completion against the augmented span.
    let mut augmented = DMatrix::zeros(m, gamma.len() + y.ncols());
    for (c, &idx) in gamma.iter().enumerate() {
        augmented.column_mut(c).copy_from(&phi.entries().column(idx));
    }
    augmented.columns_mut(gamma.len(), y.ncols()).copy_from(y);
    let q = orthonormal_range_basis(&augmented, rel_tol)?;
    let crit = music_criterion_matrix(phi.entries(), &q);
    let eligible: Vec<bool> = (0..n).map(|j| !gamma.contains(&j)).collect();
    let completion = bottom_k_indices(&crit, k - gamma.len(), &eligible);
    let completion_lead = completion.first().copied();

    let mut support = gamma;
    support.extend(completion);
    support.sort_unstable();

    let mut result = finish(
        phi,
        y,
        support,
        Vec::new(),
        Algorithm::ReducedRankSearch,
        None,
    );
    let residual = y - phi.entries() * &result.coefficients;
    result.iterations.push(IterationDiag {
        step: 1,
        selected_atom: completion_lead.unwrap_or_else(|| result.support[0]),
        residual_rank: diag_residual_rank(&residual, y.norm(), rel_tol),
        criterion_values: Some(crit),
    });
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
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

    fn spanning_fixture() -> Dictionary {
        let s = 1.0 / 3.0_f64.sqrt();
        Dictionary::fixture(DMatrix::from_columns(&[
            DVector::from_vec(vec![1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0, 0.0]),
            DVector::from_vec(vec![0.0, 0.0, 1.0]),
            DVector::from_vec(vec![s, s, s]),
        ]))
        .unwrap()
    }

    #[test]
    fn thresholding_picks_strongest_correlation() {
        let phi = plane_fixture();
        let y = DMatrix::from_columns(&[DVector::from_vec(vec![1.0, 0.0])]);
        let result = q_thresholding(&phi, &y, 1, QNorm::Two).unwrap();
        assert_eq!(result.support(), &[0]);
        let crit = result.iterations()[0].criterion_values.as_ref().unwrap();
        assert_abs_diff_eq!(crit[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(crit[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(crit[2], 1.0 / 2.0_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn thresholding_exact_on_orthonormal_dictionary() {
        let phi = Dictionary::fixture(DMatrix::<f64>::identity(4, 4)).unwrap();
        let mut x = DMatrix::zeros(4, 2);
        x[(1, 0)] = 2.0;
        x[(3, 1)] = -1.5;
        let y = phi.entries() * &x;
        let result = q_thresholding(&phi, &y, 2, QNorm::Two).unwrap();
        assert_eq!(result.support(), &[1, 3]);
        assert!((result.coefficients() - &x).amax() <= 1e-12);
    }

    #[test]
    fn somp_defeated_by_plane_fixture() {
        // Correlations of the defeating direction are (1, 1, sqrt(2)): the
        // non-support atom is taken first for every q.
        let phi = plane_fixture();
        let x = DVector::from_vec(vec![1.0, 1.0, 0.0]);
        let y_col = phi.entries() * x;
        let y = DMatrix::from_columns(&[y_col]);
        for q in [QNorm::One, QNorm::Two, QNorm::Inf] {
            let result = somp(&phi, &y, 2, q).unwrap();
            assert_eq!(result.selection_order()[0], 2);
        }
    }

    #[test]
    fn somp_recovers_orthogonal_instance() {
        let phi = Dictionary::fixture(DMatrix::<f64>::identity(5, 5)).unwrap();
        let mut x = DMatrix::zeros(5, 3);
        x[(0, 0)] = 1.0;
        x[(4, 1)] = -2.0;
        x[(4, 2)] = 0.5;
        let y = phi.entries() * &x;
        let result = somp(&phi, &y, 2, QNorm::Two).unwrap();
        assert_eq!(result.support(), &[0, 4]);
        assert!((result.coefficients() - &x).amax() <= 1e-12);
    }

    #[test]
    fn ra_thresholding_on_spanning_fixture() {
        let phi = spanning_fixture();
        let y = DMatrix::from_columns(&[
            DVector::from_vec(vec![1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0, 0.0]),
        ]);
        let result = ra_thresholding(&phi, &y, 2, 1e-10).unwrap();
        assert_eq!(result.support(), &[0, 1]);
        let crit = result.iterations()[0].criterion_values.as_ref().unwrap();
        assert_abs_diff_eq!(crit[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(crit[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(crit[2], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(crit[3], (2.0_f64 / 3.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn ra_ormp_stops_on_zero_residual() {
        // Any two atoms of the plane fixture already explain the
        // measurement exactly, so the pursuit stops early.
        let phi = plane_fixture();
        let y = DMatrix::from_columns(&[DVector::from_vec(vec![0.3, -0.7])]);
        let result = ra_ormp(&phi, &y, 2, 1e-10).unwrap();
        assert!(result.support().len() <= 2);
        let reconstructed = phi.entries() * result.coefficients();
        assert!((reconstructed - y).amax() <= 1e-10);
    }

    #[test]
    fn oracle_degenerate_full_support() {
        let phi = Dictionary::fixture(DMatrix::<f64>::identity(3, 3)).unwrap();
        let y = DMatrix::from_columns(&[DVector::from_vec(vec![1.0, 2.0, 3.0])]);
        let result = exhaustive_oracle(&phi, &y, 3).unwrap();
        assert_eq!(result.support(), &[0, 1, 2]);
    }

    #[test]
    fn oracle_guard_trips() {
        let phi = crate::problem::gen_dictionary(
            8,
            64,
            &mut crate::problem::derive_stream(1, &[]),
        )
        .unwrap();
        let y = DMatrix::zeros(8, 1);
        assert!(matches!(
            exhaustive_oracle(&phi, &y, 8),
            Err(Error::EnumerationGuard { .. })
        ));
    }

    #[test]
    fn algorithm_names_round_trip() {
        for algo in Algorithm::ALL {
            assert_eq!(algo.name().parse::<Algorithm>().unwrap(), algo);
        }
        assert!("bogus".parse::<Algorithm>().is_err());
    }
}
