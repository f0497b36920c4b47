//! Problem instances: dictionaries, jointly sparse signals, measurements,
//! seeded generators and the adversarial constructions.
//!
//! Generators draw from explicit RNG streams so that a `(master_seed, tags)`
//! pair always reproduces the same instance, independent of execution order
//! or thread count. Streams are derived with [`derive_stream`].

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numerics;
use crate::solvers::RecoveryResult;
use crate::{Error, Result, DEFAULT_REL_TOL};

/// Measurement operator: an `m x n` matrix with unit-norm columns.
#[derive(Debug, Clone)]
pub struct Dictionary {
    entries: DMatrix<f64>,
    fixture: bool,
}

impl Dictionary {
    const UNIT_NORM_TOL: f64 = 1e-10;

    /// Compressive dictionary (`m < n`).
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let (m, n) = entries.shape();
        if m >= n {
            return Err(Error::param(format!(
                "dictionary must be underdetermined (m = {m}, n = {n}); use Dictionary::fixture for test matrices"
            )));
        }
        Self::with_fixture_flag(entries, false)
    }

    /// Non-compressive test fixture; unit-norm columns are still required.
    pub fn fixture(entries: DMatrix<f64>) -> Result<Self> {
        Self::with_fixture_flag(entries, true)
    }

    fn with_fixture_flag(entries: DMatrix<f64>, fixture: bool) -> Result<Self> {
        for (j, col) in entries.column_iter().enumerate() {
            if (col.norm() - 1.0).abs() > Self::UNIT_NORM_TOL {
                return Err(Error::param(format!(
                    "dictionary column {j} has norm {} (must be unit)",
                    col.norm()
                )));
            }
        }
        Ok(Self { entries, fixture })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Measurements per channel.
    pub fn measurement_dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Number of atoms.
    pub fn atom_count(&self) -> usize {
        self.entries.ncols()
    }

    pub fn is_fixture(&self) -> bool {
        self.fixture
    }

    /// Column submatrix for the given atom indices.
    pub fn columns(&self, support: &[usize]) -> DMatrix<f64> {
        self.entries.select_columns(support.iter())
    }

    /// Atom `i` as an owned vector.
    pub fn atom(&self, i: usize) -> DVector<f64> {
        self.entries.column(i).into_owned()
    }

    /// Brute-force spark of the dictionary (guarded to small atom counts).
    pub fn spark(&self) -> Result<usize> {
        numerics::spark(&self.entries)
    }
}

/// A row-sparse coefficient matrix with its support, sparsity budget and
/// numerical rank.
#[derive(Debug, Clone)]
pub struct JointSparseSignal {
    entries: DMatrix<f64>,
    support: Vec<usize>,
    sparsity: usize,
    rank: usize,
}

impl JointSparseSignal {
    /// Wraps an `n x l` matrix, computing its exact row support and numerical
    /// rank. Fails when more than `sparsity` rows are nonzero.
    ///
    /// The all-zero matrix is permitted (empty support, rank 0) so that
    /// degenerate measurement tests can express it; generators always produce
    /// rank >= 1.
    pub fn new(entries: DMatrix<f64>, sparsity: usize) -> Result<Self> {
        let support = row_support(&entries, 0.0);
        if support.len() > sparsity {
            return Err(Error::param(format!(
                "{} nonzero rows exceed sparsity budget {}",
                support.len(),
                sparsity
            )));
        }
        let rank = numerics::numerical_rank(&entries, DEFAULT_REL_TOL);
        Ok(Self {
            entries,
            support,
            sparsity,
            rank,
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Exact row support (sorted).
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Sparsity budget `k` (`|support| <= k`).
    pub fn sparsity(&self) -> usize {
        self.sparsity
    }

    /// Numerical rank of the coefficient matrix.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Number of channels `l`.
    pub fn channels(&self) -> usize {
        self.entries.ncols()
    }
}

/// Noiseless measurements `Y = Phi * X`.
#[derive(Debug, Clone)]
pub struct Measurements {
    entries: DMatrix<f64>,
}

impl Measurements {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn channels(&self) -> usize {
        self.entries.ncols()
    }
}

/// Parameters of a single Monte Carlo trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialConfig {
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub k: usize,
    pub tau: usize,
    pub master_seed: u64,
    pub trial_index: u64,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.l == 0 || self.k == 0 || self.tau == 0 {
            return Err(Error::param("trial dimensions must be positive"));
        }
        if self.tau > self.k.min(self.l) {
            return Err(Error::param(format!(
                "tau {} exceeds min(k, l) = {}",
                self.tau,
                self.k.min(self.l)
            )));
        }
        if self.k > self.n || self.m > self.n {
            return Err(Error::param("k and m must not exceed n"));
        }
        Ok(())
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic RNG substream for `(master_seed, tags...)`.
///
/// Used to give every trial (and every retry) its own stream, so results do
/// not depend on execution order or the degree of parallelism.
pub fn derive_stream(master_seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut state = master_seed;
    let mut seed = splitmix64(&mut state);
    for &tag in tags {
        state ^= tag.wrapping_mul(0xd6e8_feb8_6659_fd93);
        seed ^= splitmix64(&mut state);
    }
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian dictionary: i.i.d. standard normal entries, columns scaled to
/// unit norm.
pub fn gen_dictionary<R: Rng>(m: usize, n: usize, rng: &mut R) -> Result<Dictionary> {
    if m == 0 || n == 0 {
        return Err(Error::param("dictionary dimensions must be positive"));
    }
    let mut entries = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    for mut col in entries.column_iter_mut() {
        let norm = col.norm();
        col /= norm;
    }
    Dictionary::with_fixture_flag(entries, m >= n)
}

/// Random `k`-joint-sparse signal with prescribed rank.
///
/// The support is a uniform `k`-subset. With `tau = min(k, l)` the nonzero
/// block is i.i.d. standard normal (full rank with probability one);
/// otherwise the block is an outer product `A B^T` of standard normal
/// factors, which has rank `tau` with probability one. The realized
/// numerical rank is asserted and a failed draw (a probability-zero event)
/// returns [`Error::DegenerateRandomDraw`] so the caller can retry on the
/// next substream.
pub fn gen_signal<R: Rng>(
    n: usize,
    l: usize,
    k: usize,
    tau: usize,
    rng: &mut R,
) -> Result<JointSparseSignal> {
    if k == 0 || k > n {
        return Err(Error::param(format!("sparsity k = {k} must satisfy 1 <= k <= n = {n}")));
    }
    if tau == 0 || tau > k.min(l) {
        return Err(Error::param(format!(
            "rank tau = {tau} must satisfy 1 <= tau <= min(k, l) = {}",
            k.min(l)
        )));
    }
    let mut support: Vec<usize> = rand::seq::index::sample(rng, n, k).into_vec();
    support.sort_unstable();

    let block = if tau == k.min(l) {
        DMatrix::from_fn(k, l, |_, _| rng.sample::<f64, _>(StandardNormal))
    } else {
        let a = DMatrix::from_fn(k, tau, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = DMatrix::from_fn(l, tau, |_, _| rng.sample::<f64, _>(StandardNormal));
        a * b.transpose()
    };

    let mut entries = DMatrix::zeros(n, l);
    for (row, &idx) in support.iter().enumerate() {
        entries.row_mut(idx).copy_from(&block.row(row));
    }
    let signal = JointSparseSignal::new(entries, k)?;
    if signal.rank() != tau {
        return Err(Error::DegenerateRandomDraw);
    }
    Ok(signal)
}

/// Exact noiseless measurement `Y = Phi * X`.
pub fn measure(phi: &Dictionary, x: &JointSparseSignal) -> Result<Measurements> {
    if phi.atom_count() != x.entries().nrows() {
        return Err(Error::dim(format!(
            "dictionary has {} atoms but signal has {} rows",
            phi.atom_count(),
            x.entries().nrows()
        )));
    }
    Ok(Measurements {
        entries: phi.entries() * x.entries(),
    })
}

/// Indices of rows whose l2 norm exceeds `tol`.
///
/// With `tol = 0` this is the exact row support; its size equals the
/// `l_{0,q}` row-counting norm for every `q`.
pub fn row_support(x: &DMatrix<f64>, tol: f64) -> Vec<usize> {
    (0..x.nrows()).filter(|&i| x.row(i).norm() > tol).collect()
}

/// Output of [`construct_nonunique_pair`]: two distinct `k`-joint-sparse
/// signals with identical measurements, plus the dependent index set used.
#[derive(Debug, Clone)]
pub struct NonUniquePair {
    /// Signal of rank `tau` built on the dependent set.
    pub x: JointSparseSignal,
    /// The alternative explanation of the same measurements.
    pub x_alt: JointSparseSignal,
    /// The index set `T` with `|T| = 2k - tau + 1` carrying a null vector.
    pub support_t: Vec<usize>,
}

/// Constructs two distinct `k`-joint-sparse signals `X != X'` with
/// `Phi X = Phi X'` and `rank(X) = tau`, witnessing that recovery cannot be
/// unique once `2k >= spark(Phi) - 1 + tau`.
///
/// A dependent index set `T` of size `2k - tau + 1` and a unit null vector
/// `v` of `Phi_T` are found first; `X` stacks the leading rows of the
/// replicated null vector, a `tau - 1` identity block and zeros, and the
/// alternative subtracts the replicated null vector from `X` on `T`.
///
/// `spark_hint` skips the brute-force spark search when the caller already
/// knows the value (e.g. `m + 1` for Gaussian dictionaries).
pub fn construct_nonunique_pair(
    phi: &Dictionary,
    k: usize,
    tau: usize,
    l: usize,
    spark_hint: Option<usize>,
) -> Result<NonUniquePair> {
    let (m, n) = phi.entries().shape();
    if tau == 0 || tau > k.min(l) {
        return Err(Error::param(format!(
            "tau = {tau} must satisfy 1 <= tau <= min(k, l) = {}",
            k.min(l)
        )));
    }
    let spark_value = match spark_hint {
        Some(s) => s,
        None => phi.spark()?,
    };
    if 2 * k < spark_value - 1 + tau {
        return Err(Error::UniquenessRegime);
    }
    let t_size = 2 * k - tau + 1;
    if t_size > n {
        return Err(Error::param(format!(
            "need {t_size} atoms for the dependent set but the dictionary has {n}"
        )));
    }

    // A dependent subset of size <= t_size together with a null vector. Any
    // m + 1 columns are dependent, which avoids the brute-force search for
    // large dictionaries.
    let (subset, null) = if t_size >= m + 1 {
        let subset: Vec<usize> = (0..t_size).collect();
        let sub = phi.columns(&subset);
        let null = numerics::min_right_singular_vector(&sub);
        (subset, null)
    } else {
        match numerics::smallest_dependent_subset(phi.entries())? {
            Some(pair) => pair,
            None => return Err(Error::UniquenessRegime),
        }
    };

    // Extend to exactly t_size indices; the null vector is zero on the
    // extension.
    let mut t: Vec<usize> = subset.clone();
    let mut v: Vec<f64> = null.iter().cloned().collect();
    for idx in 0..n {
        if t.len() == t_size {
            break;
        }
        if !subset.contains(&idx) {
            t.push(idx);
            v.push(0.0);
        }
    }

    // Put the largest-magnitude null entry first so the leading block of the
    // construction is guaranteed nonzero, keep the rest sorted.
    let lead = (0..t.len())
        .max_by(|&a, &b| v[a].abs().partial_cmp(&v[b].abs()).unwrap())
        .expect("nonempty T");
    let lead_idx = t[lead];
    let lead_val = v[lead];
    let mut rest: Vec<(usize, f64)> = t
        .iter()
        .zip(&v)
        .filter(|(&idx, _)| idx != lead_idx)
        .map(|(&idx, &val)| (idx, val))
        .collect();
    rest.sort_by_key(|&(idx, _)| idx);
    let ordered: Vec<(usize, f64)> = std::iter::once((lead_idx, lead_val)).chain(rest).collect();

    // X rows over T: [v_i * 1^T for the first k-tau+1 | I_{tau-1} 0 | 0].
    let mut x = DMatrix::zeros(n, l);
    let head = k - tau + 1;
    for &(idx, val) in ordered.iter().take(head) {
        x.row_mut(idx).fill(val);
    }
    for j in 0..tau.saturating_sub(1) {
        let (idx, _) = ordered[head + j];
        x[(idx, j)] = 1.0;
    }

    // X' subtracts the replicated null vector on T, shifting the support to
    // the trailing blocks while leaving the measurements unchanged.
    let mut x_alt = x.clone();
    for &(idx, val) in &ordered {
        for c in 0..l {
            x_alt[(idx, c)] -= val;
        }
    }

    let mut support_t: Vec<usize> = ordered.iter().map(|&(idx, _)| idx).collect();
    support_t.sort_unstable();
    Ok(NonUniquePair {
        x: JointSparseSignal::new(x, k)?,
        x_alt: JointSparseSignal::new(x_alt, k)?,
        support_t,
    })
}

/// Rank-`tau` signal supported on `omega` whose measurements make SOMP pick
/// an atom outside `omega` at the first step, for every norm choice
/// `q` in `{1, 2, inf}`.
///
/// Requires the exact recovery condition to fail on `omega`
/// (`max_{j not in omega} ||pinv(Phi_omega) phi_j||_1 > 1`). The base vector
/// maximizes the off-support correlation exactly (its on-support
/// correlations are all +-1), and the rank-raising perturbation is scaled so
/// every off-support margin survives; `slack` in `(0, 1]` is the fraction of
/// the margin the perturbation may consume.
pub fn construct_somp_defeating_instance(
    phi: &Dictionary,
    omega: &[usize],
    tau: usize,
    l: usize,
    slack: f64,
) -> Result<JointSparseSignal> {
    let (_, n) = phi.entries().shape();
    let k = omega.len();
    if k == 0 {
        return Err(Error::param("empty support"));
    }
    if omega.iter().any(|&i| i >= n) {
        return Err(Error::param("support index out of range"));
    }
    if tau == 0 || tau > k.min(l) {
        return Err(Error::param(format!(
            "tau = {tau} must satisfy 1 <= tau <= min(|omega|, l) = {}",
            k.min(l)
        )));
    }
    if !(slack > 0.0 && slack <= 1.0) {
        return Err(Error::param(format!(
            "slack must lie in (0, 1], got {slack}"
        )));
    }

    let phi_omega = phi.columns(omega);
    let pinv = numerics::pseudo_inverse(&phi_omega)?;

    // Worst off-support atom under the exact recovery condition.
    let mut best: Option<(usize, f64, DVector<f64>)> = None;
    for j in 0..n {
        if omega.contains(&j) {
            continue;
        }
        let coeffs = &pinv * phi.atom(j);
        let erc = coeffs.iter().map(|c| c.abs()).sum::<f64>();
        if best.as_ref().map_or(true, |(_, b, _)| erc > *b) {
            best = Some((j, erc, coeffs));
        }
    }
    let (j_star, erc_value, coeffs) = best.ok_or_else(|| Error::param("no off-support atoms"))?;
    if erc_value <= 1.0 {
        return Err(Error::ErcSatisfied);
    }

    // y* = pinv(Phi_omega^T) sgn(pinv(Phi_omega) phi_j*): its correlations
    // with the support atoms are exactly the sign pattern, while phi_j*
    // correlates at the full ERC value.
    let signs = coeffs.map(|c| if c >= 0.0 { 1.0 } else { -1.0 });
    let y_star = pinv.tr_mul(&signs);
    let x_omega = &pinv * &y_star;

    let mut x = DVector::zeros(n);
    for (row, &idx) in omega.iter().enumerate() {
        x[idx] = x_omega[row];
    }

    // Realized first-step margin of the single-vector problem.
    let phi_x = phi.entries() * &x;
    let off_corr = phi.atom(j_star).dot(&phi_x).abs();
    let on_corr = omega
        .iter()
        .map(|&i| phi.atom(i).dot(&phi_x).abs())
        .fold(0.0_f64, f64::max);
    let epsilon = off_corr - on_corr;
    if epsilon <= 0.0 {
        return Err(Error::param(
            "constructed vector has no selection margin (numerically degenerate instance)",
        ));
    }

    // Rank-1 replication of the defeating vector across channels.
    let mut entries = DMatrix::zeros(n, l);
    for c in 0..l {
        entries.column_mut(c).copy_from(&x);
    }

    if tau > 1 {
        // Raise the rank with a small outer-product perturbation on the same
        // support. Deterministic stream so the construction is a pure
        // function of its arguments.
        let mut rng = derive_stream(0x534f_4d50, &[n as u64, k as u64, tau as u64, l as u64]);
        for _attempt in 0..16 {
            let a = DMatrix::from_fn(k, tau - 1, |_, _| rng.sample::<f64, _>(StandardNormal));
            let b = DMatrix::from_fn(l, tau - 1, |_, _| rng.sample::<f64, _>(StandardNormal));
            let block = a * b.transpose();
            let mut perturb = DMatrix::zeros(n, l);
            for (row, &idx) in omega.iter().enumerate() {
                perturb.row_mut(idx).copy_from(&block.row(row));
            }
            // Largest q-correlation of any atom with the measured
            // perturbation, for each q in {1, 2, inf}.
            let measured = phi.entries() * &perturb;
            let corr = phi.entries().tr_mul(&measured);
            let mut scale = f64::INFINITY;
            for &q_exp in &[1.0, 2.0, f64::INFINITY] {
                let max_row = (0..n)
                    .map(|i| row_q_norm(&corr, i, q_exp))
                    .fold(0.0_f64, f64::max);
                let budget = l_power(l, q_exp) * slack * epsilon / 2.0;
                if max_row > 0.0 {
                    scale = scale.min(budget / max_row);
                }
            }
            let candidate = &entries + perturb * scale;
            if numerics::numerical_rank(&candidate, DEFAULT_REL_TOL) == tau {
                return JointSparseSignal::new(candidate, k);
            }
        }
        return Err(Error::DegenerateRandomDraw);
    }

    JointSparseSignal::new(entries, k)
}

fn l_power(l: usize, q: f64) -> f64 {
    if q.is_infinite() {
        1.0
    } else {
        (l as f64).powf(1.0 / q)
    }
}

fn row_q_norm(mat: &DMatrix<f64>, row: usize, q: f64) -> f64 {
    let r = mat.row(row);
    if q.is_infinite() {
        r.iter().map(|x| x.abs()).fold(0.0, f64::max)
    } else if q == 1.0 {
        r.iter().map(|x| x.abs()).sum()
    } else {
        r.norm()
    }
}

/// Randomized search for a size-`k` support on which the exact recovery
/// condition fails (`erc > 1`). Returns the first hit within `budget` draws.
pub fn find_erc_failing_support<R: Rng>(
    phi: &Dictionary,
    k: usize,
    budget: usize,
    rng: &mut R,
) -> Option<(Vec<usize>, f64)> {
    let n = phi.atom_count();
    for _ in 0..budget {
        let mut support: Vec<usize> = rand::seq::index::sample(rng, n, k).into_vec();
        support.sort_unstable();
        match crate::conditions::erc(phi, &support) {
            Ok(value) if value > 1.0 => return Some((support, value)),
            _ => continue,
        }
    }
    None
}

/// Support-exact recovery test: the estimated support must equal the true
/// support and the coefficients must match to `rel_tol` in relative
/// Frobenius norm.
pub fn recovery_success(
    x_true: &JointSparseSignal,
    result: &RecoveryResult,
    rel_tol: f64,
) -> bool {
    if result.support() != x_true.support() {
        return false;
    }
    let diff = result.coefficients() - x_true.entries();
    diff.norm() <= rel_tol * x_true.entries().norm()
}

/// Default relative Frobenius tolerance for [`recovery_success`].
pub const DEFAULT_SUCCESS_REL_TOL: f64 = 1e-6;

/// Writes a matrix as plain-text CSV: one row per line, 17 significant
/// digits, locale independent.
pub fn save_matrix_csv(path: &Path, mat: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for i in 0..mat.nrows() {
        for j in 0..mat.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:.16e}", mat[(i, j)]);
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a matrix written by [`save_matrix_csv`] (or any numeric CSV with a
/// consistent column count).
pub fn load_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|e| Error::MalformedMatrixFile {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    context: format!("bad number {tok:?}: {e}"),
                })
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::MalformedMatrixFile {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    context: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::MalformedMatrixFile {
            path: path.to_path_buf(),
            line: 0,
            context: "empty matrix file".into(),
        });
    }
    let nrows = rows.len();
    let ncols = rows[0].len();
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}
