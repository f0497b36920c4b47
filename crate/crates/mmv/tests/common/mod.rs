//! Shared helpers for the integration tests: independent reference
//! implementations (normal equations, explicit projectors, plain
//! enumeration) that deliberately avoid the code paths used by the library.

#![allow(dead_code)]

use mmv::problem::{derive_stream, gen_dictionary, gen_signal, measure, Dictionary, JointSparseSignal};
use nalgebra::{DMatrix, DVector};

/// Seeded random instance from the library generators.
pub fn seeded_instance(
    seed: u64,
    n: usize,
    m: usize,
    l: usize,
    k: usize,
    tau: usize,
) -> (Dictionary, JointSparseSignal, DMatrix<f64>) {
    let mut rng = derive_stream(seed, &[n as u64, m as u64, l as u64, k as u64, tau as u64]);
    let phi = gen_dictionary(m, n, &mut rng).unwrap();
    let x = gen_signal(n, l, k, tau, &mut rng).unwrap();
    let y = measure(&phi, &x).unwrap();
    (phi, x, y.entries().clone())
}

/// Least squares via the normal equations; `None` when the Gram matrix is
/// not invertible.
pub fn normal_equations_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let gram = a.tr_mul(a);
    let rhs = a.tr_mul(b);
    gram.try_inverse().map(|inv| inv * rhs)
}

/// Classical OMP on a single measurement vector, selections returned in
/// order. Ties break toward the lower index; stops early on a numerically
/// zero residual.
pub fn omp_reference(phi: &DMatrix<f64>, y: &DVector<f64>, k: usize) -> Vec<usize> {
    let n = phi.ncols();
    let y_norm = y.norm();
    let mut residual = y.clone();
    let mut selected: Vec<usize> = Vec::new();
    for _ in 0..k {
        if residual.norm() <= 1e-10 * y_norm {
            break;
        }
        let mut best = usize::MAX;
        let mut best_val = f64::NEG_INFINITY;
        for i in 0..n {
            if selected.contains(&i) {
                continue;
            }
            let corr = phi.column(i).dot(&residual).abs();
            if corr > best_val {
                best_val = corr;
                best = i;
            }
        }
        if best == usize::MAX {
            break;
        }
        selected.push(best);
        let sub = phi.select_columns(selected.iter());
        let coeffs = normal_equations_solve(&sub, y).expect("full-rank selection");
        residual = y - sub * coeffs;
    }
    selected
}

/// Classical ORMP / orthogonal least squares on a single measurement
/// vector, with explicit projectors (no Gram-Schmidt reuse). Atoms whose
/// projection off the selected span is numerically zero are skipped.
pub fn ormp_reference(phi: &DMatrix<f64>, y: &DVector<f64>, k: usize) -> Vec<usize> {
    let (m, n) = phi.shape();
    let y_norm = y.norm();
    let mut selected: Vec<usize> = Vec::new();
    for _ in 0..k {
        // P = I - Phi_S (Phi_S^T Phi_S)^{-1} Phi_S^T from scratch each step.
        let projector = if selected.is_empty() {
            DMatrix::identity(m, m)
        } else {
            let sub = phi.select_columns(selected.iter());
            let gram_inv = sub.tr_mul(&sub).try_inverse().expect("full-rank selection");
            DMatrix::identity(m, m) - &sub * gram_inv * sub.transpose()
        };
        let residual = &projector * y;
        if residual.norm() <= 1e-10 * y_norm {
            break;
        }
        let mut best = usize::MAX;
        let mut best_val = f64::NEG_INFINITY;
        for i in 0..n {
            if selected.contains(&i) {
                continue;
            }
            let projected = &projector * phi.column(i);
            let norm = projected.norm();
            if norm <= 1e-10 {
                continue;
            }
            let corr = (projected.dot(&residual) / norm).abs();
            if corr > best_val {
                best_val = corr;
                best = i;
            }
        }
        if best == usize::MAX {
            break;
        }
        selected.push(best);
    }
    selected
}

/// Support of the `k` largest `|phi_i^T y|` values, ties toward the lower
/// index (single-channel thresholding reference).
pub fn thresholding_reference(phi: &DMatrix<f64>, y: &DVector<f64>, k: usize) -> Vec<usize> {
    let n = phi.ncols();
    let mut idx: Vec<usize> = (0..n).collect();
    let vals: Vec<f64> = (0..n).map(|i| phi.column(i).dot(y).abs()).collect();
    idx.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap().then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// ERC via per-column normal-equations solves.
pub fn erc_normal_equations(phi: &Dictionary, omega: &[usize]) -> f64 {
    let sub = phi.columns(omega);
    let gram_inv = sub.tr_mul(&sub).try_inverse().expect("full-rank support");
    let mut worst = 0.0_f64;
    for j in 0..phi.atom_count() {
        if omega.contains(&j) {
            continue;
        }
        let coeffs = &gram_inv * sub.tr_mul(&phi.atom(j));
        worst = worst.max(coeffs.iter().map(|c| c.abs()).sum());
    }
    worst
}

/// Exhaustive minimum-residual support search by plain recursion and
/// normal-equations projections. Returns the winning support and its
/// residual Frobenius norm; ties keep the lexicographically first support.
pub fn enumerate_min_residual(
    phi: &DMatrix<f64>,
    y: &DMatrix<f64>,
    k: usize,
) -> (Vec<usize>, f64) {
    let n = phi.ncols();
    let tie_tol = 1e-12 * y.norm();
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut current: Vec<usize> = Vec::with_capacity(k);
    recurse(phi, y, k, 0, n, &mut current, &mut best, tie_tol);
    best.expect("at least one full-rank support")
}

fn recurse(
    phi: &DMatrix<f64>,
    y: &DMatrix<f64>,
    k: usize,
    start: usize,
    n: usize,
    current: &mut Vec<usize>,
    best: &mut Option<(Vec<usize>, f64)>,
    tie_tol: f64,
) {
    if current.len() == k {
        let sub = phi.select_columns(current.iter());
        let Some(gram_inv) = sub.tr_mul(&sub).try_inverse() else {
            return;
        };
        let coeffs = gram_inv * sub.tr_mul(y);
        let residual = (y - sub * coeffs).norm();
        if best.as_ref().map_or(true, |(_, b)| residual < b - tie_tol) {
            *best = Some((current.clone(), residual));
        }
        return;
    }
    let remaining = k - current.len();
    for i in start..=(n - remaining) {
        current.push(i);
        recurse(phi, y, k, i + 1, n, current, best, tie_tol);
        current.pop();
    }
}

/// Two-sided binomial standard error of an empirical rate.
pub fn binomial_se(rate: f64, trials: usize) -> f64 {
    (rate * (1.0 - rate) / trials as f64).sqrt()
}
