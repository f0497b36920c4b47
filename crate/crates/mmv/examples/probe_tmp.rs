//! Temporary probe (deleted before release).

use mmv::numerics::pseudo_inverse;
use mmv::problem::{derive_stream, gen_dictionary, gen_signal, measure};
use nalgebra::DMatrix;

fn main() {
    let seed = 43u64;
    let tags = [64u64, 16, 8, 6, 4];
    let mut rng = derive_stream(10_000 + seed, &tags);
    let phi = gen_dictionary(16, 64, &mut rng).unwrap();
    let x = gen_signal(64, 8, 6, 4, &mut rng).unwrap();
    let y = measure(&phi, &x).unwrap();
    let y = y.entries().clone();

    // Rebuild the solver's step-6 residual (full n-column gemm).
    let selected = [35usize, 47, 14, 4, 22];
    let sub = phi.columns(&selected);
    let pinv = pseudo_inverse(&sub).unwrap();
    let block = &pinv * &y;
    let mut coeffs = DMatrix::zeros(64, 8);
    for (row, &idx) in selected.iter().enumerate() {
        coeffs.row_mut(idx).copy_from(&block.row(row));
    }
    let residual = &y - phi.entries() * &coeffs;

    // Compare svd(true,false) with svd(true,true) on this matrix.
    let svd_u_only = residual.clone().svd(true, false);
    let svd_full = residual.clone().svd(true, true);
    println!("u-only sigma: {:?}", &svd_u_only.singular_values.as_slice()[..4]);
    println!("full   sigma: {:?}", &svd_full.singular_values.as_slice()[..4]);
    let u1 = svd_u_only.u.as_ref().unwrap();
    let u2 = svd_full.u.as_ref().unwrap();
    println!(
        "col0 agreement |<u_only0, u_full0>| = {:.12}",
        u1.column(0).dot(&u2.column(0)).abs()
    );
    // Independent principal direction by power iteration on R R^T.
    let gram = &residual * residual.transpose();
    let mut v = nalgebra::DVector::from_element(16, 1.0);
    for _ in 0..500 {
        v = &gram * v;
        let n = v.norm();
        v /= n;
    }
    println!(
        "power-iter check: |<u_only0, pow>| = {:.12}, |<u_full0, pow>| = {:.12}",
        u1.column(0).dot(&v).abs(),
        u2.column(0).dot(&v).abs()
    );
    let a51 = phi.atom(51);
    println!(
        "crit51: u_only {:.12}, u_full {:.12}, pow {:.12}",
        u1.column(0).dot(&a51).abs(),
        u2.column(0).dot(&a51).abs(),
        v.dot(&a51).abs()
    );
    // Reconstruction error of the u-only SVD (can't reconstruct without v),
    // instead check U^T R has decreasing row norms.
    let ur = u1.tr_mul(&residual);
    let norms: Vec<f64> = (0..ur.nrows()).map(|i| ur.row(i).norm()).collect();
    println!("u-only: row norms of U^T R = {:?}", &norms[..4]);
    let ur2 = u2.tr_mul(&residual);
    let norms2: Vec<f64> = (0..ur2.nrows()).map(|i| ur2.row(i).norm()).collect();
    println!("full:   row norms of U^T R = {:?}", &norms2[..4]);
}
