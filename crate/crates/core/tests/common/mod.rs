#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use nlfast::kernel::SplitKernel;

/// Published coefficients of `p^{2K}`, `K = 0..3`.
pub const PRINTED_COEFFS: [&[f64]; 4] = [
    &[1.0],
    &[1.5, -0.5],
    &[15.0 / 8.0, -5.0 / 4.0, 3.0 / 8.0],
    &[17.0 / 8.0, -2.0, 9.0 / 8.0, -0.25],
];

/// Weights `w_j` with `f^{(m)}(a) ≈ h^{-m} Σ_j w_j f(a - j h)`, `j = 0..p`.
pub fn backward_weights(m: usize, p: usize) -> Vec<f64> {
    let a = DMatrix::from_fn(p, p, |q, j| {
        let off = -(j as f64);
        off.powi(q as i32) / (1..=q).map(|t| t as f64).product::<f64>()
    });
    let mut rhs = DVector::zeros(p);
    rhs[m] = 1.0;
    a.lu().solve(&rhs).expect("nonsingular stencil").as_slice().to_vec()
}

/// One-sided estimate of `κ^{(m)}(1⁻)` from `m + 4` points with step `h`.
pub fn kappa_edge_derivative(s: &SplitKernel, m: usize, h: f64) -> f64 {
    let w = backward_weights(m, m + 4);
    let sum: f64 = w
        .iter()
        .enumerate()
        .map(|(j, wj)| wj * s.kappa(1.0 - j as f64 * h).unwrap())
        .sum();
    sum / h.powi(m as i32)
}

/// Sorted nonzero entries of a row, used to compare interior rows up to translation.
pub fn sorted_nonzeros(row: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = row.iter().copied().filter(|x| *x != 0.0).collect();
    v.sort_by(f64::total_cmp);
    v
}
