//! Thin wrappers over nalgebra's dense Hermitian and SVD routines.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Only the lower triangle is read, so the input must already be Hermitian.
pub fn eigh(m: DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(m: DMatrix<C64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn singular_values(m: DMatrix<C64>) -> Vec<f64> {
    m.singular_values().iter().copied().collect()
}

pub fn frobenius_sq(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..m.nrows() {
        for c in 0..=r {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sq(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Shannon entropy in bits of a probability vector; zero weights contribute nothing.
pub fn shannon_bits(weights: impl IntoIterator<Item = f64>) -> f64 {
    weights
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}
