//! Small dense helpers; every matrix here is at most 8×8.

use nalgebra::{DMatrix, DVector};

pub fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eig_extrema(m: &DMatrix<f64>) -> (f64, f64) {
    match m.nrows() {
        0 => (0.0, 0.0),
        1 => (m[(0, 0)], m[(0, 0)]),
        _ => {
            let eig = m.clone().symmetric_eigenvalues();
            let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        }
    }
}

pub fn min_eig(m: &DMatrix<f64>) -> f64 {
    eig_extrema(m).0
}

pub fn max_eig(m: &DMatrix<f64>) -> f64 {
    eig_extrema(m).1
}

/// Spectral norm of a symmetric matrix.
pub fn sym_norm(m: &DMatrix<f64>) -> f64 {
    let (lo, hi) = eig_extrema(m);
    lo.abs().max(hi.abs())
}

/// `wᵀ M w`.
pub fn quad(m: &DMatrix<f64>, w: &[f64]) -> f64 {
    let n = w.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += w[i] * m[(i, j)] * w[j];
        }
    }
    acc
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}
