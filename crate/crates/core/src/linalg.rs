// Small dense helpers over row-major `d × d` slices, backed by nalgebra.

use alloc::vec::Vec;
use nalgebra::DMatrix;

pub(crate) fn to_matrix(a: &[f64], d: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(d, d, a)
}

pub(crate) fn to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub(crate) fn is_symmetric(a: &[f64], d: usize) -> bool {
    (0..d).all(|i| (0..i).all(|j| a[i * d + j] == a[j * d + i]))
}

/// Lower Cholesky factor, or `None` if `a` is not positive definite.
pub(crate) fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let c = to_matrix(a, d).cholesky()?;
    Some(to_row_major(&c.l()))
}

pub(crate) fn inverse(a: &[f64], d: usize) -> Option<Vec<f64>> {
    to_matrix(a, d).try_inverse().map(|m| to_row_major(&m))
}

/// Eigenvalues (ascending) and the matching eigenvectors as columns of a
/// row-major matrix.
pub(crate) fn symmetric_eigen(a: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let eig = to_matrix(a, d).symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = alloc::vec![0.0; d * d];
    for (col, &k) in order.iter().enumerate() {
        for row in 0..d {
            vectors[row * d + col] = eig.eigenvectors[(row, k)];
        }
    }
    (values, vectors)
}

#[inline]
pub(crate) fn mat_vec(a: &[f64], x: &[f64], out: &mut [f64]) {
    let d = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &a[i * d..(i + 1) * d];
        *o = row.iter().zip(x).map(|(r, v)| r * v).sum();
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

pub(crate) fn identity(d: usize) -> Vec<f64> {
    let mut m = alloc::vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

pub(crate) fn frobenius(a: &[f64]) -> f64 {
    norm(a)
}
