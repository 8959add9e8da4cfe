//! Scaled vectorization of symmetric matrices.
//!
//! Column-major lower triangle with off-diagonal entries multiplied by
//! sqrt 2, so `svec(X) . svec(Y) = tr(XY)`.

use nalgebra::DMatrix;
use std::f64::consts::SQRT_2;

pub fn len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Matrix order for a vectorized length, if the length is triangular.
pub fn order(len: usize) -> Option<usize> {
    let n = ((8.0 * len as f64 + 1.0).sqrt() - 1.0) / 2.0;
    let n = n.round() as usize;
    (n * (n + 1) / 2 == len).then_some(n)
}

/// Position of entry `(i, j)` with `i >= j`.
pub fn index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i >= j && i < n);
    j * n - j * (j + 1) / 2 + i
}

pub fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        m[(j, j)] = v[k];
        k += 1;
        for i in j + 1..n {
            let a = v[k] / SQRT_2;
            m[(i, j)] = a;
            m[(j, i)] = a;
            k += 1;
        }
    }
    m
}

/// Writes `svec` of the symmetric part of `m`.
pub fn svec_into(m: &DMatrix<f64>, out: &mut [f64]) {
    let n = m.nrows();
    let mut k = 0;
    for j in 0..n {
        out[k] = m[(j, j)];
        k += 1;
        for i in j + 1..n {
            out[k] = (m[(i, j)] + m[(j, i)]) / SQRT_2;
            k += 1;
        }
    }
}

pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = vec![0.0; len(m.nrows())];
    svec_into(m, &mut out);
    out
}
