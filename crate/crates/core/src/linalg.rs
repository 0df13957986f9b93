//! Dense least squares via Householder QR, enough for ridge-regularized
//! random-feature fits.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;
use crate::{Error, Result};

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ColMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ColMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[c * self.rows + r]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[c * self.rows + r] = v;
    }

    pub fn col(&self, c: usize) -> &[f64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn col_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }
}

/// Solves `min ||A x - B||^2 + ridge ||x||^2` column by column of `B`.
///
/// Returns a `cols(A) x cols(B)` matrix. With `ridge == 0` a numerically
/// rank-deficient `A` is reported as [`Error::Singular`].
pub fn ridge_least_squares(a: &ColMatrix, b: &ColMatrix, ridge: f64) -> Result<ColMatrix> {
    if a.rows != b.rows {
        return Err(Error::DimensionMismatch { expected: a.rows, found: b.rows });
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::param("ridge", "must be finite and >= 0"));
    }
    let n = a.cols;
    let m = a.rows + if ridge > 0.0 { n } else { 0 };
    if m < n {
        return Err(Error::Singular);
    }

    // augmented system [A; sqrt(ridge) I], [B; 0]
    let mut q = ColMatrix::zeros(m, n);
    for c in 0..n {
        q.col_mut(c)[..a.rows].copy_from_slice(a.col(c));
        if ridge > 0.0 {
            q.set(a.rows + c, c, sqrt(ridge));
        }
    }
    let mut rhs = ColMatrix::zeros(m, b.cols);
    for c in 0..b.cols {
        rhs.col_mut(c)[..b.rows].copy_from_slice(b.col(c));
    }

    let mut diag = vec![0.0; n];
    let mut v = vec![0.0; m];
    for j in 0..n {
        let col = &q.col(j)[j..];
        let norm = sqrt(col.iter().map(|x| x * x).sum::<f64>());
        if norm == 0.0 {
            diag[j] = 0.0;
            continue;
        }
        let alpha = if col[0] > 0.0 { -norm } else { norm };
        let len = m - j;
        v[..len].copy_from_slice(col);
        v[0] -= alpha;
        let vnorm2: f64 = v[..len].iter().map(|x| x * x).sum();
        diag[j] = alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        let scale = 2.0 / vnorm2;
        for k in j..n {
            let ck = &mut q.col_mut(k)[j..];
            let dot: f64 = ck.iter().zip(&v[..len]).map(|(x, y)| x * y).sum();
            let s = dot * scale;
            for (x, y) in ck.iter_mut().zip(&v[..len]) {
                *x -= s * y;
            }
        }
        for k in 0..rhs.cols {
            let ck = &mut rhs.col_mut(k)[j..];
            let dot: f64 = ck.iter().zip(&v[..len]).map(|(x, y)| x * y).sum();
            let s = dot * scale;
            for (x, y) in ck.iter_mut().zip(&v[..len]) {
                *x -= s * y;
            }
        }
    }

    let max_diag = diag.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    let tol = 1e-12 * max_diag.max(f64::MIN_POSITIVE) * (m as f64);
    if diag.iter().any(|d| d.abs() <= tol) {
        return Err(Error::Singular);
    }

    // back substitution on R (upper triangle of q; diagonal held in diag)
    let mut x = ColMatrix::zeros(n, b.cols);
    for k in 0..b.cols {
        let y = rhs.col(k);
        let out = x.col_mut(k);
        for i in (0..n).rev() {
            let mut s = y[i];
            for c in (i + 1)..n {
                s -= q.get(i, c) * out[c];
            }
            out[i] = s / diag[i];
        }
    }
    Ok(x)
}
