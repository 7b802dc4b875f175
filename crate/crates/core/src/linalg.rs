//! Dense row-major matrices and vectors, the Gauss-Newton Gramian, and a
//! blocked Cholesky solver for symmetric positive-definite systems.
//!
//! Everything here is sequential and allocation-explicit so that repeated
//! calls on the same inputs produce bit-identical outputs.

use std::ops::{Deref, DerefMut};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
}

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                what: "matrix data length",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Like [`DenseMatrix::from_vec`] but also rejects NaN and infinite entries.
    pub fn from_vec_finite(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite(i));
        }
        Self::from_vec(rows, cols, data)
    }

    /// Builds a matrix from row slices. Panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    /// Column vector (n x 1).
    pub fn column(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Copies the upper triangle onto the lower one.
    pub fn mirror_upper(&mut self) {
        let n = self.rows;
        debug_assert_eq!(n, self.cols);
        for i in 0..n {
            for j in 0..i {
                self.data[i * n + j] = self.data[j * n + i];
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }
}

/// Dense vector of `f64`. Dereferences to a slice.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl From<&[f64]> for DenseVector {
    fn from(v: &[f64]) -> Self {
        Self(v.to_vec())
    }
}

impl Deref for DenseVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DenseVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn matvec(a: &DenseMatrix, x: &[f64]) -> Result<DenseVector, LinalgError> {
    if a.cols != x.len() {
        return Err(LinalgError::DimensionMismatch {
            what: "matvec operand",
            expected: a.cols,
            got: x.len(),
        });
    }
    Ok((0..a.rows).map(|i| dot(a.row(i), x)).collect::<Vec<_>>().into())
}

/// `Aᵀ x` without forming the transpose.
pub fn matvec_transposed(a: &DenseMatrix, x: &[f64]) -> Result<DenseVector, LinalgError> {
    if a.rows != x.len() {
        return Err(LinalgError::DimensionMismatch {
            what: "transposed matvec operand",
            expected: a.rows,
            got: x.len(),
        });
    }
    let mut out = vec![0.0; a.cols];
    for (i, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            axpy(xi, a.row(i), &mut out);
        }
    }
    Ok(out.into())
}

/// Strided view used by [`gemm`]: `(data, row_stride, col_stride)`.
#[derive(Clone, Copy)]
pub struct View<'a> {
    pub data: &'a [f64],
    pub rs: isize,
    pub cs: isize,
}

impl<'a> View<'a> {
    /// Row-major `rows x cols` block.
    pub fn rowmajor(data: &'a [f64], cols: usize) -> Self {
        Self {
            data,
            rs: cols as isize,
            cs: 1,
        }
    }

    /// Transpose of a row-major block with `cols` columns.
    pub fn transposed(data: &'a [f64], cols: usize) -> Self {
        Self {
            data,
            rs: 1,
            cs: cols as isize,
        }
    }
}

/// `C (m x n, row-major) = alpha * A (m x k) * B (k x n) + beta * C`.
///
/// Backed by `matrixmultiply`, which is single-threaded and has a fixed
/// reduction order for given shapes.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: View<'_>,
    b: View<'_>,
    beta: f64,
    c: &mut [f64],
    ldc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= (m - 1) * ldc + n);
    if k == 0 {
        for i in 0..m {
            for v in &mut c[i * ldc..i * ldc + n] {
                *v *= beta;
            }
        }
        return;
    }
    assert!(a.data.len() > extent(m, k, a.rs, a.cs));
    assert!(b.data.len() > extent(k, n, b.rs, b.cs));
    // SAFETY: extents of A, B and C were bounds-checked above and the
    // output does not alias the inputs (distinct borrows).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            a.rs,
            a.cs,
            b.data.as_ptr(),
            b.rs,
            b.cs,
            beta,
            c.as_mut_ptr(),
            ldc as isize,
            1,
        );
    }
}

fn extent(rows: usize, cols: usize, rs: isize, cs: isize) -> usize {
    (rows - 1) * rs as usize + (cols - 1) * cs as usize
}

/// `JᵀJ`, exactly symmetric: the upper triangle is computed and mirrored.
pub fn gramian(j: &DenseMatrix) -> DenseMatrix {
    let p = j.cols;
    let mut out = DenseMatrix::zeros(p, p);
    gemm(
        p,
        j.rows,
        p,
        1.0,
        View::transposed(&j.data, p),
        View::rowmajor(&j.data, p),
        0.0,
        &mut out.data,
        p,
    );
    out.mirror_upper();
    out
}

const BLOCK: usize = 64;

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    // Row-major; entries above the diagonal are unspecified.
    l: Vec<f64>,
}

impl Cholesky {
    /// Right-looking blocked factorisation. Only the lower triangle of `a`
    /// is read.
    pub fn factor(a: &DenseMatrix) -> Result<Self, LinalgError> {
        if a.rows != a.cols {
            return Err(LinalgError::DimensionMismatch {
                what: "cholesky requires a square matrix",
                expected: a.rows,
                got: a.cols,
            });
        }
        Self::factor_in_place(a.rows, a.data.clone())
    }

    /// Factorises a row-major `n x n` buffer, consuming it.
    pub fn factor_in_place(n: usize, mut l: Vec<f64>) -> Result<Self, LinalgError> {
        assert_eq!(l.len(), n * n);
        let mut k0 = 0;
        while k0 < n {
            let kb = BLOCK.min(n - k0);
            factor_diagonal_block(&mut l, n, k0, kb)?;

            let rest = n - k0 - kb;
            if rest > 0 {
                // Panel: L21 = A21 * L11^{-T}, one row at a time.
                for i in k0 + kb..n {
                    for j in k0..k0 + kb {
                        let mut s = l[i * n + j];
                        for p in k0..j {
                            s -= l[i * n + p] * l[j * n + p];
                        }
                        l[i * n + j] = s / l[j * n + j];
                    }
                }
                // Trailing update A22 -= L21 L21ᵀ. The panel is copied out
                // so the output block does not alias the operands.
                let mut panel = vec![0.0; rest * kb];
                for (r, i) in (k0 + kb..n).enumerate() {
                    panel[r * kb..(r + 1) * kb].copy_from_slice(&l[i * n + k0..i * n + k0 + kb]);
                }
                let start = (k0 + kb) * n + (k0 + kb);
                gemm(
                    rest,
                    kb,
                    rest,
                    -1.0,
                    View::rowmajor(&panel, kb),
                    View::transposed(&panel, kb),
                    1.0,
                    &mut l[start..],
                    n,
                );
            }
            k0 += kb;
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.l[i * self.n + j]
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<DenseVector, LinalgError> {
        let n = self.n;
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch {
                what: "right-hand side length",
                expected: n,
                got: b.len(),
            });
        }
        let l = &self.l;
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &l[i * n..i * n + i];
            let s = y[i] - dot(row, &y[..i]);
            y[i] = s / l[i * n + i];
        }
        // Lᵀ x = y, sweeping rows of L from the bottom.
        for i in (0..n).rev() {
            let xi = y[i] / l[i * n + i];
            y[i] = xi;
            let row = &l[i * n..i * n + i];
            for (yj, lij) in y[..i].iter_mut().zip(row) {
                *yj -= lij * xi;
            }
        }
        Ok(y.into())
    }
}

fn factor_diagonal_block(l: &mut [f64], n: usize, k0: usize, kb: usize) -> Result<(), LinalgError> {
    for j in k0..k0 + kb {
        let mut d = l[j * n + j];
        for p in k0..j {
            d -= l[j * n + p] * l[j * n + p];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(LinalgError::NotPositiveDefinite { index: j, pivot: d });
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..k0 + kb {
            let mut s = l[i * n + j];
            for p in k0..j {
                s -= l[i * n + p] * l[j * n + p];
            }
            l[i * n + j] = s / d;
        }
    }
    Ok(())
}

/// Solves `A x = b` for symmetric positive-definite `A` by Cholesky.
pub fn spd_solve(a: &DenseMatrix, b: &[f64]) -> Result<DenseVector, LinalgError> {
    if a.rows != b.len() {
        return Err(LinalgError::DimensionMismatch {
            what: "spd_solve right-hand side",
            expected: a.rows,
            got: b.len(),
        });
    }
    Cholesky::factor(a)?.solve(b)
}
