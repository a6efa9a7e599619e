//! Dense row-major `f64` matrices.
//!
//! Only what the framework needs: construction, products in the three
//! transpose layouts used by backpropagation, elementwise maps and norms.
//! Shape agreement in the arithmetic helpers is asserted; the fallible
//! entry points of the higher-level modules validate shapes first and
//! return [`Error::DimensionMismatch`].

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting bad lengths and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims("Matrix::from_vec", (rows, cols), (data.len(), 1)));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "matrix data" });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds from nested rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.as_ref().len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            let row = row.as_ref();
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// `n×1` column vector.
    pub fn column(values: Vec<f64>) -> Self {
        let n = values.len();
        Matrix { rows: n, cols: 1, data: values }
    }

    pub fn scalar(value: f64) -> Self {
        Matrix { rows: 1, cols: 1, data: vec![value] }
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Matrix::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
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

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// The scalar held by a `1×1` matrix.
    pub fn item(&self) -> f64 {
        assert_eq!(self.shape(), (1, 1), "item() on non-scalar matrix");
        self.data[0]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        gemm_nn(self, rhs, &mut out);
        out
    }

    /// `selfᵀ · rhs` without materializing the transpose.
    pub fn matmul_tn(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.rows, rhs.rows, "matmul_tn shape mismatch");
        let mut out = Matrix::zeros(self.cols, rhs.cols);
        gemm_tn(self, rhs, &mut out);
        out
    }

    /// `self · rhsᵀ` without materializing the transpose.
    pub fn matmul_nt(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.cols, "matmul_nt shape mismatch");
        let mut out = Matrix::zeros(self.rows, rhs.rows);
        gemm_nt(self, rhs, &mut out);
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(self.shape(), other.shape(), "zip_map shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Matrix) -> Matrix {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!(self.shape(), other.shape(), "add_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// `self += s · other`.
    pub fn axpy(&mut self, s: f64, other: &Matrix) {
        assert_eq!(self.shape(), other.shape(), "axpy shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn scale_mut(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius(&self) -> f64 {
        libm::sqrt(self.frobenius_sq())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest `|a_ij − a_ji|`; `None` for non-square matrices.
    pub fn max_asymmetry(&self) -> Option<f64> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        Some(worst)
    }

    /// Rows `start..start + len` as a new matrix.
    pub fn slice_rows(&self, start: usize, len: usize) -> Matrix {
        assert!(start + len <= self.rows, "slice_rows out of bounds");
        Matrix {
            rows: len,
            cols: self.cols,
            data: self.data[start * self.cols..(start + len) * self.cols].to_vec(),
        }
    }

    /// Columns `start..start + len` as a new matrix.
    pub fn slice_cols(&self, start: usize, len: usize) -> Matrix {
        assert!(start + len <= self.cols, "slice_cols out of bounds");
        Matrix::from_fn(self.rows, len, |i, j| self.get(i, start + j))
    }

    /// Stacks matrices with equal column counts vertically.
    pub fn vstack(parts: &[&Matrix]) -> Matrix {
        let cols = parts.first().map_or(0, |m| m.cols);
        let rows = parts.iter().map(|m| m.rows).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for m in parts {
            assert_eq!(m.cols, cols, "vstack column mismatch");
            data.extend_from_slice(&m.data);
        }
        Matrix { rows, cols, data }
    }

    /// Places matrices with equal row counts side by side.
    pub fn hstack(parts: &[&Matrix]) -> Matrix {
        let rows = parts.first().map_or(0, |m| m.rows);
        let cols = parts.iter().map(|m| m.cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for m in parts {
            assert_eq!(m.rows, rows, "hstack row mismatch");
            for i in 0..rows {
                out.data[i * cols + offset..i * cols + offset + m.cols].copy_from_slice(m.row(i));
            }
            offset += m.cols;
        }
        out
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        f.write_str("]")
    }
}

/// Dot product with four independent accumulators.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    let mut acc = [0.0; 4];
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
fn axpy_slice(out: &mut [f64], s: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += s * v;
    }
}

/// Below this many output columns (or inner terms for `gemm_nt`) the kernels
/// switch to a layout whose inner loop runs over the long dimension.
const THIN: usize = 64;

/// `out += a · b`.
pub(crate) fn gemm_nn(a: &Matrix, b: &Matrix, out: &mut Matrix) {
    let n = b.cols;
    if n < THIN {
        let bt = b.transpose();
        for i in 0..a.rows {
            let a_row = a.row(i);
            for j in 0..n {
                out.data[i * n + j] += dot(a_row, bt.row(j));
            }
        }
        return;
    }
    for i in 0..a.rows {
        let out_row = &mut out.data[i * n..(i + 1) * n];
        for (k, &aik) in a.row(i).iter().enumerate() {
            if aik != 0.0 {
                axpy_slice(out_row, aik, &b.data[k * n..(k + 1) * n]);
            }
        }
    }
}

/// `out += aᵀ · b`.
pub(crate) fn gemm_tn(a: &Matrix, b: &Matrix, out: &mut Matrix) {
    let n = b.cols;
    if n < THIN {
        // accumulate (bᵀa) row by row, then add its transpose
        let m = a.cols;
        let mut t = Matrix::zeros(n, m);
        for k in 0..a.rows {
            let a_row = a.row(k);
            for j in 0..n {
                let bkj = b.data[k * n + j];
                if bkj != 0.0 {
                    axpy_slice(&mut t.data[j * m..(j + 1) * m], bkj, a_row);
                }
            }
        }
        for i in 0..m {
            for j in 0..n {
                out.data[i * n + j] += t.data[j * m + i];
            }
        }
        return;
    }
    for k in 0..a.rows {
        let b_row = &b.data[k * n..(k + 1) * n];
        for (i, &aki) in a.row(k).iter().enumerate() {
            if aki != 0.0 {
                axpy_slice(&mut out.data[i * n..(i + 1) * n], aki, b_row);
            }
        }
    }
}

/// `out += a · bᵀ`.
pub(crate) fn gemm_nt(a: &Matrix, b: &Matrix, out: &mut Matrix) {
    let n = b.rows;
    if a.cols < THIN {
        // sum of outer products over the short inner dimension
        let (at, bt) = (a.transpose(), b.transpose());
        for t in 0..a.cols {
            let b_row = bt.row(t);
            for (i, &ait) in at.row(t).iter().enumerate() {
                if ait != 0.0 {
                    axpy_slice(&mut out.data[i * n..(i + 1) * n], ait, b_row);
                }
            }
        }
        return;
    }
    for i in 0..a.rows {
        let a_row = a.row(i);
        for j in 0..n {
            out.data[i * n + j] += dot(a_row, b.row(j));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        Matrix::from_fn(a.rows(), b.cols(), |i, j| {
            (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum()
        })
    }

    #[test]
    fn product_layouts_agree_with_naive() {
        let a = Matrix::from_fn(3, 5, |i, j| (i * 5 + j) as f64 * 0.37 - 2.0);
        let b = Matrix::from_fn(5, 4, |i, j| libm::sin((i * 4 + j) as f64));
        let c = naive(&a, &b);
        let close = |x: &Matrix, y: &Matrix| x.sub(y).max_abs() < 1e-12;
        assert!(close(&a.matmul(&b), &c));
        assert!(close(&a.transpose().matmul_tn(&b), &c));
        assert!(close(&a.matmul_nt(&b.transpose()), &c));
    }

    #[test]
    fn thin_and_wide_kernels_agree() {
        for (m, k, n) in [(7, 20, 1), (3, 3, 30), (30, 17, 9), (1, 40, 2), (12, 1, 12)] {
            let a = Matrix::from_fn(m, k, |i, j| libm::cos((i * 7 + j * 3) as f64));
            let b = Matrix::from_fn(k, n, |i, j| libm::sin((i * 5 + j) as f64) - 0.2);
            let c = naive(&a, &b);
            assert!(a.matmul(&b).sub(&c).max_abs() < 1e-12);
            assert!(a.transpose().matmul_tn(&b).sub(&c).max_abs() < 1e-12);
            assert!(a.matmul_nt(&b.transpose()).sub(&c).max_abs() < 1e-12);
        }
    }

    #[test]
    fn from_vec_rejects_bad_input() {
        assert!(Matrix::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn stacking() {
        let a = Matrix::from_rows(&[[1.0, 2.0]]);
        let b = Matrix::from_rows(&[[3.0, 4.0]]);
        assert_eq!(Matrix::vstack(&[&a, &b]), Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]));
        assert_eq!(Matrix::hstack(&[&a, &b]), Matrix::from_rows(&[[1.0, 2.0, 3.0, 4.0]]));
    }
}
