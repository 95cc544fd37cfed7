//! Dense row-vector and matrix primitives.
//!
//! Everything follows the row-vector convention: a token is a `1 x m` row,
//! projections multiply on the right, and the associative state is
//! `d_k x d_v` so that retrieval is `q S`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Index;

use crate::error::{check_dim, invalid, Error, Result};

/// A finite, non-empty row vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RowVector(Vec<f64>);

impl RowVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(invalid("row vector must have dim >= 1"));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("RowVector::new"));
        }
        Ok(Self(entries))
    }

    pub fn from_slice(entries: &[f64]) -> Result<Self> {
        Self::new(entries.to_vec())
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("row vector must have dim >= 1"));
        }
        Ok(Self(vec![0.0; dim]))
    }

    /// Unit basis vector `e_index` of length `dim`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(invalid("basis index out of range"));
        }
        let mut v = Self::zeros(dim)?;
        v.0[index] = 1.0;
        Ok(v)
    }

    pub(crate) fn from_vec_unchecked(entries: Vec<f64>) -> Self {
        debug_assert!(!entries.is_empty());
        Self(entries)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &RowVector) -> Result<f64> {
        check_dim("dot", self.dim(), other.dim())?;
        Ok(dot(&self.0, &other.0))
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.norm_sq())
    }

    pub fn scale(&self, factor: f64) -> RowVector {
        Self(self.0.iter().map(|x| x * factor).collect())
    }

    pub fn add(&self, other: &RowVector) -> Result<RowVector> {
        check_dim("add", self.dim(), other.dim())?;
        Ok(Self(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn sub(&self, other: &RowVector) -> Result<RowVector> {
        check_dim("sub", self.dim(), other.dim())?;
        Ok(Self(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    /// Cosine similarity; zero when either side has zero norm.
    pub fn cosine(&self, other: &RowVector) -> Result<f64> {
        let d = self.dot(other)?;
        let denom = self.norm() * other.norm();
        Ok(if denom == 0.0 { 0.0 } else { d / denom })
    }

    pub fn max_abs_diff(&self, other: &RowVector) -> Result<f64> {
        check_dim("max_abs_diff", self.dim(), other.dim())?;
        Ok(max_abs_diff(&self.0, &other.0))
    }

    /// `self * m`, a `1 x cols(m)` row.
    pub fn mul_matrix(&self, m: &DenseMatrix) -> Result<RowVector> {
        check_dim("row x matrix", m.rows(), self.dim())?;
        let mut out = vec![0.0; m.cols()];
        vec_mat_into(&self.0, m, &mut out);
        Ok(Self(out))
    }
}

impl Index<usize> for RowVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A finite row-major matrix with at least one row and one column.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid("matrix dimensions must be positive"));
        }
        check_dim("DenseMatrix::new", rows * cols, data.len())?;
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("DenseMatrix::new"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n, n)?;
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        Ok(m)
    }

    /// Stack rows; all rows must share a dimension.
    pub fn from_rows(rows: &[RowVector]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| invalid("from_rows needs at least one row"))?;
        let cols = first.dim();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_dim("from_rows", cols, r.dim())?;
            data.extend_from_slice(r.as_slice());
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        Self { rows, cols, data }
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
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_vector(&self, i: usize) -> RowVector {
        RowVector::from_vec_unchecked(self.row(i).to_vec())
    }

    pub fn row_vectors(&self) -> Vec<RowVector> {
        (0..self.rows).map(|i| self.row_vector(i)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Standard product `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim("matmul", self.cols, other.rows)?;
        let mut data = vec![0.0; self.rows * other.cols];
        for (i, out) in data.chunks_exact_mut(other.cols).enumerate() {
            vec_mat_into(self.row(i), other, out);
        }
        Ok(Self::from_vec_unchecked(self.rows, other.cols, data))
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Self::from_vec_unchecked(self.cols, self.rows, data)
    }

    pub fn scale(&self, factor: f64) -> DenseMatrix {
        Self::from_vec_unchecked(
            self.rows,
            self.cols,
            self.data.iter().map(|x| x * factor).collect(),
        )
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_shape("add", other)?;
        Ok(Self::from_vec_unchecked(
            self.rows,
            self.cols,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(dot(&self.data, &self.data))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(libm::fabs(*x)))
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> Result<f64> {
        self.check_same_shape("max_abs_diff", other)?;
        Ok(max_abs_diff(&self.data, &other.data))
    }

    /// Normwise relative deviation `max|a - b| / max|b|` (absolute when `b` is zero).
    pub fn max_rel_deviation(&self, reference: &DenseMatrix) -> Result<f64> {
        let diff = self.max_abs_diff(reference)?;
        let scale = reference.max_abs();
        Ok(if scale > 0.0 { diff / scale } else { diff })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    fn check_same_shape(&self, op: &'static str, other: &DenseMatrix) -> Result<()> {
        check_dim(op, self.rows, other.rows)?;
        check_dim(op, self.cols, other.cols)
    }
}

/// `a^T b`: a `dim(a) x dim(b)` rank-one matrix.
pub fn outer_product(a: &RowVector, b: &RowVector) -> DenseMatrix {
    let mut data = Vec::with_capacity(a.dim() * b.dim());
    for &x in a.as_slice() {
        data.extend(b.as_slice().iter().map(|y| x * y));
    }
    DenseMatrix::from_vec_unchecked(a.dim(), b.dim(), data)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out = v * m`, overwriting `out`.
pub(crate) fn vec_mat_into(v: &[f64], m: &DenseMatrix, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (i, &vi) in v.iter().enumerate() {
        if vi != 0.0 {
            axpy(vi, m.row(i), out);
        }
    }
}

/// `m += alpha * a^T b`.
pub(crate) fn rank_one_update(m: &mut DenseMatrix, alpha: f64, a: &[f64], b: &[f64]) {
    let cols = m.cols;
    for (row, &ai) in m.data.chunks_exact_mut(cols).zip(a) {
        axpy(alpha * ai, b, row);
    }
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |m, (x, y)| m.max(libm::fabs(x - y)))
}
