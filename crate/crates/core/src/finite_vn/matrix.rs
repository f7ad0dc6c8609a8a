use std::ops::{Add, Index, IndexMut, Mul, Sub};

use faer::{Mat, MatRef};
use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg;

/// A square complex matrix viewed as an element of the finite tracial algebra
/// `M_dim(C)` with the normalized trace `tau(x) = (1/dim) Tr(x)`.
///
/// Entries are stored row-major. Every constructor rejects non-finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct TracedMatrix {
    dim: usize,
    data: Vec<c64>,
}

/// The three norms of a finite tracial algebra.
///
/// With the normalized trace, `l1 <= l2 <= op` always holds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormTriple {
    pub op: f64,
    pub l2: f64,
    pub l1: f64,
}

impl NormTriple {
    /// Checks `l1 <= l2 <= op` up to a relative slack.
    pub fn is_ordered(&self, rel_slack: f64) -> bool {
        let s = rel_slack * self.op.max(1e-300);
        self.l1 <= self.l2 + s && self.l2 <= self.op + s
    }
}

impl TracedMatrix {
    pub fn new(dim: usize, data: Vec<c64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::pre("matrix dimension must be at least 1"));
        }
        if data.len() != dim * dim {
            return Err(Error::Format(format!("expected {} entries for dim {dim}, found {}", dim * dim, data.len())));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Format("matrix entries must be finite".into()));
        }
        Ok(Self { dim, data })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        Self { dim, data: vec![c64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = c64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> c64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = f(i, j);
            }
        }
        m
    }

    pub fn from_diagonal(diag: &[c64]) -> Self {
        let dim = diag.len();
        let mut m = Self::zeros(dim);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * dim + i] = d;
        }
        m
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d: Vec<c64> = diag.iter().map(|&r| c64::new(r, 0.0)).collect();
        Self::from_diagonal(&d)
    }

    /// Builds a matrix from real rows; handy for small literal examples.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::Format("rows must form a square matrix".into()));
            }
            data.extend(row.iter().map(|&r| c64::new(r, 0.0)));
        }
        Self::new(dim, data)
    }

    pub fn from_rows(rows: Vec<Vec<c64>>) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::Format("rows must form a square matrix".into()));
            }
            data.extend(row);
        }
        Self::new(dim, data)
    }

    pub(crate) fn from_faer(m: MatRef<'_, c64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self::from_fn(m.nrows(), |i, j| m[(i, j)])
    }

    pub(crate) fn to_faer(&self) -> Mat<c64> {
        let n = self.dim;
        Mat::from_fn(n, n, |i, j| self.data[i * n + j])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[c64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [c64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[c64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Normalized trace `tau(x) = (1/dim) sum_i x_ii`.
    pub fn trace(&self) -> c64 {
        let s: c64 = (0..self.dim).map(|i| self.data[i * self.dim + i]).sum();
        s / self.dim as f64
    }

    pub fn diagonal(&self) -> Vec<c64> {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).collect()
    }

    /// Copy with the diagonal set to zero.
    pub fn off_diagonal(&self) -> Self {
        let mut m = self.clone();
        for i in 0..self.dim {
            m.data[i * self.dim + i] = c64::new(0.0, 0.0);
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |i, j| self.data[j * n + i].conj())
    }

    pub fn scale(&self, s: c64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&z| z * s).collect() }
    }

    /// `self + alpha * 1`.
    pub fn shift(&self, alpha: c64) -> Self {
        let mut m = self.clone();
        for i in 0..self.dim {
            m.data[i * self.dim + i] += alpha;
        }
        m
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        check_dim(self.dim, rhs.dim)?;
        Ok(linalg::matmul(self, rhs))
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self> {
        check_dim(self.dim, rhs.dim)?;
        Ok(self.zip_with(rhs, |a, b| a + b))
    }

    pub fn try_sub(&self, rhs: &Self) -> Result<Self> {
        check_dim(self.dim, rhs.dim)?;
        Ok(self.zip_with(rhs, |a, b| a - b))
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(c64, c64) -> c64) -> Self {
        Self { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect() }
    }

    /// `D_left * self * D_right` for diagonal matrices given by their entries.
    pub fn scale_rows_cols(&self, left: &[c64], right: &[c64]) -> Self {
        let n = self.dim;
        Self::from_fn(n, |i, j| left[i] * self.data[i * n + j] * right[j])
    }

    /// Largest entrywise modulus of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &Self) -> f64 {
        assert_eq!(self.dim, rhs.dim);
        self.data.iter().zip(&rhs.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let n = self.dim;
        (0..n).all(|i| (i..n).all(|j| (self.data[i * n + j] - self.data[j * n + i].conj()).norm() <= tol))
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim;
        (0..n).all(|i| (0..n).all(|j| i == j || self.data[i * n + j].norm() <= tol))
    }

    /// `U*U = 1` entrywise within `tol`.
    pub fn is_unitary(&self, tol: f64) -> bool {
        let g = linalg::matmul(&self.adjoint(), self);
        g.max_abs_diff(&Self::identity(self.dim)) <= tol
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> f64 {
        linalg::op_norm(self)
    }

    /// `tau(x* x)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.data.iter().map(|z| z.norm_sqr()).sum();
        (s / self.dim as f64).sqrt()
    }

    /// `tau(|x|)`, the normalized sum of singular values.
    pub fn l1_norm(&self) -> f64 {
        let s: f64 = linalg::singular_values_via_gram(self).iter().sum();
        s / self.dim as f64
    }

    pub fn norms(&self) -> NormTriple {
        NormTriple { op: self.op_norm(), l2: self.l2_norm(), l1: self.l1_norm() }
    }

    /// Singular values in non-increasing order.
    pub fn singular_values(&self) -> Vec<f64> {
        linalg::singular_values(self)
    }

    /// `|x| = (x* x)^{1/2}`.
    pub fn abs(&self) -> Self {
        linalg::psd_sqrt(&linalg::matmul(&self.adjoint(), self))
    }

    /// The sub-matrix on the given row/column index set, in the given order.
    pub fn principal_submatrix(&self, idx: &[usize]) -> Self {
        let n = self.dim;
        Self::from_fn(idx.len(), |i, j| self.data[idx[i] * n + idx[j]])
    }
}

impl Index<(usize, usize)> for TracedMatrix {
    type Output = c64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &c64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for TracedMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut c64 {
        &mut self.data[i * self.dim + j]
    }
}

impl<'a> Mul<&'a TracedMatrix> for &'a TracedMatrix {
    type Output = TracedMatrix;

    fn mul(self, rhs: &'a TracedMatrix) -> TracedMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in product");
        linalg::matmul(self, rhs)
    }
}

impl<'a> Add<&'a TracedMatrix> for &'a TracedMatrix {
    type Output = TracedMatrix;

    fn add(self, rhs: &'a TracedMatrix) -> TracedMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in sum");
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl<'a> Sub<&'a TracedMatrix> for &'a TracedMatrix {
    type Output = TracedMatrix;

    fn sub(self, rhs: &'a TracedMatrix) -> TracedMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in difference");
        self.zip_with(rhs, |a, b| a - b)
    }
}

/// Normalized trace; free-function form of [`TracedMatrix::trace`].
pub fn normalized_trace(x: &TracedMatrix) -> c64 {
    x.trace()
}

pub fn op_norm(x: &TracedMatrix) -> f64 {
    x.op_norm()
}

pub fn l2_norm(x: &TracedMatrix) -> f64 {
    x.l2_norm()
}

pub fn l1_norm(x: &TracedMatrix) -> f64 {
    x.l1_norm()
}
