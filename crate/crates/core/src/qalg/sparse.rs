//! Compressed-sparse-row complex operators.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64 as C64;

use crate::error::{Result, VslqError};

/// Square complex matrix in CSR form. Column indices within a row are sorted
/// and unique; explicit zeros are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, row_ptr: vec![0; dim + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![C64::new(1.0, 0.0); dim])
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        Self::from_triplets(diag.len(), diag.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    pub fn real_diagonal(diag: &[f64]) -> Self {
        Self::from_triplets(diag.len(), diag.iter().enumerate().map(|(i, &v)| (i, i, C64::new(v, 0.0))))
    }

    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets<I>(dim: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut rows: Vec<BTreeMap<usize, C64>> = vec![BTreeMap::new(); dim];
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) out of range for dim {dim}");
            *rows[r].entry(c).or_insert(C64::new(0.0, 0.0)) += v;
        }
        let mut op = Self::zeros(dim);
        for (r, row) in rows.into_iter().enumerate() {
            for (c, v) in row {
                if v != C64::new(0.0, 0.0) {
                    op.cols.push(c);
                    op.vals.push(v);
                }
            }
            op.row_ptr[r + 1] = op.cols.len();
        }
        op
    }

    /// Builds from a row-major dense matrix.
    pub fn from_dense(dim: usize, data: &[C64]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(VslqError::DimensionMismatch { expected: dim * dim, found: data.len() });
        }
        Ok(Self::from_triplets(
            dim,
            (0..dim).flat_map(|r| (0..dim).map(move |c| (r, c))).map(|(r, c)| (r, c, data[r * dim + c])),
        ))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        Self::from_triplets(
            dim,
            rows.iter()
                .enumerate()
                .flat_map(|(r, row)| row.iter().enumerate().map(move |(c, &v)| (r, c, C64::new(v, 0.0)))),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.cols
    }

    pub fn values(&self) -> &[C64] {
        &self.vals
    }

    /// Iterator over the stored entries of row `r` as (col, value).
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.cols[s..e].iter().copied().zip(self.vals[s..e].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
        match self.cols[s..e].binary_search(&c) {
            Ok(k) => self.vals[s + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn diag(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim * self.dim];
        for (r, c, v) in self.triplets() {
            out[r * self.dim + c] = v;
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn scale(&self, s: C64) -> Self {
        if s == C64::new(0.0, 0.0) {
            return Self::zeros(self.dim);
        }
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn matmul(&self, rhs: &Operator) -> Self {
        assert_eq!(self.dim, rhs.dim, "matmul dimension mismatch");
        let mut acc: BTreeMap<usize, C64> = BTreeMap::new();
        let mut out = Self::zeros(self.dim);
        for r in 0..self.dim {
            acc.clear();
            for (k, a) in self.row(r) {
                for (c, b) in rhs.row(k) {
                    *acc.entry(c).or_insert(C64::new(0.0, 0.0)) += a * b;
                }
            }
            for (&c, &v) in &acc {
                if v != C64::new(0.0, 0.0) {
                    out.cols.push(c);
                    out.vals.push(v);
                }
            }
            out.row_ptr[r + 1] = out.cols.len();
        }
        out
    }

    pub fn kron(&self, rhs: &Operator) -> Self {
        let dim = self.dim * rhs.dim;
        Self::from_triplets(
            dim,
            self.triplets().flat_map(|(r1, c1, v1)| {
                rhs.triplets().map(move |(r2, c2, v2)| (r1 * rhs.dim + r2, c1 * rhs.dim + c2, v1 * v2))
            }),
        )
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.dim, "apply dimension mismatch");
        (0..self.dim).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn trace(&self) -> C64 {
        self.diag().iter().sum()
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        (self - other).vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(r, c, _)| r == c)
    }

    /// Deviation ‖U†U − I‖_max.
    pub fn unitarity_defect(&self) -> f64 {
        self.adjoint().matmul(self).max_abs_diff(&Self::identity(self.dim))
    }

    /// True when every row and every column holds at most one entry.
    pub fn is_monomial(&self) -> bool {
        let mut seen = vec![false; self.dim];
        for r in 0..self.dim {
            if self.row_ptr[r + 1] - self.row_ptr[r] > 1 {
                return false;
            }
            for (c, _) in self.row(r) {
                if seen[c] {
                    return false;
                }
                seen[c] = true;
            }
        }
        true
    }

    /// Restriction ⟨v_i|A|v_j⟩ onto a set of vectors.
    pub fn restrict(&self, basis: &[Vec<C64>]) -> Vec<Vec<C64>> {
        let images: Vec<Vec<C64>> = basis.iter().map(|v| self.apply(v)).collect();
        basis
            .iter()
            .map(|vi| images.iter().map(|w| vi.iter().zip(w).map(|(a, b)| a.conj() * b).sum()).collect())
            .collect()
    }

    fn combine(&self, rhs: &Operator, sign: f64) -> Self {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in sum");
        Self::from_triplets(
            self.dim,
            self.triplets().chain(rhs.triplets().map(|(r, c, v)| (r, c, v * sign))),
        )
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        self.combine(rhs, -1.0)
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.matmul(rhs)
    }
}

impl Mul<&Operator> for f64 {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        rhs.scale_re(self)
    }
}

impl Mul<&Operator> for C64 {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        rhs.scale(self)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale_re(-1.0)
    }
}
