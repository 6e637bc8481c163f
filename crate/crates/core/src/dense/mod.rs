//! Small dense kernels: row-major matrices, partial-pivoting LU, Givens
//! least-squares updates and a real nonsymmetric eigensolver.
//!
//! These operate on the reduced Hessenberg problems (dimension at most
//! `m + 1`) and on the dense `b x b` blocks of block-sparse matrices.

pub(crate) mod block;
mod eigen;
mod givens;

use std::ops::{Index, IndexMut};

use thiserror::Error;

pub use eigen::{eig_real_nonsym, EigenPairs};
pub use givens::{givens_extend, lstsq_solution, GivensChain, GivensStep, Rotation};

/// Pivots with magnitude below this are treated as exact zeros.
pub const PIVOT_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DenseError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("singular block: pivot {pivot} has magnitude below {PIVOT_FLOOR:e}")]
    SingularBlock { pivot: usize },
    #[error("singular triangular factor at diagonal entry {index}")]
    SingularTriangle { index: usize },
    #[error("QR iteration did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("orthonormalization lost rank: {rank} independent columns out of {requested}")]
    RankLoss { rank: usize, requested: usize },
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
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, DenseError> {
        if data.len() != rows * cols {
            return Err(DenseError::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(DenseError::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Convenience constructor from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Self {
        let c = columns.len();
        let r = columns.first().map_or(0, Vec::len);
        let mut m = Self::zeros(r, c);
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), r, "ragged columns");
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v;
            }
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Copy of the leading `rows x cols` corner.
    pub fn submatrix(&self, rows: usize, cols: usize) -> Self {
        assert!(rows <= self.rows && cols <= self.cols);
        let mut s = Self::zeros(rows, cols);
        for i in 0..rows {
            s.data[i * cols..(i + 1) * cols].copy_from_slice(&self.row(i)[..cols]);
        }
        s
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix, DenseError> {
        if self.cols != rhs.rows {
            return Err(DenseError::DimensionMismatch {
                expected: self.cols,
                found: rhs.rows,
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &r) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * r;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, DenseError> {
        if x.len() != self.cols {
            return Err(DenseError::DimensionMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `selfᵀ x`.
    pub fn matvec_transpose(&self, x: &[f64]) -> Result<Vec<f64>, DenseError> {
        if x.len() != self.rows {
            return Err(DenseError::DimensionMismatch {
                expected: self.rows,
                found: x.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Partial-pivoting LU factors stored as combined `L\U`.
///
/// `perm[i]` is the original row that ended up in position `i`, so
/// `P B = L U` with `(P B)[i] = B[perm[i]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LuFactors {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

pub fn lu_factor(b: &DenseMatrix) -> Result<LuFactors, DenseError> {
    if !b.is_square() {
        return Err(DenseError::NotSquare {
            rows: b.rows,
            cols: b.cols,
        });
    }
    if let Some(pos) = b.data.iter().position(|v| !v.is_finite()) {
        return Err(DenseError::NonFinite {
            row: pos / b.cols,
            col: pos % b.cols,
        });
    }
    let n = b.rows;
    let mut lu = b.clone();
    let mut pivots = vec![0usize; n];
    block::lu_in_place(lu.as_mut_slice(), &mut pivots, n)
        .map_err(|pivot| DenseError::SingularBlock { pivot })?;
    // Expand the swap sequence into a permutation.
    let mut perm: Vec<usize> = (0..n).collect();
    for (k, &p) in pivots.iter().enumerate() {
        perm.swap(k, p);
    }
    Ok(LuFactors { lu, perm })
}

impl LuFactors {
    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Unit lower-triangular factor.
    pub fn lower(&self) -> DenseMatrix {
        let n = self.dim();
        let mut l = DenseMatrix::identity(n);
        for i in 0..n {
            for j in 0..i {
                l[(i, j)] = self.lu[(i, j)];
            }
        }
        l
    }

    pub fn upper(&self) -> DenseMatrix {
        let n = self.dim();
        let mut u = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                u[(i, j)] = self.lu[(i, j)];
            }
        }
        u
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, DenseError> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(DenseError::DimensionMismatch {
                expected: n,
                found: rhs.len(),
            });
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        let a = self.lu.as_slice();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= a[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= a[i * n + j] * x[j];
            }
            x[i] = s / a[i * n + i];
        }
        Ok(x)
    }

    /// Solves `Bᵀ x = rhs`.
    pub fn solve_transpose(&self, rhs: &[f64]) -> Result<Vec<f64>, DenseError> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(DenseError::DimensionMismatch {
                expected: n,
                found: rhs.len(),
            });
        }
        // Bᵀ = Uᵀ Lᵀ P, so solve Uᵀ w = rhs, Lᵀ u = w, then x = Pᵀ u.
        let a = self.lu.as_slice();
        let mut w = rhs.to_vec();
        for i in 0..n {
            let mut s = w[i];
            for j in 0..i {
                s -= a[j * n + i] * w[j];
            }
            w[i] = s / a[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = w[i];
            for j in i + 1..n {
                s -= a[j * n + i] * w[j];
            }
            w[i] = s;
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = w[i];
        }
        Ok(x)
    }
}

pub fn lu_solve(factors: &LuFactors, rhs: &[f64]) -> Result<Vec<f64>, DenseError> {
    factors.solve(rhs)
}

/// `f = H⁻ᵀ e_m` for the square part of a Hessenberg matrix.
pub fn solve_f(h: &DenseMatrix) -> Result<Vec<f64>, DenseError> {
    if !h.is_square() {
        return Err(DenseError::NotSquare {
            rows: h.rows,
            cols: h.cols,
        });
    }
    let m = h.rows;
    let mut e_m = vec![0.0; m];
    if m > 0 {
        e_m[m - 1] = 1.0;
    }
    lu_factor(h)?.solve_transpose(&e_m)
}

/// Orthonormalizes the columns in place with two passes of modified
/// Gram-Schmidt. Columns whose norm collapses below `rank_tol` times their
/// original norm are reported as a rank loss.
pub fn orthonormalize_columns(columns: &mut [Vec<f64>], rank_tol: f64) -> Result<(), DenseError> {
    for j in 0..columns.len() {
        let (done, rest) = columns.split_at_mut(j);
        let col = &mut rest[0];
        let original = norm2(col);
        for _ in 0..2 {
            for q in done.iter() {
                let h = dot(q, col);
                axpy(-h, q, col);
            }
        }
        let nrm = norm2(col);
        if original == 0.0 || nrm <= rank_tol * original {
            return Err(DenseError::RankLoss {
                rank: j,
                requested: columns.len(),
            });
        }
        col.iter_mut().for_each(|v| *v /= nrm);
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub(crate) fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
