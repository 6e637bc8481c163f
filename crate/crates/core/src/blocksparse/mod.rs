//! Block compressed-sparse-row storage of dense `b x b` blocks.
//!
//! Every block row stores its diagonal block, even when it is numerically
//! zero; the preconditioners rely on it.

mod generate;
mod io;
mod scaling;

use std::collections::BTreeMap;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dense::{block, DenseMatrix};

pub use generate::{
    clustered_spectrum, generate_convection_diffusion, generate_prescribed_spectrum,
    ConvectionDiffusion, PrescribedSpectrum,
};
pub use io::{
    read_bsr_binary, read_matrix_market, read_matrix_market_matrix, read_mm_vector,
    write_bsr_binary, write_matrix_market, write_mm_vector,
};
pub use scaling::{equilibrate, row_norms, ScalingPair};

#[derive(Debug, Error)]
pub enum BlockSparseError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid block structure: {0}")]
    InvalidStructure(String),
    #[error("block row {row} has no diagonal block")]
    MissingDiagonal { row: usize },
    #[error("non-finite value in block {block}")]
    NonFinite { block: usize },
    #[error("scalar row {row} has zero 1-norm")]
    ZeroRow { row: usize },
    #[error("scalar column {col} has zero 1-norm")]
    ZeroColumn { col: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("block size {block_size} does not divide dimension {dim}")]
    BlockSizeMismatch { dim: usize, block_size: usize },
    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),
    #[error("eigenvalue {index} is zero")]
    ZeroEigenvalue { index: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSparseMatrix {
    n: usize,
    b: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    blocks: Vec<f64>,
    diag: Vec<usize>,
}

impl BlockSparseMatrix {
    /// Validates and wraps raw BSR arrays. Blocks are row-major.
    pub fn new(
        n: usize,
        b: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        blocks: Vec<f64>,
    ) -> Result<Self, BlockSparseError> {
        if b == 0 {
            return Err(BlockSparseError::InvalidStructure("block size must be positive".into()));
        }
        if row_ptr.len() != n + 1 || row_ptr[0] != 0 {
            return Err(BlockSparseError::InvalidStructure(format!(
                "row offsets must have length {} and start at 0",
                n + 1
            )));
        }
        if row_ptr.windows(2).any(|w| w[1] < w[0]) {
            return Err(BlockSparseError::InvalidStructure("row offsets decrease".into()));
        }
        let nnzb = row_ptr[n];
        if col_idx.len() != nnzb {
            return Err(BlockSparseError::DimensionMismatch {
                expected: nnzb,
                found: col_idx.len(),
            });
        }
        if blocks.len() != nnzb * b * b {
            return Err(BlockSparseError::DimensionMismatch {
                expected: nnzb * b * b,
                found: blocks.len(),
            });
        }
        let mut diag = Vec::with_capacity(n);
        for i in 0..n {
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if cols.windows(2).any(|w| w[1] <= w[0]) {
                return Err(BlockSparseError::InvalidStructure(format!(
                    "column indices of row {i} are not strictly increasing"
                )));
            }
            if cols.last().is_some_and(|&c| c >= n) {
                return Err(BlockSparseError::InvalidStructure(format!(
                    "column index out of range in row {i}"
                )));
            }
            match cols.binary_search(&i) {
                Ok(p) => diag.push(row_ptr[i] + p),
                Err(_) => return Err(BlockSparseError::MissingDiagonal { row: i }),
            }
        }
        let bb = b * b;
        if let Some(pos) = blocks.iter().position(|v| !v.is_finite()) {
            return Err(BlockSparseError::NonFinite { block: pos / bb });
        }
        Ok(Self {
            n,
            b,
            row_ptr,
            col_idx,
            blocks,
            diag,
        })
    }

    pub fn identity(n: usize, b: usize) -> Self {
        let mut builder = BsrBuilder::new(n, b);
        let mut eye = vec![0.0; b * b];
        for k in 0..b {
            eye[k * b + k] = 1.0;
        }
        for i in 0..n {
            builder.add_block(i, i, &eye);
        }
        builder.build().expect("identity is valid")
    }

    /// Groups a dense matrix into blocks, storing every block with a nonzero
    /// entry plus all diagonal blocks.
    pub fn from_dense(a: &DenseMatrix, b: usize) -> Result<Self, BlockSparseError> {
        if !a.is_square() {
            return Err(BlockSparseError::DimensionMismatch {
                expected: a.rows(),
                found: a.cols(),
            });
        }
        if b == 0 || a.rows() % b != 0 {
            return Err(BlockSparseError::BlockSizeMismatch {
                dim: a.rows(),
                block_size: b,
            });
        }
        let n = a.rows() / b;
        let mut builder = BsrBuilder::new(n, b);
        let mut blk = vec![0.0; b * b];
        for bi in 0..n {
            for bj in 0..n {
                let mut any = bi == bj;
                for r in 0..b {
                    for c in 0..b {
                        let v = a[(bi * b + r, bj * b + c)];
                        blk[r * b + c] = v;
                        any |= v != 0.0;
                    }
                }
                if any {
                    builder.add_block(bi, bj, &blk);
                }
            }
        }
        builder.build()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let dim = self.dim();
        let b = self.b;
        let mut d = DenseMatrix::zeros(dim, dim);
        for i in 0..self.n {
            for pos in self.row_range(i) {
                let j = self.col_idx[pos];
                let blk = self.block(pos);
                for r in 0..b {
                    for c in 0..b {
                        d[(i * b + r, j * b + c)] = blk[r * b + c];
                    }
                }
            }
        }
        d
    }

    #[inline]
    pub fn n_block_rows(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn block_size(&self) -> usize {
        self.b
    }

    /// Scalar dimension `n * b`.
    #[inline]
    pub fn dim(&self) -> usize {
        self.n * self.b
    }

    pub fn nnz_blocks(&self) -> usize {
        self.col_idx.len()
    }

    /// Stored scalar entries, counting explicit zeros inside blocks.
    pub fn nnz(&self) -> usize {
        self.col_idx.len() * self.b * self.b
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn blocks(&self) -> &[f64] {
        &self.blocks
    }

    #[inline]
    pub fn row_range(&self, i: usize) -> Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    #[inline]
    pub fn block(&self, pos: usize) -> &[f64] {
        let bb = self.b * self.b;
        &self.blocks[pos * bb..(pos + 1) * bb]
    }

    #[inline]
    pub fn block_mut(&mut self, pos: usize) -> &mut [f64] {
        let bb = self.b * self.b;
        &mut self.blocks[pos * bb..(pos + 1) * bb]
    }

    /// Storage position of block `(i, j)`, if present.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_range(i);
        self.col_idx[r.clone()].binary_search(&j).ok().map(|p| r.start + p)
    }

    #[inline]
    pub fn diag_pos(&self, i: usize) -> usize {
        self.diag[i]
    }

    #[inline]
    pub fn diag_block(&self, i: usize) -> &[f64] {
        self.block(self.diag[i])
    }

    /// `y = A x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>, BlockSparseError> {
        let mut y = vec![0.0; self.dim()];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    /// `y = A x`. Each block row is accumulated in storage order, so the
    /// result does not depend on how rows are spread across threads.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<(), BlockSparseError> {
        let dim = self.dim();
        if x.len() != dim {
            return Err(BlockSparseError::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        if y.len() != dim {
            return Err(BlockSparseError::DimensionMismatch {
                expected: dim,
                found: y.len(),
            });
        }
        let b = self.b;
        y.par_chunks_mut(b)
            .with_min_len(256)
            .enumerate()
            .for_each(|(i, yi)| {
                yi.iter_mut().for_each(|v| *v = 0.0);
                for pos in self.row_range(i) {
                    let j = self.col_idx[pos];
                    block::gemv_add(self.block(pos), &x[j * b..(j + 1) * b], yi, b);
                }
            });
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let b = self.b;
        let mut counts = vec![0usize; self.n + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for i in 0..self.n {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let nnzb = self.nnz_blocks();
        let mut col_idx = vec![0; nnzb];
        let mut blocks = vec![0.0; nnzb * b * b];
        for i in 0..self.n {
            for pos in self.row_range(i) {
                let j = self.col_idx[pos];
                let dst = next[j];
                next[j] += 1;
                col_idx[dst] = i;
                let src = self.block(pos);
                let out = &mut blocks[dst * b * b..(dst + 1) * b * b];
                for r in 0..b {
                    for c in 0..b {
                        out[c * b + r] = src[r * b + c];
                    }
                }
            }
        }
        let diag = (0..self.n)
            .map(|i| {
                let r = row_ptr[i]..row_ptr[i + 1];
                r.start + col_idx[r].binary_search(&i).expect("diagonal present")
            })
            .collect();
        Self {
            n: self.n,
            b,
            row_ptr,
            col_idx,
            blocks,
            diag,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.blocks.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Block-row adjacency of the symmetrized pattern, self loops removed,
    /// each list sorted ascending.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for pos in self.row_range(i) {
                let j = self.col_idx[pos];
                if i != j {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Restriction `R A Rᵀ` onto a sorted list of block rows, with local
    /// indices following the order of `rows`.
    pub fn principal_submatrix(&self, rows: &[usize]) -> Self {
        debug_assert!(rows.windows(2).all(|w| w[0] < w[1]));
        let mut local = vec![usize::MAX; self.n];
        for (l, &g) in rows.iter().enumerate() {
            local[g] = l;
        }
        let bb = self.b * self.b;
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut blocks = Vec::new();
        for &g in rows {
            for pos in self.row_range(g) {
                let lj = local[self.col_idx[pos]];
                if lj != usize::MAX {
                    col_idx.push(lj);
                    blocks.extend_from_slice(&self.blocks[pos * bb..(pos + 1) * bb]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self::new(rows.len(), self.b, row_ptr, col_idx, blocks).expect("restriction of valid matrix")
    }
}

/// Accumulating builder: blocks added twice at the same position are summed.
#[derive(Debug, Clone)]
pub struct BsrBuilder {
    n: usize,
    b: usize,
    entries: BTreeMap<(usize, usize), Vec<f64>>,
}

impl BsrBuilder {
    pub fn new(n: usize, b: usize) -> Self {
        Self {
            n,
            b,
            entries: BTreeMap::new(),
        }
    }

    pub fn add_block(&mut self, i: usize, j: usize, blk: &[f64]) {
        assert_eq!(blk.len(), self.b * self.b);
        let slot = self
            .entries
            .entry((i, j))
            .or_insert_with(|| vec![0.0; blk.len()]);
        for (s, v) in slot.iter_mut().zip(blk) {
            *s += v;
        }
    }

    /// Adds a single scalar at block `(i, j)`, local position `(r, c)`.
    pub fn add_scalar(&mut self, i: usize, j: usize, r: usize, c: usize, v: f64) {
        let bb = self.b * self.b;
        let slot = self.entries.entry((i, j)).or_insert_with(|| vec![0.0; bb]);
        slot[r * self.b + c] += v;
    }

    /// Finishes the matrix, inserting zero diagonal blocks where absent.
    pub fn build(mut self) -> Result<BlockSparseMatrix, BlockSparseError> {
        let bb = self.b * self.b;
        for i in 0..self.n {
            self.entries.entry((i, i)).or_insert_with(|| vec![0.0; bb]);
        }
        let mut row_ptr = vec![0; self.n + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut blocks = Vec::with_capacity(self.entries.len() * bb);
        for (&(i, j), blk) in &self.entries {
            if i >= self.n || j >= self.n {
                return Err(BlockSparseError::InvalidStructure(format!(
                    "block ({i}, {j}) outside a {0}x{0} block grid",
                    self.n
                )));
            }
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            blocks.extend_from_slice(blk);
        }
        for i in 0..self.n {
            row_ptr[i + 1] += row_ptr[i];
        }
        BlockSparseMatrix::new(self.n, self.b, row_ptr, col_idx, blocks)
    }
}

/// Where a problem came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    ConvectionDiffusion(ConvectionDiffusion),
    PrescribedSpectrum(PrescribedSpectrum),
    File { path: String, block_size: usize },
    Identity { n: usize, block_size: usize },
}

/// A linear system `A x = b` with an optional known solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub matrix: BlockSparseMatrix,
    pub rhs: Vec<f64>,
    pub reference: Option<Vec<f64>>,
    pub provenance: Provenance,
}

impl ProblemInstance {
    /// Builds an instance whose right-hand side is `A x_ref`.
    pub fn with_reference(matrix: BlockSparseMatrix, reference: Vec<f64>, provenance: Provenance) -> Self {
        let rhs = matrix.spmv(&reference).expect("reference has matrix dimension");
        Self {
            matrix,
            rhs,
            reference: Some(reference),
            provenance,
        }
    }

    pub fn identity(n: usize, block_size: usize) -> Self {
        let matrix = BlockSparseMatrix::identity(n, block_size);
        let reference: Vec<f64> = (0..n * block_size).map(|i| 1.0 + (i % 7) as f64).collect();
        Self::with_reference(matrix, reference, Provenance::Identity { n, block_size })
    }
}

/// `NNZ = (1 + 2 s d) · n_elt · (n_eq · n_p)²`: stored entries of a
/// stencil Jacobian with `1 + 2 s d` points, ignoring boundaries.
pub fn estimate_nnz(n_elt: u64, n_eq: u64, n_p: u64, s: u64, d: u64) -> u64 {
    let blk = n_eq * n_p;
    (1 + 2 * s * d) * n_elt * blk * blk
}
