use super::KrylovError;
use crate::blocksparse::BlockSparseMatrix;
use crate::dense::{axpy, DenseMatrix};
use crate::partition::{dot_deterministic, Partition};

/// Inner products with a fixed summation order tied to a partition.
#[derive(Debug, Clone)]
pub struct Reducer {
    part: Partition,
    b: usize,
}

impl Reducer {
    pub fn new(part: Partition, block_size: usize) -> Self {
        Self { part, b: block_size }
    }

    /// Sequential reduction over all rows of `a`.
    pub fn single(a: &BlockSparseMatrix) -> Self {
        Self::new(Partition::single(a.n_block_rows()), a.block_size())
    }

    pub fn partition(&self) -> &Partition {
        &self.part
    }

    #[inline]
    pub fn dot(&self, x: &[f64], y: &[f64]) -> f64 {
        dot_deterministic(x, y, &self.part, self.b).expect("vectors sized to the partition")
    }

    #[inline]
    pub fn norm(&self, x: &[f64]) -> f64 {
        self.dot(x, x).sqrt()
    }
}

/// Orthonormal basis `V`, optional preconditioned vectors `Z` and the
/// Hessenberg-like matrix `H̄` with `A Z = V H̄`.
#[derive(Debug, Clone)]
pub struct ArnoldiBasis {
    v: Vec<Vec<f64>>,
    z: Option<Vec<Vec<f64>>>,
    h: Vec<Vec<f64>>,
    breakdown: bool,
}

/// Result of one Arnoldi step.
#[derive(Debug, Clone, PartialEq)]
pub struct ArnoldiStep {
    /// New column of `H̄` above the subdiagonal (rows `0..=j`).
    pub column: Vec<f64>,
    pub h_sub: f64,
    /// `‖A z_j‖` before orthogonalization.
    pub az_norm: f64,
    pub breakdown: bool,
    /// Products with `A`, including those spent inside the preconditioner.
    pub mvps: usize,
}

/// Relative size of `h_{j+1,j}` below which the step is a happy breakdown.
pub const BREAKDOWN_TOL: f64 = 1e-14;

impl ArnoldiBasis {
    /// Starts from a unit vector.
    pub fn new(v1: Vec<f64>, store_z: bool) -> Self {
        Self {
            v: vec![v1],
            z: store_z.then(Vec::new),
            h: Vec::new(),
            breakdown: false,
        }
    }

    /// Rebuilds the state after a deflated restart: `hbar` is
    /// `(k+1) x k` and `v` holds `k + 1` vectors.
    pub fn from_parts(v: Vec<Vec<f64>>, z: Option<Vec<Vec<f64>>>, hbar: &DenseMatrix) -> Self {
        debug_assert_eq!(v.len(), hbar.rows());
        let h = (0..hbar.cols()).map(|j| hbar.column(j)).collect();
        Self {
            v,
            z,
            h,
            breakdown: false,
        }
    }

    /// Number of columns of `H̄`.
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.v
    }

    pub fn preconditioned(&self) -> Option<&[Vec<f64>]> {
        self.z.as_deref()
    }

    pub fn is_breakdown(&self) -> bool {
        self.breakdown
    }

    /// `(len + 1) x len`; the last row is zero after a breakdown.
    pub fn hbar(&self) -> DenseMatrix {
        let n = self.len();
        let mut h = DenseMatrix::zeros(n + 1, n);
        for (j, col) in self.h.iter().enumerate() {
            for (i, &v) in col.iter().enumerate().take(n + 1) {
                h[(i, j)] = v;
            }
        }
        h
    }
}

/// One flexible Arnoldi step: `z_j = precondition(v_j)`, `w = A z_j`, then
/// `passes` rounds of modified Gram-Schmidt against every basis vector.
pub fn arnoldi_step(
    ws: &mut ArnoldiBasis,
    a: &BlockSparseMatrix,
    precondition: &mut dyn FnMut(&[f64], &mut [f64]) -> Result<usize, KrylovError>,
    passes: usize,
    reducer: &Reducer,
) -> Result<ArnoldiStep, KrylovError> {
    let j = ws.len();
    if ws.breakdown || ws.v.len() != j + 1 {
        return Err(KrylovError::InvalidConfig("Arnoldi basis cannot be extended".into()));
    }
    let n = a.dim();
    let mut z = vec![0.0; n];
    let mut mvps = precondition(&ws.v[j], &mut z)?;
    let mut w = vec![0.0; n];
    a.spmv_into(&z, &mut w)?;
    mvps += 1;
    let az_norm = reducer.norm(&w);
    let mut column = vec![0.0; j + 1];
    for _ in 0..passes.max(1) {
        for (i, vi) in ws.v.iter().enumerate() {
            let h = reducer.dot(vi, &w);
            axpy(-h, vi, &mut w);
            column[i] += h;
        }
    }
    let h_sub = reducer.norm(&w);
    let breakdown = !(h_sub > BREAKDOWN_TOL * az_norm);
    let h_sub = if breakdown { 0.0 } else { h_sub };
    let mut stored = column.clone();
    stored.push(h_sub);
    ws.h.push(stored);
    if let Some(zs) = ws.z.as_mut() {
        zs.push(z);
    }
    if breakdown {
        ws.breakdown = true;
    } else {
        w.iter_mut().for_each(|x| *x /= h_sub);
        ws.v.push(w);
    }
    Ok(ArnoldiStep {
        column,
        h_sub,
        az_norm,
        breakdown,
        mvps,
    })
}

/// `‖A Z − V H̄‖_F / (‖A‖_F ‖Z‖_F)`.
pub fn relation_residual(a: &BlockSparseMatrix, z: &[Vec<f64>], v: &[Vec<f64>], hbar: &DenseMatrix) -> f64 {
    let mut num = 0.0;
    let mut zn = 0.0;
    for (j, zj) in z.iter().enumerate() {
        let mut r = a.spmv(zj).expect("basis sized to the matrix");
        for (i, vi) in v.iter().enumerate().take(hbar.rows()) {
            axpy(-hbar[(i, j)], vi, &mut r);
        }
        num += r.iter().map(|x| x * x).sum::<f64>();
        zn += zj.iter().map(|x| x * x).sum::<f64>();
    }
    let denom = a.frobenius_norm() * zn.sqrt();
    if denom == 0.0 {
        0.0
    } else {
        num.sqrt() / denom
    }
}

/// `‖VᵀV − I‖_F`.
pub fn orthogonality(v: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for (i, vi) in v.iter().enumerate() {
        for (j, vj) in v.iter().enumerate() {
            let d: f64 = vi.iter().zip(vj).map(|(a, b)| a * b).sum();
            let e = if i == j { d - 1.0 } else { d };
            s += e * e;
        }
    }
    s.sqrt()
}
