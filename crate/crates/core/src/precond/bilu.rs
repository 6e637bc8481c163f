use std::collections::BTreeMap;

use num_traits::Float;
use rayon::prelude::*;

use super::PrecondError;
use crate::blocksparse::BlockSparseMatrix;
use crate::dense::block;
use crate::partition::{restrict, OverlapMap};

/// Block pattern of one subdomain's factor, in local indices.
#[derive(Debug, Clone)]
struct LocalPattern {
    rows: Vec<usize>,
    owned: Vec<bool>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    levels: Vec<usize>,
    diag: Vec<usize>,
}

/// Factor values: `L` multipliers below the diagonal, `U` above it and the
/// inverted diagonal blocks of `U` on it.
#[derive(Debug, Clone)]
struct LocalValues<T> {
    vals: Vec<T>,
}

/// Block ILU(k) factors of every subdomain's extended slice.
#[derive(Debug, Clone)]
pub struct BiluFactors {
    n: usize,
    b: usize,
    k: usize,
    patterns: Vec<LocalPattern>,
    values: Vec<LocalValues<f64>>,
    reduced: Option<Vec<LocalValues<f32>>>,
}

/// Row-wise level-of-fill symbolic factorization at block granularity.
fn symbolic(a: &BlockSparseMatrix, k: usize) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let n = a.n_block_rows();
    let mut row_ptr = vec![0];
    let mut col_idx: Vec<usize> = Vec::new();
    let mut levels: Vec<usize> = Vec::new();
    // Upper parts of finished rows: (col, level), ascending.
    let mut upper: Vec<Vec<(usize, usize)>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row: BTreeMap<usize, usize> = a.row_range(i).map(|p| (a.col_idx()[p], 0)).collect();
        let mut cursor = 0;
        while let Some((&kk, &lik)) = row.range(cursor..i).next() {
            cursor = kk + 1;
            for &(j, lkj) in &upper[kk] {
                let lev = lik + lkj + 1;
                if lev <= k {
                    row.entry(j).and_modify(|l| *l = (*l).min(lev)).or_insert(lev);
                }
            }
        }
        upper.push(row.range(i + 1..).map(|(&j, &l)| (j, l)).collect());
        for (j, l) in row {
            col_idx.push(j);
            levels.push(l);
        }
        row_ptr.push(col_idx.len());
    }
    (row_ptr, col_idx, levels)
}

fn factor_local(
    a: &BlockSparseMatrix,
    pat: &LocalPattern,
    subdomain: usize,
) -> Result<LocalValues<f64>, PrecondError> {
    let b = a.block_size();
    let bb = b * b;
    let n = pat.rows.len();
    let mut vals = vec![0.0; pat.col_idx.len() * bb];
    for i in 0..n {
        let r = pat.row_ptr[i]..pat.row_ptr[i + 1];
        for pos in a.row_range(i) {
            let j = a.col_idx()[pos];
            let q = r.start + pat.col_idx[r.clone()].binary_search(&j).expect("pattern contains A");
            vals[q * bb..(q + 1) * bb].copy_from_slice(a.block(pos));
        }
    }
    let mut where_in_row = vec![usize::MAX; n];
    let mut lik = vec![0.0; bb];
    for i in 0..n {
        let r = pat.row_ptr[i]..pat.row_ptr[i + 1];
        for q in r.clone() {
            where_in_row[pat.col_idx[q]] = q;
        }
        for q in r.start..pat.diag[i] {
            let kk = pat.col_idx[q];
            // L_ik = A_ik inv(U_kk)
            let dk = pat.diag[kk];
            block::gemm(&vals[q * bb..(q + 1) * bb], &vals[dk * bb..(dk + 1) * bb], &mut lik, b);
            vals[q * bb..(q + 1) * bb].copy_from_slice(&lik);
            for qk in dk + 1..pat.row_ptr[kk + 1] {
                let target = where_in_row[pat.col_idx[qk]];
                if target == usize::MAX {
                    continue;
                }
                let (head, tail) = vals.split_at_mut(target * bb);
                let ukj = &head[qk * bb..(qk + 1) * bb];
                block::gemm_sub(&lik, ukj, &mut tail[..bb], b);
            }
        }
        let d = pat.diag[i];
        let inv = block::invert(&vals[d * bb..(d + 1) * bb], b).map_err(|_| PrecondError::SingularBlock {
            subdomain,
            row: pat.rows[i],
        })?;
        vals[d * bb..(d + 1) * bb].copy_from_slice(&inv);
        for q in r {
            where_in_row[pat.col_idx[q]] = usize::MAX;
        }
    }
    Ok(LocalValues { vals })
}

fn solve_local<T: Float>(pat: &LocalPattern, vals: &[T], b: usize, x: &mut [T]) {
    let bb = b * b;
    let n = pat.rows.len();
    let mut tmp = vec![T::zero(); b];
    for i in 0..n {
        for q in pat.row_ptr[i]..pat.diag[i] {
            let j = pat.col_idx[q];
            let (xj, xi) = split_pair(x, j, i, b);
            block::gemv_sub(&vals[q * bb..(q + 1) * bb], xj, xi, b);
        }
    }
    for i in (0..n).rev() {
        for q in pat.diag[i] + 1..pat.row_ptr[i + 1] {
            let j = pat.col_idx[q];
            let (xj, xi) = split_pair(x, j, i, b);
            block::gemv_sub(&vals[q * bb..(q + 1) * bb], xj, xi, b);
        }
        let d = pat.diag[i];
        block::gemv(&vals[d * bb..(d + 1) * bb], &x[i * b..(i + 1) * b], &mut tmp, b);
        x[i * b..(i + 1) * b].copy_from_slice(&tmp);
    }
}

/// Disjoint `(&x_j, &mut x_i)` block views.
#[inline]
fn split_pair<T>(x: &mut [T], j: usize, i: usize, b: usize) -> (&[T], &mut [T]) {
    if j < i {
        let (lo, hi) = x.split_at_mut(i * b);
        (&lo[j * b..(j + 1) * b], &mut hi[..b])
    } else {
        let (lo, hi) = x.split_at_mut(j * b);
        (&hi[..b], &mut lo[i * b..(i + 1) * b])
    }
}

impl BiluFactors {
    /// Factors `R_s A R_sᵀ` for every extended roster of `overlap`.
    pub fn factor(a: &BlockSparseMatrix, overlap: &OverlapMap, k: usize) -> Result<Self, PrecondError> {
        if k > 1 {
            return Err(PrecondError::InvalidFillLevel(k));
        }
        if overlap.owner().len() != a.n_block_rows() {
            return Err(PrecondError::DimensionMismatch {
                expected: a.n_block_rows(),
                found: overlap.owner().len(),
            });
        }
        let results: Vec<Result<(LocalPattern, LocalValues<f64>), PrecondError>> = (0..overlap.num_subdomains())
            .into_par_iter()
            .map(|s| {
                let rows = overlap.extended(s).to_vec();
                let local = a.principal_submatrix(&rows);
                let (row_ptr, col_idx, levels) = symbolic(&local, k);
                let diag = (0..rows.len())
                    .map(|i| row_ptr[i] + col_idx[row_ptr[i]..row_ptr[i + 1]].binary_search(&i).unwrap())
                    .collect();
                let owned = rows.iter().map(|&r| overlap.owner()[r] == s).collect();
                let pat = LocalPattern {
                    rows,
                    owned,
                    row_ptr,
                    col_idx,
                    levels,
                    diag,
                };
                let vals = factor_local(&local, &pat, s)?;
                Ok((pat, vals))
            })
            .collect();
        let mut patterns = Vec::new();
        let mut values = Vec::new();
        for r in results {
            let (p, v) = r?;
            patterns.push(p);
            values.push(v);
        }
        Ok(Self {
            n: a.n_block_rows(),
            b: a.block_size(),
            k,
            patterns,
            values,
            reduced: None,
        })
    }

    pub fn fill_level(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.n * self.b
    }

    /// Stored scalar entries over all subdomain factors.
    pub fn nnz(&self) -> usize {
        self.patterns.iter().map(|p| p.col_idx.len()).sum::<usize>() * self.b * self.b
    }

    /// Number of stored blocks in subdomain `s`.
    pub fn pattern_blocks(&self, s: usize) -> usize {
        self.patterns[s].col_idx.len()
    }

    /// Stored blocks of subdomain `s` as `(row, col, level)` with global
    /// block indices.
    pub fn pattern(&self, s: usize) -> Vec<(usize, usize, usize)> {
        let p = &self.patterns[s];
        (0..p.rows.len())
            .flat_map(|i| (p.row_ptr[i]..p.row_ptr[i + 1]).map(move |q| (p.rows[i], p.rows[p.col_idx[q]], p.levels[q])))
            .collect()
    }

    /// Largest fill level retained anywhere.
    pub fn max_level(&self) -> usize {
        self.patterns
            .iter()
            .flat_map(|p| p.levels.iter().copied())
            .max()
            .unwrap_or(0)
    }

    /// Prepares single-precision copies of the factors.
    pub fn enable_reduced(&mut self) {
        if self.reduced.is_none() {
            self.reduced = Some(
                self.values
                    .iter()
                    .map(|v| LocalValues {
                        vals: v.vals.iter().map(|&x| x as f32).collect(),
                    })
                    .collect(),
            );
        }
    }

    fn check(&self, v: usize, z: usize) -> Result<(), PrecondError> {
        for len in [v, z] {
            if len != self.dim() {
                return Err(PrecondError::DimensionMismatch {
                    expected: self.dim(),
                    found: len,
                });
            }
        }
        Ok(())
    }

    pub fn apply(&self, v: &[f64], z: &mut [f64]) -> Result<(), PrecondError> {
        self.check(v.len(), z.len())?;
        self.apply_with(&self.values, v, z);
        Ok(())
    }

    /// Applies the single-precision factors. Panics unless
    /// [`enable_reduced`](Self::enable_reduced) was called.
    pub fn apply_reduced(&self, v: &[f32], z: &mut [f32]) -> Result<(), PrecondError> {
        self.check(v.len(), z.len())?;
        let vals = self.reduced.as_ref().expect("reduced factors enabled");
        self.apply_with(vals, v, z);
        Ok(())
    }

    fn apply_with<T: Float + Send + Sync>(&self, vals: &[LocalValues<T>], v: &[T], z: &mut [T]) {
        let b = self.b;
        let locals: Vec<Vec<T>> = self
            .patterns
            .par_iter()
            .zip(vals.par_iter())
            .map(|(pat, lv)| {
                let mut x = restrict(v, &pat.rows, b);
                solve_local(pat, &lv.vals, b, &mut x);
                x
            })
            .collect();
        for (pat, x) in self.patterns.iter().zip(&locals) {
            for (l, &g) in pat.rows.iter().enumerate() {
                if pat.owned[l] {
                    z[g * b..(g + 1) * b].copy_from_slice(&x[l * b..(l + 1) * b]);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocksparse::{generate_convection_diffusion, BsrBuilder, ConvectionDiffusion};
    use crate::dense::DenseMatrix;
    use crate::partition::{extend_overlap, partition_bfs, Partition};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn to_na(d: &DenseMatrix) -> DMatrix<f64> {
        DMatrix::from_fn(d.rows(), d.cols(), |i, j| d[(i, j)])
    }

    fn block_tridiagonal(n: usize, b: usize, seed: u64) -> BlockSparseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut builder = BsrBuilder::new(n, b);
        for i in 0..n {
            for j in i.saturating_sub(1)..(i + 2).min(n) {
                let mut blk: Vec<f64> = (0..b * b).map(|_| rng.random_range(-1.0..1.0)).collect();
                if i == j {
                    for d in 0..b {
                        blk[d * b + d] += 4.0 * b as f64;
                    }
                }
                builder.add_block(i, j, &blk);
            }
        }
        builder.build().unwrap()
    }

    fn single(a: &BlockSparseMatrix, k: usize) -> BiluFactors {
        let part = Partition::single(a.n_block_rows());
        BiluFactors::factor(a, &extend_overlap(a, &part, 0), k).unwrap()
    }

    /// Dense `M⁻¹` by applying to every unit vector.
    fn dense_inverse(f: &BiluFactors) -> DMatrix<f64> {
        let n = f.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut z = vec![0.0; n];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            f.apply(&e, &mut z).unwrap();
            for i in 0..n {
                m[(i, j)] = z[i];
            }
        }
        m
    }

    #[test]
    fn block_diagonal_is_exact_inverse() {
        let mut builder = BsrBuilder::new(3, 2);
        builder.add_block(0, 0, &[2.0, 1.0, 0.0, 3.0]);
        builder.add_block(1, 1, &[1.0, 0.0, 4.0, 1.0]);
        builder.add_block(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let a = builder.build().unwrap();
        for k in [0, 1] {
            let f = single(&a, k);
            let prod = dense_inverse(&f) * to_na(&a.to_dense());
            assert!((prod - DMatrix::identity(6, 6)).norm() < 1e-14);
        }
    }

    #[test]
    fn tridiagonal_has_no_fill_and_is_exact() {
        let a = block_tridiagonal(12, 3, 1);
        let f = single(&a, 0);
        assert_eq!(f.pattern_blocks(0), a.nnz_blocks());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v: Vec<f64> = (0..36).map(|_| rng.random_range(-1.0..1.0)).collect();
        let av = a.spmv(&v).unwrap();
        let mut z = vec![0.0; 36];
        f.apply(&av, &mut z).unwrap();
        let err: f64 = z.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let nv: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(err <= 1e-12 * nv);
    }

    #[test]
    fn fill_one_improves_grid_stencil() {
        let a = generate_convection_diffusion(&ConvectionDiffusion {
            nx: 10,
            ny: 10,
            peclet: 5.0,
            block_size: 2,
            seed: 3,
            periodic: false,
        })
        .unwrap()
        .matrix;
        let f0 = single(&a, 0);
        let f1 = single(&a, 1);
        assert!(f1.pattern_blocks(0) > f0.pattern_blocks(0));
        assert_eq!(f0.max_level(), 0);
        assert_eq!(f1.max_level(), 1);
        let ad = to_na(&a.to_dense());
        let n = a.dim();
        let e0 = (DMatrix::identity(n, n) - dense_inverse(&f0) * &ad).norm();
        let e1 = (DMatrix::identity(n, n) - dense_inverse(&f1) * &ad).norm();
        assert!(e1 < e0, "{e1} vs {e0}");
    }

    #[test]
    fn dense_block_matrix_gives_exact_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 4;
        let b = 2;
        let d = DenseMatrix::from_row_major(
            n * b,
            n * b,
            (0..64)
                .map(|k| rng.random_range(-1.0..1.0) + if k % 9 == 0 { 6.0 } else { 0.0 })
                .collect(),
        )
        .unwrap();
        let a = BlockSparseMatrix::from_dense(&d, b).unwrap();
        let f = single(&a, 0);
        let prod = dense_inverse(&f) * to_na(&d);
        assert!((prod - DMatrix::identity(8, 8)).norm() < 1e-12);
    }

    #[test]
    fn identity_under_any_partition() {
        let a = BlockSparseMatrix::identity(10, 2);
        let part = Partition::from_owner((0..10).map(|i| i % 3).collect(), 3).unwrap();
        let f = BiluFactors::factor(&a, &extend_overlap(&a, &part, 1), 0).unwrap();
        let v: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let mut z = vec![0.0; 20];
        f.apply(&v, &mut z).unwrap();
        assert_eq!(z, v);
    }

    #[test]
    fn two_subdomain_ras_matches_dense_assembly() {
        let a = block_tridiagonal(10, 2, 5);
        let part = partition_bfs(&a, 2, None).unwrap();
        let ov = extend_overlap(&a, &part, 1);
        let f = BiluFactors::factor(&a, &ov, 0).unwrap();
        let ad = a.to_dense();
        let b = 2;
        let dim = a.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        // Σ R̃ᵢᵀ (Rᵢ A Rᵢᵀ)⁻¹ Rᵢ v
        let mut want = vec![0.0; dim];
        for s in 0..2 {
            let rows = ov.extended(s);
            let idx: Vec<usize> = rows.iter().flat_map(|&r| r * b..(r + 1) * b).collect();
            let local = DMatrix::from_fn(idx.len(), idx.len(), |i, j| ad[(idx[i], idx[j])]);
            let rhs = nalgebra::DVector::from_iterator(idx.len(), idx.iter().map(|&g| v[g]));
            let sol = local.lu().solve(&rhs).unwrap();
            for (l, &g) in idx.iter().enumerate() {
                if part.owner()[g / b] == s {
                    want[g] = sol[l];
                }
            }
        }
        let mut z = vec![0.0; dim];
        f.apply(&v, &mut z).unwrap();
        for (u, w) in z.iter().zip(&want) {
            assert!((u - w).abs() <= 1e-12 * (1.0 + w.abs()));
        }
    }

    #[test]
    fn singular_pivot_reports_location() {
        let mut builder = BsrBuilder::new(3, 1);
        builder.add_block(0, 0, &[1.0]);
        builder.add_block(1, 1, &[0.0]);
        builder.add_block(2, 2, &[1.0]);
        let a = builder.build().unwrap();
        let part = Partition::single(3);
        let err = BiluFactors::factor(&a, &extend_overlap(&a, &part, 0), 0).unwrap_err();
        assert!(matches!(err, PrecondError::SingularBlock { subdomain: 0, row: 1 }));
    }
}
