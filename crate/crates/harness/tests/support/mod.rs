//! Dense reference implementations used to check the sparse code.
#![allow(dead_code)]

use flexdr::blocksparse::{BlockSparseMatrix, BsrBuilder};
use flexdr::precond::Preconditioner;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn dense(a: &BlockSparseMatrix) -> DMatrix<f64> {
    let d = a.to_dense();
    DMatrix::from_row_slice(d.rows(), d.cols(), d.as_slice())
}

/// Block `(i, j)` of a dense matrix with `b x b` blocks.
fn blk(m: &DMatrix<f64>, i: usize, j: usize, b: usize) -> DMatrix<f64> {
    m.view((i * b, j * b), (b, b)).into_owned()
}

fn set_blk(m: &mut DMatrix<f64>, i: usize, j: usize, b: usize, v: &DMatrix<f64>) {
    m.view_mut((i * b, j * b), (b, b)).copy_from(v);
}

/// Block nonzero pattern.
pub fn block_pattern(a: &BlockSparseMatrix) -> Vec<Vec<bool>> {
    let n = a.n_block_rows();
    let mut p = vec![vec![false; n]; n];
    for (i, row) in p.iter_mut().enumerate() {
        for pos in a.row_range(i) {
            row[a.col_idx()[pos]] = true;
        }
    }
    p
}

/// Dense level-of-fill: `lev(i,j) = min(lev(i,j), lev(i,k) + lev(k,j) + 1)`
/// eliminating `k` in order. Entries above `k_max` are dropped.
pub fn fill_levels(pattern: &[Vec<bool>], k_max: usize) -> Vec<Vec<Option<usize>>> {
    let n = pattern.len();
    let inf = usize::MAX / 4;
    let mut lev: Vec<Vec<usize>> = pattern
        .iter()
        .map(|row| row.iter().map(|&nz| if nz { 0 } else { inf }).collect())
        .collect();
    for k in 0..n {
        for i in k + 1..n {
            if lev[i][k] > k_max {
                continue;
            }
            for j in k + 1..n {
                if lev[k][j] > k_max {
                    continue;
                }
                let l = lev[i][k] + lev[k][j] + 1;
                if l < lev[i][j] {
                    lev[i][j] = l;
                }
            }
        }
    }
    lev.into_iter()
        .map(|row| row.into_iter().map(|l| (l <= k_max).then_some(l)).collect())
        .collect()
}

/// Block incomplete LU restricted to `keep`; returns `(L, U)` with unit
/// block-lower `L`.
pub fn block_ilu(a: &DMatrix<f64>, b: usize, keep: &[Vec<bool>]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = keep.len();
    let mut w = DMatrix::zeros(n * b, n * b);
    for i in 0..n {
        for j in 0..n {
            if keep[i][j] {
                set_blk(&mut w, i, j, b, &blk(a, i, j, b));
            }
        }
    }
    let mut l = DMatrix::identity(n * b, n * b);
    for i in 0..n {
        for k in 0..i {
            if !keep[i][k] {
                continue;
            }
            let ukk_inv = blk(&w, k, k, b).try_inverse().expect("nonsingular pivot block");
            let lik = blk(&w, i, k, b) * ukk_inv;
            set_blk(&mut l, i, k, b, &lik);
            set_blk(&mut w, i, k, b, &DMatrix::zeros(b, b));
            for j in k + 1..n {
                if keep[i][j] {
                    let v = blk(&w, i, j, b) - &lik * blk(&w, k, j, b);
                    set_blk(&mut w, i, j, b, &v);
                }
            }
        }
    }
    (l, w)
}

/// `(L U)⁻¹` as an explicit matrix. `U` has full diagonal blocks, so it is
/// not triangular when `b > 1`.
pub fn ilu_inverse(l: &DMatrix<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
    (l * u).lu().try_inverse().expect("nonsingular factors")
}

/// Submatrix on the given block rows and columns.
pub fn block_submatrix(a: &DMatrix<f64>, rows: &[usize], b: usize) -> DMatrix<f64> {
    let n = rows.len();
    let mut s = DMatrix::zeros(n * b, n * b);
    for (li, &gi) in rows.iter().enumerate() {
        for (lj, &gj) in rows.iter().enumerate() {
            set_blk(&mut s, li, lj, b, &blk(a, gi, gj, b));
        }
    }
    s
}

/// Explicit matrix of a preconditioner, one unit vector at a time.
pub fn operator_matrix(m: &dyn Preconditioner) -> DMatrix<f64> {
    let n = m.dim();
    let mut out = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut z = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        m.apply(&e, &mut z).expect("apply");
        out.column_mut(j).copy_from_slice(&z);
        e[j] = 0.0;
    }
    out
}

pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

pub fn vec_rel_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// Random block matrix with `extra` off-diagonal blocks per row and
/// strictly dominant diagonal blocks.
pub fn random_dominant(n: usize, b: usize, extra: usize, seed: u64) -> BlockSparseMatrix {
    build_dominant(n, b, seed, |rng, i| {
        (0..extra).map(|_| rng.random_range(0..n)).filter(|&j| j != i).collect()
    })
}

/// Random block-tridiagonal matrix with dominant diagonal blocks.
pub fn random_tridiagonal(n: usize, b: usize, seed: u64) -> BlockSparseMatrix {
    build_dominant(n, b, seed, |_, i| {
        let mut c = Vec::new();
        if i > 0 {
            c.push(i - 1);
        }
        if i + 1 < n {
            c.push(i + 1);
        }
        c
    })
}

fn build_dominant(
    n: usize,
    b: usize,
    seed: u64,
    neighbours: impl Fn(&mut ChaCha8Rng, usize) -> Vec<usize>,
) -> BlockSparseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<(usize, Vec<f64>)>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut cols = neighbours(&mut rng, i);
        cols.sort_unstable();
        cols.dedup();
        let row = cols
            .into_iter()
            .map(|j| (j, (0..b * b).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect();
        rows.push(row);
    }
    let mut builder = BsrBuilder::new(n, b);
    for (i, row) in rows.iter().enumerate() {
        let mut abs_sum = vec![0.0; b];
        for (j, v) in row {
            builder.add_block(i, *j, v);
            for r in 0..b {
                abs_sum[r] += v[r * b..(r + 1) * b].iter().map(|x: &f64| x.abs()).sum::<f64>();
            }
        }
        let mut d: Vec<f64> = (0..b * b).map(|_| rng.random_range(-0.5..0.5)).collect();
        for r in 0..b {
            let off: f64 = (0..b).filter(|&c| c != r).map(|c| d[r * b + c].abs()).sum();
            d[r * b + r] = abs_sum[r] + off + 1.0 + rng.random_range(0.0..1.0);
        }
        builder.add_block(i, i, &d);
    }
    builder.build().expect("valid pattern")
}

pub fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}
