use serde::{Deserialize, Serialize};

use super::{BlockSparseError, BlockSparseMatrix};

/// Diagonal scalings `D_r A D_c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPair {
    pub row: Vec<f64>,
    pub col: Vec<f64>,
}

impl ScalingPair {
    /// Maps a solution of the scaled system back: `x = col ⊙ x_scaled`.
    pub fn unscale_solution(&self, x_scaled: &[f64]) -> Vec<f64> {
        x_scaled.iter().zip(&self.col).map(|(x, c)| x * c).collect()
    }
}

/// One pass normalizing scalar rows to unit 1-norm, then one pass on columns.
pub fn equilibrate(
    a: &BlockSparseMatrix,
    rhs: &[f64],
) -> Result<(BlockSparseMatrix, Vec<f64>, ScalingPair), BlockSparseError> {
    let dim = a.dim();
    if rhs.len() != dim {
        return Err(BlockSparseError::DimensionMismatch {
            expected: dim,
            found: rhs.len(),
        });
    }
    let b = a.block_size();
    let mut out = a.clone();

    let mut row_norm = vec![0.0; dim];
    for i in 0..a.n_block_rows() {
        for pos in a.row_range(i) {
            let blk = a.block(pos);
            for r in 0..b {
                row_norm[i * b + r] += blk[r * b..(r + 1) * b].iter().map(|v| v.abs()).sum::<f64>();
            }
        }
    }
    if let Some(row) = row_norm.iter().position(|&v| v == 0.0) {
        return Err(BlockSparseError::ZeroRow { row });
    }
    let row: Vec<f64> = row_norm.iter().map(|v| 1.0 / v).collect();
    for i in 0..a.n_block_rows() {
        for pos in a.row_range(i) {
            let blk = out.block_mut(pos);
            for r in 0..b {
                blk[r * b..(r + 1) * b].iter_mut().for_each(|v| *v *= row[i * b + r]);
            }
        }
    }

    let mut col_norm = vec![0.0; dim];
    for i in 0..out.n_block_rows() {
        for pos in out.row_range(i) {
            let j = out.col_idx()[pos];
            let blk = out.block(pos);
            for r in 0..b {
                for c in 0..b {
                    col_norm[j * b + c] += blk[r * b + c].abs();
                }
            }
        }
    }
    if let Some(col) = col_norm.iter().position(|&v| v == 0.0) {
        return Err(BlockSparseError::ZeroColumn { col });
    }
    let col: Vec<f64> = col_norm.iter().map(|v| 1.0 / v).collect();
    for i in 0..out.n_block_rows() {
        for pos in out.row_range(i) {
            let j = out.col_idx()[pos];
            let blk = out.block_mut(pos);
            for r in 0..b {
                for c in 0..b {
                    blk[r * b + c] *= col[j * b + c];
                }
            }
        }
    }
    let scaled_rhs = rhs.iter().zip(&row).map(|(v, s)| v * s).collect();
    Ok((out, scaled_rhs, ScalingPair { row, col }))
}

/// 1-norm of every scalar row.
pub fn row_norms(a: &BlockSparseMatrix) -> Vec<f64> {
    let b = a.block_size();
    let mut norms = vec![0.0; a.dim()];
    for i in 0..a.n_block_rows() {
        for pos in a.row_range(i) {
            let blk = a.block(pos);
            for r in 0..b {
                norms[i * b + r] += blk[r * b..(r + 1) * b].iter().map(|v| v.abs()).sum::<f64>();
            }
        }
    }
    norms
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocksparse::{generate_convection_diffusion, BsrBuilder, ConvectionDiffusion};
    use crate::dense::DenseMatrix;

    #[test]
    fn identity_has_unit_scales() {
        let a = BlockSparseMatrix::identity(5, 2);
        let (s, rhs, pair) = equilibrate(&a, &[1.0; 10]).unwrap();
        assert_eq!(s, a);
        assert_eq!(rhs, vec![1.0; 10]);
        assert!(pair.row.iter().chain(&pair.col).all(|&v| v == 1.0));
    }

    #[test]
    fn diagonal_example() {
        let d = DenseMatrix::from_diagonal(&[10.0, 0.1]);
        let a = BlockSparseMatrix::from_dense(&d, 1).unwrap();
        let (s, _, pair) = equilibrate(&a, &[1.0, 1.0]).unwrap();
        assert_eq!(pair.row, vec![0.1, 10.0]);
        assert_eq!(s, BlockSparseMatrix::identity(2, 1));
    }

    #[test]
    fn zero_row_rejected() {
        let mut builder = BsrBuilder::new(2, 1);
        builder.add_block(0, 0, &[1.0]);
        let a = builder.build().unwrap();
        assert!(matches!(equilibrate(&a, &[1.0, 1.0]), Err(BlockSparseError::ZeroRow { row: 1 })));
    }

    #[test]
    fn seeded_norm_ratio_and_solution_recovery() {
        let inst = generate_convection_diffusion(&ConvectionDiffusion {
            nx: 12,
            ny: 12,
            peclet: 20.0,
            block_size: 3,
            seed: 5,
            periodic: false,
        })
        .unwrap();
        let (s, rhs, pair) = equilibrate(&inst.matrix, &inst.rhs).unwrap();
        let norms = row_norms(&s);
        let max = norms.iter().cloned().fold(0.0, f64::max);
        let min = norms.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min <= 4.0, "ratio {}", max / min);
        assert!(norms.iter().all(|&v| (0.5..=2.0).contains(&v)));

        // The scaled system is solved by D_c^{-1} x_ref.
        let x_ref = inst.reference.unwrap();
        let y: Vec<f64> = x_ref.iter().zip(&pair.col).map(|(x, c)| x / c).collect();
        let sy = s.spmv(&y).unwrap();
        for (u, v) in sy.iter().zip(&rhs) {
            assert!((u - v).abs() <= 1e-12 * (1.0 + v.abs()));
        }
        let back = pair.unscale_solution(&y);
        for (u, v) in back.iter().zip(&x_ref) {
            assert!((u - v).abs() <= 1e-14 * (1.0 + v.abs()));
        }
    }
}
