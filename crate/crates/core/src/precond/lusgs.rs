use num_traits::Float;

use super::PrecondError;
use crate::blocksparse::BlockSparseMatrix;
use crate::dense::block;
use crate::partition::OverlapMap;

#[derive(Debug, Clone)]
struct Values<T> {
    blocks: Vec<T>,
    diag_lu: Vec<T>,
}

/// Symmetric block Gauss-Seidel relaxation on `L + D̃ + U`, where `D̃` is the
/// block diagonal shifted by `σ_i / cfl`.
#[derive(Debug, Clone)]
pub struct LusgsOperator {
    matrix: BlockSparseMatrix,
    sweeps: usize,
    cfl: f64,
    shifts: Vec<f64>,
    piv: Vec<usize>,
    values: Values<f64>,
    reduced: Option<Values<f32>>,
    /// Per subdomain: extended rows and which of them are owned.
    sub_rows: Vec<Vec<usize>>,
    sub_owned: Vec<Vec<bool>>,
}

impl LusgsOperator {
    /// `volumes` defaults to 1 on every block row. `cfl = ∞` leaves the
    /// diagonal untouched.
    pub fn setup(
        a: &BlockSparseMatrix,
        overlap: &OverlapMap,
        sweeps: usize,
        cfl: f64,
        volumes: Option<&[f64]>,
    ) -> Result<Self, PrecondError> {
        if sweeps < 2 || sweeps % 2 != 0 {
            return Err(PrecondError::InvalidSweeps(sweeps));
        }
        if cfl.is_nan() || cfl <= 0.0 {
            return Err(PrecondError::InvalidCfl(cfl));
        }
        let n = a.n_block_rows();
        if overlap.owner().len() != n {
            return Err(PrecondError::DimensionMismatch {
                expected: n,
                found: overlap.owner().len(),
            });
        }
        if let Some(v) = volumes {
            if v.len() != n {
                return Err(PrecondError::DimensionMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
            if v.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(PrecondError::InvalidVolumes);
            }
        }
        let b = a.block_size();
        let bb = b * b;
        let shifts: Vec<f64> = (0..n)
            .map(|i| {
                if cfl.is_infinite() {
                    0.0
                } else {
                    let sigma = block::norm1(a.diag_block(i), b) / volumes.map_or(1.0, |v| v[i]);
                    sigma / cfl
                }
            })
            .collect();
        let mut diag_lu = vec![0.0; n * bb];
        let mut piv = vec![0; n * b];
        for i in 0..n {
            let d = &mut diag_lu[i * bb..(i + 1) * bb];
            d.copy_from_slice(a.diag_block(i));
            for k in 0..b {
                d[k * b + k] += shifts[i];
            }
            block::lu_in_place(d, &mut piv[i * b..(i + 1) * b], b).map_err(|_| PrecondError::SingularBlock {
                subdomain: overlap.owner()[i],
                row: i,
            })?;
        }
        let sub_rows: Vec<Vec<usize>> = (0..overlap.num_subdomains())
            .map(|s| overlap.extended(s).to_vec())
            .collect();
        let sub_owned = sub_rows
            .iter()
            .enumerate()
            .map(|(s, rows)| rows.iter().map(|&r| overlap.owner()[r] == s).collect())
            .collect();
        Ok(Self {
            matrix: a.clone(),
            sweeps,
            cfl,
            shifts,
            piv,
            values: Values {
                blocks: a.blocks().to_vec(),
                diag_lu,
            },
            reduced: None,
            sub_rows,
            sub_owned,
        })
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn cfl(&self) -> f64 {
        self.cfl
    }

    /// Diagonal shift `σ_i / cfl` of every block row.
    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    /// Augmented diagonal block `D̃_i` (reassembled, for inspection).
    pub fn augmented_diagonal(&self, i: usize) -> Vec<f64> {
        let b = self.matrix.block_size();
        let mut d = self.matrix.diag_block(i).to_vec();
        for k in 0..b {
            d[k * b + k] += self.shifts[i];
        }
        d
    }

    pub fn enable_reduced(&mut self) {
        if self.reduced.is_none() {
            self.reduced = Some(Values {
                blocks: self.values.blocks.iter().map(|&v| v as f32).collect(),
                diag_lu: self.values.diag_lu.iter().map(|&v| v as f32).collect(),
            });
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
        self.apply_with(&self.values, v, z, None);
        Ok(())
    }

    /// Applies with single-precision data. Panics unless
    /// [`enable_reduced`](Self::enable_reduced) was called.
    pub fn apply_reduced(&self, v: &[f32], z: &mut [f32]) -> Result<(), PrecondError> {
        self.check(v.len(), z.len())?;
        let vals = self.reduced.as_ref().expect("reduced values enabled");
        self.apply_with(vals, v, z, None);
        Ok(())
    }

    /// Runs `cycles` forward/backward cycles from zero, calling `observe`
    /// with the iterate after each one.
    pub fn apply_observed(
        &self,
        v: &[f64],
        cycles: usize,
        observe: &mut dyn FnMut(usize, &[f64]),
    ) -> Result<Vec<f64>, PrecondError> {
        let mut z = vec![0.0; self.dim()];
        self.check(v.len(), z.len())?;
        self.run(&self.values, v, &mut z, cycles, Some(observe));
        Ok(z)
    }

    fn apply_with<T: Float>(
        &self,
        vals: &Values<T>,
        v: &[T],
        z: &mut [T],
        observe: Option<&mut dyn FnMut(usize, &[T])>,
    ) {
        self.run(vals, v, z, self.sweeps / 2, observe);
    }

    fn run<T: Float>(
        &self,
        vals: &Values<T>,
        v: &[T],
        x: &mut [T],
        cycles: usize,
        mut observe: Option<&mut dyn FnMut(usize, &[T])>,
    ) {
        x.iter_mut().for_each(|e| *e = T::zero());
        let n = self.matrix.n_block_rows();
        let mut local_index = vec![usize::MAX; n];
        let mut y: Vec<T> = Vec::new();
        for c in 0..cycles {
            for upper_first in [true, false] {
                for (rows, owned) in self.sub_rows.iter().zip(&self.sub_owned) {
                    self.stage(vals, v, x, rows, owned, upper_first, &mut local_index, &mut y);
                }
            }
            if let Some(f) = observe.as_mut() {
                f(c, x);
            }
        }
    }

    /// One stage on one subdomain. With `upper_first` the rows are swept in
    /// descending order, solving `(U + D̃) x = v - L x`; otherwise ascending,
    /// solving `(L + D̃) x = v - U x`. Columns outside the extended roster
    /// take their current global values.
    #[allow(clippy::too_many_arguments)]
    fn stage<T: Float>(
        &self,
        vals: &Values<T>,
        v: &[T],
        x: &mut [T],
        rows: &[usize],
        owned: &[bool],
        upper_first: bool,
        local_index: &mut [usize],
        y: &mut Vec<T>,
    ) {
        let a = &self.matrix;
        let b = a.block_size();
        let bb = b * b;
        y.clear();
        for (l, &g) in rows.iter().enumerate() {
            local_index[g] = l;
            y.extend_from_slice(&x[g * b..(g + 1) * b]);
        }
        let mut acc = vec![T::zero(); b];
        let order: Box<dyn Iterator<Item = usize>> = if upper_first {
            Box::new((0..rows.len()).rev())
        } else {
            Box::new(0..rows.len())
        };
        for l in order {
            let i = rows[l];
            acc.copy_from_slice(&v[i * b..(i + 1) * b]);
            for pos in a.row_range(i) {
                let j = a.col_idx()[pos];
                if j == i {
                    continue;
                }
                let lj = local_index[j];
                let xj = if lj != usize::MAX {
                    &y[lj * b..(lj + 1) * b]
                } else {
                    &x[j * b..(j + 1) * b]
                };
                block::gemv_sub(&vals.blocks[pos * bb..(pos + 1) * bb], xj, &mut acc, b);
            }
            block::lu_solve_in_place(
                &vals.diag_lu[i * bb..(i + 1) * bb],
                &self.piv[i * b..(i + 1) * b],
                b,
                &mut acc,
            );
            y[l * b..(l + 1) * b].copy_from_slice(&acc);
        }
        for (l, &g) in rows.iter().enumerate() {
            if owned[l] {
                x[g * b..(g + 1) * b].copy_from_slice(&y[l * b..(l + 1) * b]);
            }
            local_index[g] = usize::MAX;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocksparse::{generate_convection_diffusion, BsrBuilder, ConvectionDiffusion};
    use crate::partition::{extend_overlap, partition_bfs, Partition};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seeded(n: usize, b: usize, seed: u64) -> BlockSparseMatrix {
        generate_convection_diffusion(&ConvectionDiffusion {
            nx: n,
            ny: n,
            peclet: 3.0,
            block_size: b,
            seed,
            periodic: false,
        })
        .unwrap()
        .matrix
    }

    fn global(a: &BlockSparseMatrix, sweeps: usize, cfl: f64) -> LusgsOperator {
        let part = Partition::single(a.n_block_rows());
        LusgsOperator::setup(a, &extend_overlap(a, &part, 0), sweeps, cfl, None).unwrap()
    }

    fn random(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn infinite_cfl_keeps_diagonal() {
        let a = seeded(6, 2, 1);
        let op = global(&a, 2, f64::INFINITY);
        for i in 0..a.n_block_rows() {
            assert_eq!(op.augmented_diagonal(i), a.diag_block(i));
        }
    }

    #[test]
    fn identity_unit_cfl_doubles_diagonal() {
        let a = BlockSparseMatrix::identity(4, 3);
        let op = global(&a, 2, 1.0);
        let mut two = vec![0.0; 9];
        for k in 0..3 {
            two[k * 3 + k] = 2.0;
        }
        for i in 0..4 {
            assert_eq!(op.augmented_diagonal(i), two);
        }
    }

    #[test]
    fn augmentation_increases_dominance() {
        let a = seeded(8, 3, 2);
        let b = 3;
        let measure = |op: &LusgsOperator| {
            (0..a.n_block_rows())
                .map(|i| {
                    let d = op.augmented_diagonal(i);
                    let inv = block::invert(&d, b).unwrap();
                    let off: f64 = a
                        .row_range(i)
                        .filter(|&p| a.col_idx()[p] != i)
                        .map(|p| block::norm1(a.block(p), b))
                        .sum();
                    1.0 / block::norm1(&inv, b) - off
                })
                .fold(f64::INFINITY, f64::min)
        };
        let plain = global(&a, 2, f64::INFINITY);
        let shifted = global(&a, 2, 150.0);
        assert!(measure(&shifted) > measure(&plain));
    }

    #[test]
    fn one_cycle_matches_sgs_operator() {
        let a = seeded(6, 2, 3);
        let op = global(&a, 2, 50.0);
        let n = a.dim();
        let b = 2;
        let mut l = DMatrix::zeros(n, n);
        let mut u = DMatrix::zeros(n, n);
        let mut d = DMatrix::zeros(n, n);
        for i in 0..a.n_block_rows() {
            for pos in a.row_range(i) {
                let j = a.col_idx()[pos];
                let blk = if i == j { op.augmented_diagonal(i) } else { a.block(pos).to_vec() };
                let target = if j < i { &mut l } else if j > i { &mut u } else { &mut d };
                for r in 0..b {
                    for c in 0..b {
                        target[(i * b + r, j * b + c)] = blk[r * b + c];
                    }
                }
            }
        }
        let m = (&u + &d) * d.clone().try_inverse().unwrap() * (&l + &d);
        let v = random(n, 4);
        let mut z = vec![0.0; n];
        op.apply(&v, &mut z).unwrap();
        let mz = &m * DVector::from_vec(z);
        let vv = DVector::from_vec(v);
        assert!((mz - &vv).norm() <= 1e-12 * vv.norm());
    }

    #[test]
    fn block_diagonal_is_fixed_point() {
        let mut builder = BsrBuilder::new(3, 2);
        builder.add_block(0, 0, &[2.0, 1.0, 0.0, 3.0]);
        builder.add_block(1, 1, &[4.0, 0.0, 1.0, 1.0]);
        builder.add_block(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let a = builder.build().unwrap();
        let v = random(6, 5);
        let two = global(&a, 2, f64::INFINITY);
        let six = global(&a, 6, f64::INFINITY);
        let mut z2 = vec![0.0; 6];
        let mut z6 = vec![0.0; 6];
        two.apply(&v, &mut z2).unwrap();
        six.apply(&v, &mut z6).unwrap();
        let az = a.spmv(&z2).unwrap();
        for (p, q) in az.iter().zip(&v) {
            assert!((p - q).abs() < 1e-14);
        }
        assert_eq!(z2, z6);
    }

    #[test]
    fn many_sweeps_converge_monotonically() {
        let a = seeded(7, 2, 6);
        let op = global(&a, 120, f64::INFINITY);
        let v = random(a.dim(), 7);
        let mut history = Vec::new();
        let z = op
            .apply_observed(&v, 60, &mut |_, x| {
                let ax = a.spmv(x).unwrap();
                history.push(ax.iter().zip(&v).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt());
            })
            .unwrap();
        assert!(history.windows(2).all(|w| w[1] < w[0]));
        let nv: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(history.last().unwrap() / nv < 1e-8);
        assert_eq!(z.len(), a.dim());
    }

    #[test]
    fn multi_subdomain_single_partition_matches_global() {
        let a = seeded(8, 2, 8);
        let part = partition_bfs(&a, 1, None).unwrap();
        let op = LusgsOperator::setup(&a, &extend_overlap(&a, &part, 0), 4, 10.0, None).unwrap();
        let g = global(&a, 4, 10.0);
        let v = random(a.dim(), 9);
        let mut z1 = vec![0.0; a.dim()];
        let mut z2 = vec![0.0; a.dim()];
        op.apply(&v, &mut z1).unwrap();
        g.apply(&v, &mut z2).unwrap();
        assert_eq!(z1, z2);
    }

    #[test]
    fn multi_subdomain_is_stationary_and_reasonable() {
        let a = seeded(10, 2, 10);
        let part = partition_bfs(&a, 4, None).unwrap();
        let op = LusgsOperator::setup(&a, &extend_overlap(&a, &part, 1), 6, 20.0, None).unwrap();
        let v = random(a.dim(), 11);
        let mut z1 = vec![0.0; a.dim()];
        let mut z2 = vec![0.0; a.dim()];
        op.apply(&v, &mut z1).unwrap();
        op.apply(&v, &mut z2).unwrap();
        assert!(z1.iter().zip(&z2).all(|(p, q)| p.to_bits() == q.to_bits()));
        let az = a.spmv(&z1).unwrap();
        let r: f64 = az.iter().zip(&v).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let nv: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(r < nv);
    }

    #[test]
    fn rejects_bad_setup() {
        let a = BlockSparseMatrix::identity(3, 1);
        let part = Partition::single(3);
        let ov = extend_overlap(&a, &part, 0);
        assert!(matches!(
            LusgsOperator::setup(&a, &ov, 3, 1.0, None),
            Err(PrecondError::InvalidSweeps(3))
        ));
        assert!(matches!(
            LusgsOperator::setup(&a, &ov, 2, 0.0, None),
            Err(PrecondError::InvalidCfl(_))
        ));
        let mut builder = BsrBuilder::new(2, 1);
        builder.add_block(0, 0, &[1.0]);
        let z = builder.build().unwrap();
        let part = Partition::single(2);
        assert!(matches!(
            LusgsOperator::setup(&z, &extend_overlap(&z, &part, 0), 2, f64::INFINITY, None),
            Err(PrecondError::SingularBlock { subdomain: 0, row: 1 })
        ));
    }
}
