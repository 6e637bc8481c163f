use super::{DenseError, DenseMatrix, PIVOT_FLOOR};

/// Plane rotation acting on rows `row` and `row + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    pub row: usize,
    pub c: f64,
    pub s: f64,
}

impl Rotation {
    /// Rotation mapping `(a, b)` to `(hypot(a, b), 0)`.
    fn zeroing(row: usize, a: f64, b: f64) -> Self {
        let r = a.hypot(b);
        if r == 0.0 {
            Self { row, c: 1.0, s: 0.0 }
        } else {
            Self {
                row,
                c: a / r,
                s: b / r,
            }
        }
    }

    #[inline]
    fn apply(&self, v: &mut [f64]) {
        let (a, b) = (v[self.row], v[self.row + 1]);
        v[self.row] = self.c * a + self.s * b;
        v[self.row + 1] = -self.s * a + self.c * b;
    }

    #[inline]
    fn apply_transpose(&self, v: &mut [f64]) {
        let (a, b) = (v[self.row], v[self.row + 1]);
        v[self.row] = self.c * a - self.s * b;
        v[self.row + 1] = self.s * a + self.c * b;
    }
}

/// Outcome of appending one column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GivensStep {
    /// Least-squares residual norm `min_y ‖c − H̄ y‖` after this column.
    pub residual: f64,
    /// Set when the appended subdiagonal entry was exactly zero.
    pub breakdown: bool,
}

/// Incremental QR of a growing upper-Hessenberg (or leading-dense) matrix
/// together with its rotated right-hand side.
#[derive(Debug, Clone)]
pub struct GivensChain {
    rotations: Vec<Rotation>,
    columns: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

impl GivensChain {
    /// `rhs` fixes the maximum row count of the system.
    pub fn new(rhs: Vec<f64>) -> Self {
        Self {
            rotations: Vec::new(),
            columns: Vec::new(),
            rhs,
        }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn rotations(&self) -> &[Rotation] {
        &self.rotations
    }

    pub fn rotated_rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Appends a Hessenberg column: `column` holds rows `0..=j` and
    /// `h_subdiag` the entry in row `j + 1`.
    pub fn extend(&mut self, column: &[f64], h_subdiag: f64) -> Result<GivensStep, DenseError> {
        let j = self.len();
        if column.len() != j + 1 {
            return Err(DenseError::DimensionMismatch {
                expected: j + 1,
                found: column.len(),
            });
        }
        let mut full = Vec::with_capacity(j + 2);
        full.extend_from_slice(column);
        full.push(h_subdiag);
        let residual = self.extend_dense(&full)?;
        Ok(GivensStep {
            residual,
            breakdown: h_subdiag == 0.0,
        })
    }

    /// Appends a column with arbitrarily many subdiagonal entries, as in the
    /// dense leading block after a deflated restart. Returns the residual.
    pub fn extend_dense(&mut self, column: &[f64]) -> Result<f64, DenseError> {
        let j = self.len();
        let rows = self.rhs.len();
        if column.len() < j + 1 || column.len() > rows {
            return Err(DenseError::DimensionMismatch {
                expected: j + 2,
                found: column.len(),
            });
        }
        let mut col = vec![0.0; rows];
        col[..column.len()].copy_from_slice(column);
        for rot in &self.rotations {
            rot.apply(&mut col);
        }
        let last = column
            .len()
            .max(self.rotations.iter().map(|r| r.row + 2).max().unwrap_or(0));
        for i in (j + 1..last).rev() {
            if col[i] == 0.0 {
                continue;
            }
            let rot = Rotation::zeroing(i - 1, col[i - 1], col[i]);
            rot.apply(&mut col);
            col[i] = 0.0;
            rot.apply(&mut self.rhs);
            self.rotations.push(rot);
        }
        col.truncate(j + 1);
        self.columns.push(col);
        Ok(self.residual())
    }

    /// Current least-squares residual norm.
    pub fn residual(&self) -> f64 {
        self.rhs[self.len()..].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Least-squares residual vector `c − H̄ y*`, recovered from the
    /// rotations rather than by explicit subtraction.
    pub fn residual_vector(&self) -> Vec<f64> {
        let mut r = self.rhs.clone();
        r[..self.len()].iter_mut().for_each(|v| *v = 0.0);
        for rot in self.rotations.iter().rev() {
            rot.apply_transpose(&mut r);
        }
        r
    }

    /// Back-substitution on the triangular factor: the minimizer `y*`.
    pub fn solution(&self) -> Result<Vec<f64>, DenseError> {
        let n = self.len();
        let mut y = self.rhs[..n].to_vec();
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.columns[k][i] * y[k];
            }
            let d = self.columns[i][i];
            if d.abs() < PIVOT_FLOOR {
                return Err(DenseError::SingularTriangle { index: i });
            }
            y[i] = s / d;
        }
        Ok(y)
    }

    /// Upper-triangular factor accumulated so far.
    pub fn triangle(&self) -> DenseMatrix {
        let n = self.len();
        let mut r = DenseMatrix::zeros(n, n);
        for (j, col) in self.columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                r[(i, j)] = v;
            }
        }
        r
    }
}

pub fn givens_extend(
    chain: &mut GivensChain,
    new_column: &[f64],
    h_subdiag: f64,
) -> Result<GivensStep, DenseError> {
    chain.extend(new_column, h_subdiag)
}

pub fn lstsq_solution(chain: &GivensChain) -> Result<Vec<f64>, DenseError> {
    chain.solution()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seeded_hessenberg(m: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = DenseMatrix::zeros(m + 1, m);
        for j in 0..m {
            for i in 0..=j + 1 {
                h[(i, j)] = rng.random_range(-1.0..1.0);
            }
        }
        h
    }

    /// Dense least-squares residual through nalgebra's SVD.
    fn oracle_residual(h: &DenseMatrix, rows: usize, cols: usize, c: &[f64]) -> (Vec<f64>, f64) {
        let a = DMatrix::from_fn(rows, cols, |i, j| h[(i, j)]);
        let b = DVector::from_column_slice(&c[..rows]);
        let y = a.clone().svd(true, true).solve(&b, 1e-14).unwrap();
        let r = (b - a * &y).norm();
        (y.iter().copied().collect(), r)
    }

    #[test]
    fn single_step_exact() {
        let beta = 3.0;
        let mut chain = GivensChain::new(vec![beta, 0.0]);
        let step = givens_extend(&mut chain, &[2.0], 0.0).unwrap();
        assert_eq!(step.residual, 0.0);
        assert!(step.breakdown);
        assert_eq!(lstsq_solution(&chain).unwrap(), vec![1.5]);
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let h = seeded_hessenberg(4, 1);
        let mut chain = GivensChain::new(vec![0.0; 5]);
        for j in 0..4 {
            let col: Vec<f64> = (0..=j).map(|i| h[(i, j)]).collect();
            chain.extend(&col, h[(j + 1, j)]).unwrap();
        }
        assert!(chain.solution().unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn breakdown_midway_reports_zero_residual() {
        let h = seeded_hessenberg(3, 2);
        let mut chain = GivensChain::new(vec![1.0, 0.0, 0.0, 0.0]);
        for j in 0..2 {
            let col: Vec<f64> = (0..=j).map(|i| h[(i, j)]).collect();
            chain.extend(&col, h[(j + 1, j)]).unwrap();
        }
        let col: Vec<f64> = (0..=2).map(|i| h[(i, 2)]).collect();
        let step = chain.extend(&col, 0.0).unwrap();
        assert!(step.breakdown);
        assert_eq!(step.residual, 0.0);
    }

    #[test]
    fn matches_dense_least_squares_every_step() {
        let m = 8;
        let h = seeded_hessenberg(m, 42);
        let mut c = vec![0.0; m + 1];
        c[0] = 2.5;
        let mut chain = GivensChain::new(c.clone());
        for j in 0..m {
            let col: Vec<f64> = (0..=j).map(|i| h[(i, j)]).collect();
            let step = chain.extend(&col, h[(j + 1, j)]).unwrap();
            let (y_ref, r_ref) = oracle_residual(&h, j + 2, j + 1, &c);
            assert!((step.residual - r_ref).abs() <= 1e-12 * c[0], "step {j}");
            let y = chain.solution().unwrap();
            for (a, b) in y.iter().zip(&y_ref) {
                assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
            }
            // Consistency: ‖H̄y − c‖ equals the reported residual.
            let hy = h.submatrix(j + 2, j + 1).matvec(&y).unwrap();
            let direct: f64 = hy
                .iter()
                .zip(&c)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!((direct - step.residual).abs() <= 1e-12 * c[0]);
        }
        for r in chain.rotations() {
            assert!((r.c * r.c + r.s * r.s - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn dense_leading_block_then_hessenberg() {
        // A (k+1) x k dense block followed by Hessenberg columns.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (k, m) = (3, 6);
        let mut h = DenseMatrix::zeros(m + 1, m);
        for j in 0..m {
            let top = if j < k { k + 1 } else { j + 2 };
            for i in 0..top {
                h[(i, j)] = rng.random_range(-1.0..1.0);
            }
        }
        let mut c = vec![0.0; m + 1];
        for v in c.iter_mut().take(k + 1) {
            *v = rng.random_range(-1.0..1.0);
        }
        let mut chain = GivensChain::new(c.clone());
        for j in 0..m {
            let top = if j < k { k + 1 } else { j + 2 };
            let col: Vec<f64> = (0..top).map(|i| h[(i, j)]).collect();
            let res = chain.extend_dense(&col).unwrap();
            let (_, r_ref) = oracle_residual(&h, (j + 2).max(k + 1), j + 1, &c);
            assert!((res - r_ref).abs() <= 1e-12, "column {j}");
        }
        let y = chain.solution().unwrap();
        let hy = h.matvec(&y).unwrap();
        for (i, s) in chain.residual_vector().iter().enumerate() {
            assert!((s - (c[i] - hy[i])).abs() <= 1e-12, "row {i}");
        }
        let r = chain.triangle();
        for i in 0..m {
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn rejects_wrong_column_length() {
        let mut chain = GivensChain::new(vec![1.0, 0.0, 0.0]);
        assert!(chain.extend(&[1.0, 2.0], 0.5).is_err());
    }
}
