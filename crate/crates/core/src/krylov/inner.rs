use super::arnoldi::{Reducer, BREAKDOWN_TOL};
use super::KrylovError;
use crate::blocksparse::BlockSparseMatrix;
use crate::dense::{axpy, GivensChain};
use crate::precond::{Precision, Preconditioner};

/// A preconditioner that may change from one application to the next.
pub trait FlexiblePreconditioner: Send + Sync {
    fn dim(&self) -> usize;
    /// Computes `z ≈ A⁻¹ v` and returns the number of products with `A`
    /// it spent.
    fn apply(&self, v: &[f64], z: &mut [f64]) -> Result<usize, KrylovError>;
    fn label(&self) -> String;
    fn nnz(&self) -> usize {
        0
    }
}

/// A fixed preconditioner used through the flexible interface.
pub struct Frozen<'a>(pub &'a dyn Preconditioner);

impl FlexiblePreconditioner for Frozen<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn apply(&self, v: &[f64], z: &mut [f64]) -> Result<usize, KrylovError> {
        self.0.apply(v, z)?;
        Ok(0)
    }

    fn label(&self) -> String {
        format!("frozen {}", self.0.label())
    }

    fn nnz(&self) -> usize {
        self.0.nnz()
    }
}

enum Basis {
    Working(Vec<Vec<f64>>),
    Reduced(Vec<Vec<f32>>),
}

impl Basis {
    fn push(&mut self, v: Vec<f64>) {
        match self {
            Basis::Working(b) => b.push(v),
            Basis::Reduced(b) => b.push(v.into_iter().map(|x| x as f32).collect()),
        }
    }

    fn len(&self) -> usize {
        match self {
            Basis::Working(b) => b.len(),
            Basis::Reduced(b) => b.len(),
        }
    }

    /// Borrows vector `i`, widening into `buf` when stored in `f32`.
    fn get<'s>(&'s self, i: usize, buf: &'s mut Vec<f64>) -> &'s [f64] {
        match self {
            Basis::Working(b) => &b[i],
            Basis::Reduced(b) => {
                buf.clear();
                buf.extend(b[i].iter().map(|&x| x as f64));
                buf
            }
        }
    }
}

/// Non-restarted right-preconditioned GMRES used as the variable
/// preconditioner of the outer solver. Starts from zero and stops once
/// the residual has dropped by `tol` relative to `‖v‖` or after `max_iters`
/// steps.
pub struct InnerGmres<'a> {
    a: &'a BlockSparseMatrix,
    m: &'a dyn Preconditioner,
    max_iters: usize,
    tol: f64,
    passes: usize,
    precision: Precision,
    reducer: Reducer,
}

impl<'a> InnerGmres<'a> {
    pub fn new(a: &'a BlockSparseMatrix, m: &'a dyn Preconditioner, max_iters: usize, tol: f64) -> Self {
        Self {
            a,
            m,
            max_iters,
            tol,
            passes: 2,
            precision: Precision::Working,
            reducer: Reducer::single(a),
        }
    }

    pub fn with_passes(mut self, passes: usize) -> Self {
        self.passes = passes;
        self
    }

    /// Stores the inner basis in single precision when reduced.
    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn with_reducer(mut self, reducer: Reducer) -> Self {
        self.reducer = reducer;
        self
    }
}

impl FlexiblePreconditioner for InnerGmres<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn apply(&self, v: &[f64], z: &mut [f64]) -> Result<usize, KrylovError> {
        let n = self.a.dim();
        if v.len() != n || z.len() != n {
            return Err(KrylovError::DimensionMismatch {
                expected: n,
                found: v.len().min(z.len()),
            });
        }
        let r = &self.reducer;
        let beta = r.norm(v);
        if beta == 0.0 {
            z.iter_mut().for_each(|x| *x = 0.0);
            return Ok(0);
        }
        let mut basis = match self.precision {
            Precision::Working => Basis::Working(Vec::with_capacity(self.max_iters + 1)),
            Precision::Reduced => Basis::Reduced(Vec::with_capacity(self.max_iters + 1)),
        };
        basis.push(v.iter().map(|x| x / beta).collect());
        let mut rhs = vec![0.0; self.max_iters + 1];
        rhs[0] = beta;
        let mut chain = GivensChain::new(rhs);
        let mut u = vec![0.0; n];
        let mut w = vec![0.0; n];
        let mut buf = Vec::new();
        let mut mvps = 0;
        for j in 0..self.max_iters {
            self.m.apply(basis.get(j, &mut buf), &mut u)?;
            self.a.spmv_into(&u, &mut w)?;
            mvps += 1;
            let az = r.norm(&w);
            let mut col = vec![0.0; j + 1];
            for _ in 0..self.passes.max(1) {
                for (i, c) in col.iter_mut().enumerate() {
                    let vi = basis.get(i, &mut buf);
                    let h = r.dot(vi, &w);
                    axpy(-h, vi, &mut w);
                    *c += h;
                }
            }
            let hs = r.norm(&w);
            let breakdown = !(hs > BREAKDOWN_TOL * az);
            let step = chain.extend(&col, if breakdown { 0.0 } else { hs })?;
            if breakdown || step.residual <= self.tol * beta {
                break;
            }
            w.iter_mut().for_each(|x| *x /= hs);
            basis.push(w.clone());
        }
        let y = chain.solution()?;
        let mut t = vec![0.0; n];
        for (i, &yi) in y.iter().enumerate() {
            axpy(yi, basis.get(i, &mut buf), &mut t);
        }
        self.m.apply(&t, z)?;
        debug_assert!(basis.len() >= y.len());
        Ok(mvps)
    }

    fn label(&self) -> String {
        format!("GMRES({}) inner, {}", self.max_iters, self.m.label())
    }

    fn nnz(&self) -> usize {
        self.m.nnz()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocksparse::{generate_convection_diffusion, ConvectionDiffusion};
    use crate::partition::Partition;
    use crate::precond::{IdentityPreconditioner, PreconditionerStack, StackConfig};

    #[test]
    fn identity_system_solved_in_one_step() {
        let a = BlockSparseMatrix::identity(5, 2);
        let id = IdentityPreconditioner(10);
        let inner = InnerGmres::new(&a, &id, 20, 0.5);
        let v: Vec<f64> = (0..10).map(|i| i as f64 - 3.0).collect();
        let mut z = vec![0.0; 10];
        assert_eq!(inner.apply(&v, &mut z).unwrap(), 1);
        for (p, q) in z.iter().zip(&v) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn reaches_relative_tolerance() {
        let inst = generate_convection_diffusion(&ConvectionDiffusion {
            nx: 14,
            ny: 14,
            peclet: 10.0,
            block_size: 2,
            seed: 2,
            periodic: false,
        })
        .unwrap();
        let a = &inst.matrix;
        let part = Partition::single(a.n_block_rows());
        let stack = PreconditionerStack::build(a, &part, &StackConfig::default()).unwrap();
        for precision in [Precision::Working, Precision::Reduced] {
            let inner = InnerGmres::new(a, &stack, 30, 1e-3).with_precision(precision);
            let mut z = vec![0.0; a.dim()];
            let used = inner.apply(&inst.rhs, &mut z).unwrap();
            assert!(used >= 1 && used <= 30);
            let az = a.spmv(&z).unwrap();
            let res: f64 = az.iter().zip(&inst.rhs).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            let nb: f64 = inst.rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(res <= 2e-3 * nb, "{precision:?}: {}", res / nb);
        }
    }

    #[test]
    fn zero_input_gives_zero() {
        let a = BlockSparseMatrix::identity(3, 1);
        let id = IdentityPreconditioner(3);
        let inner = InnerGmres::new(&a, &id, 5, 0.5);
        let mut z = vec![1.0; 3];
        assert_eq!(inner.apply(&[0.0; 3], &mut z).unwrap(), 0);
        assert_eq!(z, vec![0.0; 3]);
    }
}
