//! Stationary preconditioners and their restricted additive Schwarz
//! composition.

mod bilu;
mod lusgs;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blocksparse::BlockSparseMatrix;
use crate::partition::{extend_overlap, Partition, PartitionError};

pub use bilu::BiluFactors;
pub use lusgs::LusgsOperator;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PrecondError {
    #[error("singular diagonal block in subdomain {subdomain}, block row {row}")]
    SingularBlock { subdomain: usize, row: usize },
    #[error("CFL number must be positive, got {0}")]
    InvalidCfl(f64),
    #[error("sweep count must be even and at least 2, got {0}")]
    InvalidSweeps(usize),
    #[error("fill level {0} is not supported (use 0 or 1)")]
    InvalidFillLevel(usize),
    #[error("cell volumes must be positive and finite")]
    InvalidVolumes,
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// A fixed linear operator `z = M⁻¹ v`.
pub trait Preconditioner: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[f64], z: &mut [f64]) -> Result<(), PrecondError>;
    /// Stored scalar entries, for memory reporting.
    fn nnz(&self) -> usize {
        0
    }
    fn label(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Working,
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Leaf {
    Identity,
    Bilu { k: usize },
    Lusgs { sweeps: usize, cfl: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackConfig {
    pub leaf: Leaf,
    pub overlap: usize,
    pub precision: Precision,
}

impl Default for StackConfig {
    fn default() -> Self {
        Self {
            leaf: Leaf::Bilu { k: 0 },
            overlap: 1,
            precision: Precision::Working,
        }
    }
}

impl StackConfig {
    pub fn label(&self) -> String {
        let leaf = match self.leaf {
            Leaf::Identity => "none".to_string(),
            Leaf::Bilu { k } => format!("BILU({k})"),
            Leaf::Lusgs { sweeps, cfl } if cfl.is_infinite() => format!("LUSGS({sweeps},inf)"),
            Leaf::Lusgs { sweeps, cfl } => format!("LUSGS({sweeps},{cfl})"),
        };
        let mut s = format!("{leaf}-RAS(l={})", self.overlap);
        if self.precision == Precision::Reduced {
            s.push_str("-f32");
        }
        s
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Identity(usize),
    Bilu(BiluFactors),
    Lusgs(LusgsOperator),
}

/// A leaf preconditioner wrapped in restricted additive Schwarz, with an
/// optional single-precision application mode.
#[derive(Debug, Clone)]
pub struct PreconditionerStack {
    config: StackConfig,
    kind: Kind,
}

impl PreconditionerStack {
    pub fn build(a: &BlockSparseMatrix, part: &Partition, config: &StackConfig) -> Result<Self, PrecondError> {
        if part.num_rows() != a.n_block_rows() {
            return Err(PrecondError::DimensionMismatch {
                expected: a.n_block_rows(),
                found: part.num_rows(),
            });
        }
        let reduced = config.precision == Precision::Reduced;
        let kind = match config.leaf {
            Leaf::Identity => Kind::Identity(a.dim()),
            Leaf::Bilu { k } => {
                let mut f = BiluFactors::factor(a, &extend_overlap(a, part, config.overlap), k)?;
                if reduced {
                    f.enable_reduced();
                }
                Kind::Bilu(f)
            }
            Leaf::Lusgs { sweeps, cfl } => {
                let mut op = LusgsOperator::setup(a, &extend_overlap(a, part, config.overlap), sweeps, cfl, None)?;
                if reduced {
                    op.enable_reduced();
                }
                Kind::Lusgs(op)
            }
        };
        Ok(Self {
            config: config.clone(),
            kind,
        })
    }

    pub fn config(&self) -> &StackConfig {
        &self.config
    }

    pub fn precision(&self) -> Precision {
        self.config.precision
    }
}

impl Preconditioner for PreconditionerStack {
    fn dim(&self) -> usize {
        match &self.kind {
            Kind::Identity(n) => *n,
            Kind::Bilu(f) => f.dim(),
            Kind::Lusgs(op) => op.dim(),
        }
    }

    fn apply(&self, v: &[f64], z: &mut [f64]) -> Result<(), PrecondError> {
        if let Kind::Identity(n) = self.kind {
            if v.len() != n || z.len() != n {
                return Err(PrecondError::DimensionMismatch {
                    expected: n,
                    found: v.len().min(z.len()),
                });
            }
            z.copy_from_slice(v);
            return Ok(());
        }
        match self.config.precision {
            Precision::Working => match &self.kind {
                Kind::Bilu(f) => f.apply(v, z),
                Kind::Lusgs(op) => op.apply(v, z),
                Kind::Identity(_) => unreachable!(),
            },
            Precision::Reduced => {
                let v32: Vec<f32> = v.iter().map(|&x| x as f32).collect();
                let mut z32 = vec![0.0f32; z.len()];
                match &self.kind {
                    Kind::Bilu(f) => f.apply_reduced(&v32, &mut z32)?,
                    Kind::Lusgs(op) => op.apply_reduced(&v32, &mut z32)?,
                    Kind::Identity(_) => unreachable!(),
                }
                z.iter_mut().zip(&z32).for_each(|(d, &s)| *d = s as f64);
                Ok(())
            }
        }
    }

    fn nnz(&self) -> usize {
        match &self.kind {
            Kind::Identity(_) => 0,
            Kind::Bilu(f) => f.nnz(),
            Kind::Lusgs(op) => op.nnz(),
        }
    }

    fn label(&self) -> String {
        self.config.label()
    }
}

/// `z = v`.
#[derive(Debug, Clone, Copy)]
pub struct IdentityPreconditioner(pub usize);

impl Preconditioner for IdentityPreconditioner {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, v: &[f64], z: &mut [f64]) -> Result<(), PrecondError> {
        if v.len() != self.0 || z.len() != self.0 {
            return Err(PrecondError::DimensionMismatch {
                expected: self.0,
                found: v.len().min(z.len()),
            });
        }
        z.copy_from_slice(v);
        Ok(())
    }

    fn label(&self) -> String {
        "none".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocksparse::{generate_convection_diffusion, ConvectionDiffusion};
    use crate::partition::partition_bfs;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem() -> BlockSparseMatrix {
        generate_convection_diffusion(&ConvectionDiffusion {
            nx: 12,
            ny: 12,
            peclet: 2.0,
            block_size: 3,
            seed: 1,
            periodic: false,
        })
        .unwrap()
        .matrix
    }

    fn random(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn norm(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn identity_matrix_bilu_is_identity() {
        let a = BlockSparseMatrix::identity(6, 2);
        let part = Partition::single(6);
        let stack = PreconditionerStack::build(&a, &part, &StackConfig::default()).unwrap();
        let v = random(12, 1);
        let mut z = vec![0.0; 12];
        stack.apply(&v, &mut z).unwrap();
        assert_eq!(z, v);
    }

    #[test]
    fn stacks_are_linear() {
        let a = problem();
        let part = partition_bfs(&a, 3, None).unwrap();
        for leaf in [Leaf::Bilu { k: 0 }, Leaf::Bilu { k: 1 }, Leaf::Lusgs { sweeps: 4, cfl: 100.0 }] {
            let stack = PreconditionerStack::build(
                &a,
                &part,
                &StackConfig {
                    leaf,
                    overlap: 1,
                    precision: Precision::Working,
                },
            )
            .unwrap();
            let n = a.dim();
            let (u, v) = (random(n, 2), random(n, 3));
            let (alpha, beta) = (0.7, -1.3);
            let comb: Vec<f64> = u.iter().zip(&v).map(|(p, q)| alpha * p + beta * q).collect();
            let (mut zu, mut zv, mut zc) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            stack.apply(&u, &mut zu).unwrap();
            stack.apply(&v, &mut zv).unwrap();
            stack.apply(&comb, &mut zc).unwrap();
            let diff: Vec<f64> = (0..n).map(|i| zc[i] - alpha * zu[i] - beta * zv[i]).collect();
            assert!(norm(&diff) <= 1e-12 * norm(&zc), "{leaf:?}");
        }
    }

    #[test]
    fn reduced_precision_gap() {
        let a = problem();
        let part = partition_bfs(&a, 2, None).unwrap();
        for leaf in [Leaf::Bilu { k: 0 }, Leaf::Lusgs { sweeps: 2, cfl: 50.0 }] {
            let mut cfg = StackConfig {
                leaf,
                overlap: 1,
                precision: Precision::Working,
            };
            let working = PreconditionerStack::build(&a, &part, &cfg).unwrap();
            cfg.precision = Precision::Reduced;
            let reduced = PreconditionerStack::build(&a, &part, &cfg).unwrap();
            assert_eq!(reduced.precision(), Precision::Reduced);
            let v = random(a.dim(), 4);
            let mut zw = vec![0.0; a.dim()];
            let mut zr = vec![0.0; a.dim()];
            working.apply(&v, &mut zw).unwrap();
            reduced.apply(&v, &mut zr).unwrap();
            assert_ne!(zw, zr);
            let diff: Vec<f64> = zw.iter().zip(&zr).map(|(p, q)| p - q).collect();
            assert!(norm(&diff) <= 1e-3 * norm(&zw));
        }
    }

    #[test]
    fn single_subdomain_no_overlap_equals_global() {
        let a = problem();
        let one = Partition::single(a.n_block_rows());
        let bfs = partition_bfs(&a, 1, None).unwrap();
        let cfg = StackConfig {
            overlap: 0,
            ..Default::default()
        };
        let s1 = PreconditionerStack::build(&a, &one, &cfg).unwrap();
        let s2 = PreconditionerStack::build(&a, &bfs, &cfg).unwrap();
        let v = random(a.dim(), 5);
        let mut z1 = vec![0.0; a.dim()];
        let mut z2 = vec![0.0; a.dim()];
        s1.apply(&v, &mut z1).unwrap();
        s2.apply(&v, &mut z2).unwrap();
        assert_eq!(z1, z2);
    }

    #[test]
    fn block_jacobi_without_overlap() {
        // With no overlap and BILU on dense-pattern local blocks, RAS is
        // block Jacobi over the subdomain slices.
        let a = problem();
        let part = partition_bfs(&a, 4, None).unwrap();
        let cfg = StackConfig {
            leaf: Leaf::Lusgs { sweeps: 2, cfl: f64::INFINITY },
            overlap: 0,
            precision: Precision::Working,
        };
        let stack = PreconditionerStack::build(&a, &part, &cfg).unwrap();
        let v = random(a.dim(), 6);
        let mut z = vec![0.0; a.dim()];
        stack.apply(&v, &mut z).unwrap();
        let mut again = vec![0.0; a.dim()];
        stack.apply(&v, &mut again).unwrap();
        assert!(z.iter().zip(&again).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn labels() {
        assert_eq!(StackConfig::default().label(), "BILU(0)-RAS(l=1)");
        let c = StackConfig {
            leaf: Leaf::Lusgs { sweeps: 6, cfl: f64::INFINITY },
            overlap: 0,
            precision: Precision::Reduced,
        };
        assert_eq!(c.label(), "LUSGS(6,inf)-RAS(l=0)-f32");
    }
}
