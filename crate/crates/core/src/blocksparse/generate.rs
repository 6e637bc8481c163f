//! Deterministic test problems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{BlockSparseError, BsrBuilder, ProblemInstance, Provenance};
use crate::dense::orthonormalize_columns;

/// Upwind convection-diffusion on the unit square.
///
/// `nx` and `ny` count grid points including the Dirichlet boundary, so the
/// system has `(nx - 2) (ny - 2)` block rows. With `periodic` set the grid
/// wraps around instead, every point is an unknown and a unit reaction term
/// keeps the operator nonsingular.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvectionDiffusion {
    pub nx: usize,
    pub ny: usize,
    pub peclet: f64,
    pub block_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub periodic: bool,
}

impl Default for ConvectionDiffusion {
    fn default() -> Self {
        Self {
            nx: 32,
            ny: 32,
            peclet: 1.0,
            block_size: 1,
            seed: 0,
            periodic: false,
        }
    }
}

/// Flow direction of the convective term.
const VELOCITY: (f64, f64) = (1.0, 0.5);

pub fn generate_convection_diffusion(p: &ConvectionDiffusion) -> Result<ProblemInstance, BlockSparseError> {
    if p.nx < 3 || p.ny < 3 {
        return Err(BlockSparseError::InvalidParameter(format!(
            "grid must be at least 3x3, got {}x{}",
            p.nx, p.ny
        )));
    }
    if !(p.peclet >= 0.0) || !p.peclet.is_finite() {
        return Err(BlockSparseError::InvalidParameter(format!(
            "peclet must be finite and nonnegative, got {}",
            p.peclet
        )));
    }
    if p.block_size == 0 {
        return Err(BlockSparseError::InvalidParameter("block size must be positive".into()));
    }
    let b = p.block_size;
    let (gx, gy, h) = if p.periodic {
        (p.nx, p.ny, 1.0 / p.nx as f64)
    } else {
        (p.nx - 2, p.ny - 2, 1.0 / (p.nx - 1) as f64)
    };
    let n = gx * gy;
    let (wx, wy) = VELOCITY;
    let ph = p.peclet * h;
    let mut diag = 4.0 + ph * (wx.abs() + wy.abs());
    if p.periodic {
        diag += 1.0;
    }
    // Weights are scaled by h^2.
    let west = -1.0 - ph * wx.max(0.0);
    let east = -1.0 - ph * (-wx).max(0.0);
    let south = -1.0 - ph * wy.max(0.0);
    let north = -1.0 - ph * (-wy).max(0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let eps = 0.5 / b as f64;
    let mut eye = vec![0.0; b * b];
    for k in 0..b {
        eye[k * b + k] = 1.0;
    }
    let scaled = |w: f64| eye.iter().map(|v| v * w).collect::<Vec<f64>>();
    let (bw, be, bs, bn) = (scaled(west), scaled(east), scaled(south), scaled(north));

    let mut builder = BsrBuilder::new(n, b);
    let idx = |i: usize, j: usize| j * gx + i;
    for j in 0..gy {
        for i in 0..gx {
            let row = idx(i, j);
            let mut d = vec![0.0; b * b];
            for r in 0..b {
                for c in 0..b {
                    let pert = if r == c || b == 1 {
                        0.0
                    } else {
                        eps * rng.random_range(-1.0..1.0)
                    };
                    d[r * b + c] = diag * (eye[r * b + c] + pert);
                }
            }
            builder.add_block(row, row, &d);
            let neighbours = [
                (i as isize - 1, j as isize, &bw),
                (i as isize + 1, j as isize, &be),
                (i as isize, j as isize - 1, &bs),
                (i as isize, j as isize + 1, &bn),
            ];
            for (ni, nj, blk) in neighbours {
                let inside = |v: isize, g: usize| v >= 0 && (v as usize) < g;
                let (ni, nj) = if p.periodic {
                    (ni.rem_euclid(gx as isize), nj.rem_euclid(gy as isize))
                } else if inside(ni, gx) && inside(nj, gy) {
                    (ni, nj)
                } else {
                    continue;
                };
                builder.add_block(row, idx(ni as usize, nj as usize), blk);
            }
        }
    }
    let matrix = builder.build()?;
    let reference: Vec<f64> = (0..n * b).map(|_| rng.random_range(-1.0..1.0)).collect();
    Ok(ProblemInstance::with_reference(
        matrix,
        reference,
        Provenance::ConvectionDiffusion(p.clone()),
    ))
}

/// Symmetric matrix `Q diag(λ) Qᵀ` with a seeded random orthogonal `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrescribedSpectrum {
    pub eigenvalues: Vec<f64>,
    pub block_size: usize,
    pub seed: u64,
}

pub fn generate_prescribed_spectrum(p: &PrescribedSpectrum) -> Result<ProblemInstance, BlockSparseError> {
    let n = p.eigenvalues.len();
    if n == 0 {
        return Err(BlockSparseError::InvalidParameter("empty spectrum".into()));
    }
    if let Some(index) = p.eigenvalues.iter().position(|&l| l == 0.0) {
        return Err(BlockSparseError::ZeroEigenvalue { index });
    }
    if p.eigenvalues.iter().any(|l| !l.is_finite()) {
        return Err(BlockSparseError::InvalidParameter("non-finite eigenvalue".into()));
    }
    let b = p.block_size;
    if b == 0 || n % b != 0 {
        return Err(BlockSparseError::BlockSizeMismatch { dim: n, block_size: b });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut q: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    orthonormalize_columns(&mut q, 1e-12)
        .map_err(|e| BlockSparseError::InvalidParameter(format!("orthogonal factor: {e}")))?;

    // a[r][c] = sum_k q_k[r] λ_k q_k[c]
    let mut a = vec![0.0; n * n];
    for (qk, &lk) in q.iter().zip(&p.eigenvalues) {
        for r in 0..n {
            let s = lk * qk[r];
            if s == 0.0 {
                continue;
            }
            let row = &mut a[r * n..(r + 1) * n];
            for (v, &qc) in row.iter_mut().zip(qk) {
                *v += s * qc;
            }
        }
    }
    let nb = n / b;
    let mut builder = BsrBuilder::new(nb, b);
    let mut blk = vec![0.0; b * b];
    for bi in 0..nb {
        for bj in 0..nb {
            for r in 0..b {
                for c in 0..b {
                    blk[r * b + c] = a[(bi * b + r) * n + bj * b + c];
                }
            }
            builder.add_block(bi, bj, &blk);
        }
    }
    let matrix = builder.build()?;
    let reference: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Ok(ProblemInstance::with_reference(
        matrix,
        reference,
        Provenance::PrescribedSpectrum(p.clone()),
    ))
}

/// `n` eigenvalues: the given `small` ones followed by a uniform spread on
/// `[lo, hi]`.
pub fn clustered_spectrum(n: usize, small: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let rest = n.saturating_sub(small.len());
    let mut out: Vec<f64> = small.iter().copied().take(n).collect();
    for k in 0..rest {
        let t = if rest == 1 { 0.0 } else { k as f64 / (rest - 1) as f64 };
        out.push(lo + t * (hi - lo));
    }
    out
}
