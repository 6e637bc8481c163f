#![allow(dead_code)]

use flexdr::blocksparse::{BlockSparseMatrix, BsrBuilder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random block matrix with a full diagonal and roughly `density` of the
/// off-diagonal blocks present. `shift` is added to the diagonal.
pub fn random_matrix(n: usize, b: usize, density: f64, shift: f64, seed: u64) -> BlockSparseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut builder = BsrBuilder::new(n, b);
    for i in 0..n {
        for j in 0..n {
            if i == j || rng.random_bool(density) {
                let mut blk: Vec<f64> = (0..b * b).map(|_| rng.random_range(-1.0..1.0)).collect();
                if i == j {
                    for r in 0..b {
                        blk[r * b + r] += shift;
                    }
                }
                builder.add_block(i, j, &blk);
            }
        }
    }
    builder.build().expect("valid pattern")
}

pub fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn diff_norm(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}
