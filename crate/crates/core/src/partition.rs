//! In-process domain decomposition: ownership, overlap halos, restricted
//! additive combination and reductions with a fixed summation order.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blocksparse::BlockSparseMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PartitionError {
    #[error("cannot split {n} block rows into {p} subdomains")]
    InvalidPartitionCount { p: usize, n: usize },
    #[error("invalid seed rows: {0}")]
    InvalidSeeds(String),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Assignment of block rows to subdomains.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    owner: Vec<usize>,
    rosters: Vec<Vec<usize>>,
}

/// Serializable summary of a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDump {
    pub p: usize,
    pub owner: Vec<usize>,
    pub imbalance: f64,
}

impl Partition {
    /// Builds a partition from an owner array.
    pub fn from_owner(owner: Vec<usize>, p: usize) -> Result<Self, PartitionError> {
        if p == 0 || p > owner.len() {
            return Err(PartitionError::InvalidPartitionCount { p, n: owner.len() });
        }
        let mut rosters = vec![Vec::new(); p];
        for (row, &s) in owner.iter().enumerate() {
            if s >= p {
                return Err(PartitionError::InvalidPartitionCount { p, n: owner.len() });
            }
            rosters[s].push(row);
        }
        Ok(Self { owner, rosters })
    }

    pub fn single(n: usize) -> Self {
        Self {
            owner: vec![0; n],
            rosters: vec![(0..n).collect()],
        }
    }

    pub fn num_subdomains(&self) -> usize {
        self.rosters.len()
    }

    pub fn num_rows(&self) -> usize {
        self.owner.len()
    }

    pub fn owner(&self) -> &[usize] {
        &self.owner
    }

    pub fn roster(&self, s: usize) -> &[usize] {
        &self.rosters[s]
    }

    pub fn rosters(&self) -> &[Vec<usize>] {
        &self.rosters
    }

    /// `(max - min) / mean` of roster sizes.
    pub fn imbalance(&self) -> f64 {
        let sizes = self.rosters.iter().map(Vec::len);
        let max = sizes.clone().max().unwrap_or(0);
        let min = sizes.min().unwrap_or(0);
        let mean = self.owner.len() as f64 / self.rosters.len() as f64;
        (max - min) as f64 / mean
    }

    pub fn dump(&self) -> PartitionDump {
        PartitionDump {
            p: self.num_subdomains(),
            owner: self.owner.clone(),
            imbalance: self.imbalance(),
        }
    }
}

/// Evenly spread seeds, one near the middle of each of `p` equal strides.
pub fn default_seeds(n: usize, p: usize) -> Vec<usize> {
    (0..p).map(|s| (2 * s + 1) * n / (2 * p)).collect()
}

/// Greedy balanced breadth-first growth from `seeds` (one per subdomain).
///
/// At each step the smallest subdomain (ties to the lowest index) claims the
/// next unassigned row of its queue, or the lowest unassigned row overall
/// once its queue is exhausted. Roster sizes therefore never differ by more
/// than one.
pub fn partition_bfs(
    a: &BlockSparseMatrix,
    p: usize,
    seeds: Option<&[usize]>,
) -> Result<Partition, PartitionError> {
    let n = a.n_block_rows();
    if p == 0 || p > n {
        return Err(PartitionError::InvalidPartitionCount { p, n });
    }
    let seeds = match seeds {
        Some(s) => s.to_vec(),
        None => default_seeds(n, p),
    };
    if seeds.len() != p {
        return Err(PartitionError::InvalidSeeds(format!("{} seeds for {p} subdomains", seeds.len())));
    }
    let adj = a.adjacency();
    let mut owner = vec![usize::MAX; n];
    let mut sizes = vec![0usize; p];
    let mut queues: Vec<VecDeque<usize>> = vec![VecDeque::new(); p];
    let claim = |row: usize, s: usize, owner: &mut [usize], sizes: &mut [usize], queues: &mut [VecDeque<usize>]| {
        owner[row] = s;
        sizes[s] += 1;
        queues[s].extend(adj[row].iter().copied().filter(|&nb| owner[nb] == usize::MAX));
    };
    for (s, &row) in seeds.iter().enumerate() {
        if row >= n {
            return Err(PartitionError::InvalidSeeds(format!("seed {row} out of range")));
        }
        if owner[row] != usize::MAX {
            return Err(PartitionError::InvalidSeeds(format!("seed {row} repeated")));
        }
        claim(row, s, &mut owner, &mut sizes, &mut queues);
    }
    let mut assigned = p;
    let mut next_free = 0;
    while assigned < n {
        let s = (0..p).min_by_key(|&s| (sizes[s], s)).expect("p >= 1");
        let mut got = None;
        while let Some(row) = queues[s].pop_front() {
            if owner[row] == usize::MAX {
                got = Some(row);
                break;
            }
        }
        let row = got.unwrap_or_else(|| {
            while owner[next_free] != usize::MAX {
                next_free += 1;
            }
            next_free
        });
        claim(row, s, &mut owner, &mut sizes, &mut queues);
        assigned += 1;
    }
    Partition::from_owner(owner, p)
}

/// Extended rosters of every subdomain after `levels` rounds of growth.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMap {
    levels: usize,
    owner: Vec<usize>,
    extended: Vec<Vec<usize>>,
}

impl OverlapMap {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn num_subdomains(&self) -> usize {
        self.extended.len()
    }

    pub fn owner(&self) -> &[usize] {
        &self.owner
    }

    /// Sorted owned and halo rows of subdomain `s`.
    pub fn extended(&self, s: usize) -> &[usize] {
        &self.extended[s]
    }

    /// Halo rows of `s` with their owning subdomain.
    pub fn halo(&self, s: usize) -> Vec<(usize, usize)> {
        self.extended[s]
            .iter()
            .filter(|&&r| self.owner[r] != s)
            .map(|&r| (r, self.owner[r]))
            .collect()
    }
}

pub fn extend_overlap(a: &BlockSparseMatrix, part: &Partition, levels: usize) -> OverlapMap {
    let n = a.n_block_rows();
    let adj = if levels > 0 { a.adjacency() } else { Vec::new() };
    let extended = part
        .rosters()
        .iter()
        .map(|roster| {
            let mut member = vec![false; n];
            roster.iter().for_each(|&r| member[r] = true);
            let mut current = roster.clone();
            for _ in 0..levels {
                let mut added = Vec::new();
                for &r in &current {
                    for &nb in &adj[r] {
                        if !member[nb] {
                            member[nb] = true;
                            added.push(nb);
                        }
                    }
                }
                if added.is_empty() {
                    break;
                }
                current.extend(added);
            }
            (0..n).filter(|&r| member[r]).collect()
        })
        .collect();
    OverlapMap {
        levels,
        owner: part.owner().to_vec(),
        extended,
    }
}

/// Gathers the blocks of `roster` from a global vector.
pub fn restrict<T: Copy>(x: &[T], roster: &[usize], b: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(roster.len() * b);
    for &r in roster {
        out.extend_from_slice(&x[r * b..(r + 1) * b]);
    }
    out
}

/// Restricted combination: every global row takes the value computed by
/// its owner. `locals[s]` is indexed like `overlap.extended(s)`.
pub fn ras_combine(locals: &[Vec<f64>], overlap: &OverlapMap, b: usize) -> Result<Vec<f64>, PartitionError> {
    if locals.len() != overlap.num_subdomains() {
        return Err(PartitionError::DimensionMismatch {
            expected: overlap.num_subdomains(),
            found: locals.len(),
        });
    }
    let mut out = vec![0.0; overlap.owner.len() * b];
    for (s, local) in locals.iter().enumerate() {
        let ext = overlap.extended(s);
        if local.len() != ext.len() * b {
            return Err(PartitionError::DimensionMismatch {
                expected: ext.len() * b,
                found: local.len(),
            });
        }
        for (l, &g) in ext.iter().enumerate() {
            if overlap.owner[g] == s {
                out[g * b..(g + 1) * b].copy_from_slice(&local[l * b..(l + 1) * b]);
            }
        }
    }
    Ok(out)
}

/// Inner product summed per subdomain over ascending owned rows, then over
/// subdomains in ascending order. Bitwise reproducible for a fixed
/// partition whatever the thread count.
pub fn dot_deterministic(x: &[f64], y: &[f64], part: &Partition, b: usize) -> Result<f64, PartitionError> {
    let dim = part.num_rows() * b;
    for len in [x.len(), y.len()] {
        if len != dim {
            return Err(PartitionError::DimensionMismatch { expected: dim, found: len });
        }
    }
    Ok(partials(x, y, part, b).into_iter().sum())
}

fn partials(x: &[f64], y: &[f64], part: &Partition, b: usize) -> Vec<f64> {
    let one = |roster: &Vec<usize>| {
        let mut s = 0.0;
        for &r in roster {
            for k in r * b..(r + 1) * b {
                s += x[k] * y[k];
            }
        }
        s
    };
    if part.num_subdomains() == 1 || x.len() < 4096 {
        part.rosters().iter().map(one).collect()
    } else {
        part.rosters().par_iter().map(one).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocksparse::{generate_convection_diffusion, BsrBuilder, ConvectionDiffusion};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain(n: usize) -> BlockSparseMatrix {
        let mut builder = BsrBuilder::new(n, 1);
        for i in 0..n {
            builder.add_block(i, i, &[2.0]);
            if i + 1 < n {
                builder.add_block(i, i + 1, &[-1.0]);
                builder.add_block(i + 1, i, &[-1.0]);
            }
        }
        builder.build().unwrap()
    }

    fn grid(nx: usize) -> BlockSparseMatrix {
        generate_convection_diffusion(&ConvectionDiffusion {
            nx,
            ny: nx,
            ..Default::default()
        })
        .unwrap()
        .matrix
    }

    #[test]
    fn single_subdomain() {
        let part = partition_bfs(&chain(7), 1, None).unwrap();
        assert_eq!(part.roster(0), &[0, 1, 2, 3, 4, 5, 6]);
        assert_eq!(part.imbalance(), 0.0);
    }

    #[test]
    fn chain_split_from_end_seeds() {
        let part = partition_bfs(&chain(10), 2, Some(&[0, 9])).unwrap();
        assert_eq!(part.roster(0), &[0, 1, 2, 3, 4]);
        assert_eq!(part.roster(1), &[5, 6, 7, 8, 9]);
        let default = partition_bfs(&chain(10), 2, None).unwrap();
        assert_eq!(default, part);
    }

    #[test]
    fn singletons_when_p_equals_n() {
        let part = partition_bfs(&chain(5), 5, None).unwrap();
        for s in 0..5 {
            assert_eq!(part.roster(s).len(), 1);
        }
    }

    #[test]
    fn invalid_counts() {
        assert!(matches!(
            partition_bfs(&chain(3), 0, None),
            Err(PartitionError::InvalidPartitionCount { p: 0, n: 3 })
        ));
        assert!(partition_bfs(&chain(3), 4, None).is_err());
        assert!(matches!(
            partition_bfs(&chain(3), 2, Some(&[1, 1])),
            Err(PartitionError::InvalidSeeds(_))
        ));
    }

    #[test]
    fn grid_partitions_are_balanced() {
        let a = grid(18);
        for p in [2, 3, 4, 5, 8] {
            let part = partition_bfs(&a, p, None).unwrap();
            let sizes: Vec<usize> = part.rosters().iter().map(Vec::len).collect();
            let spread = sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
            assert!(spread <= 1, "p={p} sizes {sizes:?}");
            assert_eq!(sizes.iter().sum::<usize>(), a.n_block_rows());
        }
    }

    #[test]
    fn disconnected_graph_is_fully_assigned() {
        let a = BlockSparseMatrix::identity(9, 1);
        let part = partition_bfs(&a, 3, None).unwrap();
        assert!(part.rosters().iter().all(|r| r.len() == 3));
    }

    #[test]
    fn overlap_examples() {
        let a = chain(10);
        let part = partition_bfs(&a, 2, Some(&[0, 9])).unwrap();
        let zero = extend_overlap(&a, &part, 0);
        assert_eq!(zero.extended(0), part.roster(0));
        let one = extend_overlap(&a, &part, 1);
        assert_eq!(one.extended(0), &[0, 1, 2, 3, 4, 5]);
        assert_eq!(one.extended(1), &[4, 5, 6, 7, 8, 9]);
        assert_eq!(one.halo(0), vec![(5, 1)]);
        let all = extend_overlap(&a, &part, 20);
        assert_eq!(all.extended(0).len(), 10);
        assert_eq!(all.extended(1).len(), 10);
    }

    #[test]
    fn owner_value_wins() {
        let a = chain(10);
        let part = partition_bfs(&a, 2, Some(&[0, 9])).unwrap();
        let ov = extend_overlap(&a, &part, 1);
        let locals = vec![vec![1.0; 6], vec![2.0; 6]];
        let g = ras_combine(&locals, &ov, 1).unwrap();
        assert_eq!(g, [vec![1.0; 5], vec![2.0; 5]].concat());
    }

    #[test]
    fn restrict_combine_round_trip() {
        let a = grid(9);
        let part = partition_bfs(&a, 3, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b = 2;
        let x: Vec<f64> = (0..a.n_block_rows() * b).map(|_| rng.random()).collect();
        for levels in [0, 1, 2] {
            let ov = extend_overlap(&a, &part, levels);
            let locals: Vec<Vec<f64>> = (0..3).map(|s| restrict(&x, ov.extended(s), b)).collect();
            assert_eq!(ras_combine(&locals, &ov, b).unwrap(), x);
        }
        let single = Partition::single(a.n_block_rows());
        let ov = extend_overlap(&a, &single, 0);
        let locals = vec![restrict(&x, ov.extended(0), b)];
        assert_eq!(ras_combine(&locals, &ov, b).unwrap(), x);
    }

    #[test]
    fn dot_examples() {
        let part = Partition::single(4);
        let e1 = [1.0, 0.0, 0.0, 0.0];
        let e2 = [0.0, 1.0, 0.0, 0.0];
        assert_eq!(dot_deterministic(&e1, &e1, &part, 1).unwrap(), 1.0);
        assert_eq!(dot_deterministic(&e1, &e2, &part, 1).unwrap(), 0.0);
        assert!(dot_deterministic(&e1, &[1.0], &part, 1).is_err());
    }

    #[test]
    fn dot_reproducible_across_threads_and_partitions() {
        let a = grid(66);
        let b = 2;
        let dim = a.n_block_rows() * b;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let exact: f64 = x.iter().zip(&y).map(|(u, v)| u * v).sum();
        let scale: f64 = x.iter().zip(&y).map(|(u, v)| (u * v).abs()).sum();
        for p in [1, 2, 4, 8] {
            let part = partition_bfs(&a, p, None).unwrap();
            let reference = dot_deterministic(&x, &y, &part, b).unwrap();
            for threads in [1, 3] {
                let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
                let d = pool.install(|| dot_deterministic(&x, &y, &part, b).unwrap());
                assert_eq!(d.to_bits(), reference.to_bits());
            }
            assert!((reference - exact).abs() <= 1e-14 * scale);
        }
    }
}
