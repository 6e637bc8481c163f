use num_complex::Complex64;

use super::arnoldi::ArnoldiBasis;
use super::KrylovError;
use crate::dense::{axpy, dot, eig_real_nonsym, norm2, orthonormalize_columns, solve_f, DenseError, DenseMatrix, EigenPairs};

/// Harmonic Ritz pairs of `H̄`, i.e. eigenpairs of
/// `H + h² f e_mᵀ` with `f = H⁻ᵀ e_m` and `h = h_{m+1,m}`.
#[derive(Debug, Clone)]
pub struct HarmonicRitz {
    /// Sorted by ascending modulus; conjugate pairs are adjacent with the
    /// positive imaginary part first.
    pub pairs: EigenPairs,
    pub f: Vec<f64>,
    pub h_sub: f64,
}

pub fn harmonic_ritz(hbar: &DenseMatrix) -> Result<HarmonicRitz, KrylovError> {
    let m = hbar.cols();
    if m == 0 || hbar.rows() != m + 1 {
        return Err(KrylovError::DimensionMismatch {
            expected: m + 1,
            found: hbar.rows(),
        });
    }
    let h = hbar.submatrix(m, m);
    let h_sub = hbar[(m, m - 1)];
    let f = solve_f(&h)?;
    let mut g = h;
    for i in 0..m {
        g[(i, m - 1)] += h_sub * h_sub * f[i];
    }
    let mut pairs = eig_real_nonsym(&g)?;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| {
        let (la, lb) = (pairs.values[a], pairs.values[b]);
        la.norm()
            .total_cmp(&lb.norm())
            .then(la.re.total_cmp(&lb.re))
            .then(lb.im.total_cmp(&la.im))
    });
    pairs.reorder(&order);
    Ok(HarmonicRitz { pairs, f, h_sub })
}

/// Residual norm `|h_sub| |e_mᵀ g|` of the Ritz pair with coordinates `g`.
pub fn spectral_residual(h_sub: f64, g: &[f64]) -> f64 {
    h_sub.abs() * g.last().map_or(0.0, |v| v.abs())
}

/// Compressed state after a deflated restart.
#[derive(Debug, Clone)]
pub struct DeflationSubspace {
    /// `m x k`, orthonormal columns.
    pub p_k: DenseMatrix,
    /// `(m+1) x (k+1)`: `P_k` padded with a zero row plus the residual
    /// direction.
    pub p_k1: DenseMatrix,
    pub v: Vec<Vec<f64>>,
    pub z: Option<Vec<Vec<f64>>>,
    /// `P_{k+1}ᵀ H̄ P_k`.
    pub hbar: DenseMatrix,
    /// Least-squares right-hand side in the compressed basis.
    pub c: Vec<f64>,
    /// `1 − |cos|` between `c − H̄ y` and `[−h f; 1]`.
    pub colinearity: f64,
    /// Harmonic Ritz values kept.
    pub values: Vec<Complex64>,
}

impl DeflationSubspace {
    pub fn k(&self) -> usize {
        self.p_k.cols()
    }
}

/// Indices of the `k` smallest pairs, never splitting a conjugate pair:
/// widened to `k + 1` when possible, otherwise narrowed to `k − 1`.
fn select(values: &[Complex64], k: usize, limit: usize) -> Vec<usize> {
    let mut chosen = Vec::new();
    let mut i = 0;
    while chosen.len() < k && i < values.len() {
        if values[i].im == 0.0 || i + 1 >= values.len() {
            chosen.push(i);
            i += 1;
        } else {
            if chosen.len() + 2 > limit {
                break;
            }
            chosen.push(i);
            chosen.push(i + 1);
            i += 2;
        }
    }
    chosen
}

/// Builds `P_k`, `P_{k+1}` and compresses `V`, `Z`, `H̄` and the
/// least-squares right-hand side for a restart seeded with the `k`
/// smallest harmonic Ritz vectors. `s = c − H̄ y` is the least-squares
/// residual of the finished cycle.
pub fn build_deflation(ws: &ArnoldiBasis, s: &[f64], k: usize) -> Result<DeflationSubspace, KrylovError> {
    let m = ws.len();
    if ws.is_breakdown() || ws.basis().len() != m + 1 {
        return Err(KrylovError::InvalidConfig("deflation needs a complete Arnoldi basis".into()));
    }
    if k == 0 || k >= m {
        return Err(KrylovError::InvalidConfig(format!("deflation size {k} must be in 1..{m}")));
    }
    if s.len() != m + 1 {
        return Err(KrylovError::DimensionMismatch {
            expected: m + 1,
            found: s.len(),
        });
    }
    let hbar = ws.hbar();
    let hr = harmonic_ritz(&hbar)?;
    let chosen = select(&hr.pairs.values, k, m - 1);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(chosen.len());
    let mut skip_next = false;
    for &i in &chosen {
        if skip_next {
            skip_next = false;
            continue;
        }
        let g = &hr.pairs.vectors[i];
        cols.push(g.iter().map(|z| z.re).collect());
        if hr.pairs.values[i].im != 0.0 {
            cols.push(g.iter().map(|z| z.im).collect());
            skip_next = true;
        }
    }
    let kk = cols.len();
    orthonormalize_columns(&mut cols, 1e-12).map_err(|e| match e {
        DenseError::RankLoss { rank, requested } => KrylovError::DeflationRankLoss { rank, requested },
        other => other.into(),
    })?;
    for col in &mut cols {
        col.push(0.0);
    }
    // Residual direction [−h f; 1].
    let mut w: Vec<f64> = hr.f.iter().map(|&fi| -hr.h_sub * fi).collect();
    w.push(1.0);
    let colinearity = {
        let (ns, nw) = (norm2(s), norm2(&w));
        if ns == 0.0 {
            0.0
        } else {
            1.0 - (dot(s, &w) / (ns * nw)).abs()
        }
    };
    let w_norm0 = norm2(&w);
    for _ in 0..2 {
        for col in &cols {
            let h = dot(col, &w);
            axpy(-h, col, &mut w);
        }
    }
    let nw = norm2(&w);
    if !(nw > 1e-12 * w_norm0) {
        return Err(KrylovError::DeflationRankLoss {
            rank: kk,
            requested: kk + 1,
        });
    }
    w.iter_mut().for_each(|x| *x /= nw);
    cols.push(w);
    let p_k1 = DenseMatrix::from_columns(&cols);
    let p_k = p_k1.submatrix(m, kk);

    let combine = |basis: &[Vec<f64>], p: &DenseMatrix| -> Vec<Vec<f64>> {
        (0..p.cols())
            .map(|j| {
                let mut out = vec![0.0; basis[0].len()];
                for (r, br) in basis.iter().enumerate().take(p.rows()) {
                    let coef = p[(r, j)];
                    if coef != 0.0 {
                        axpy(coef, br, &mut out);
                    }
                }
                out
            })
            .collect()
    };
    let v = combine(ws.basis(), &p_k1);
    let z = ws.preconditioned().map(|zs| combine(zs, &p_k));
    let hbar_new = p_k1.transpose().matmul(&hbar)?.matmul(&p_k)?;
    let c_new = p_k1.matvec_transpose(s)?;
    let values = chosen.iter().map(|&i| hr.pairs.values[i]).collect();
    Ok(DeflationSubspace {
        p_k,
        p_k1,
        v,
        z,
        hbar: hbar_new,
        c: c_new,
        colinearity,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocksparse::{BlockSparseMatrix, BsrBuilder};
    use crate::krylov::arnoldi::{arnoldi_step, orthogonality, relation_residual, Reducer};
    use crate::dense::GivensChain;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ident(v: &[f64], z: &mut [f64]) -> Result<usize, KrylovError> {
        z.copy_from_slice(v);
        Ok(0)
    }

    fn random_matrix(n: usize, seed: u64) -> BlockSparseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut builder = BsrBuilder::new(n, 1);
        for i in 0..n {
            for j in 0..n {
                if i == j || rng.random_bool(0.15) {
                    let d = if i == j { 2.0 + i as f64 / n as f64 } else { 0.0 };
                    builder.add_block(i, j, &[d + 0.3 * rng.random_range(-1.0..1.0)]);
                }
            }
        }
        builder.build().unwrap()
    }

    fn run_arnoldi(a: &BlockSparseMatrix, m: usize, seed: u64) -> (ArnoldiBasis, Vec<f64>) {
        let n = a.dim();
        let r = Reducer::single(a);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let beta = r.norm(&b);
        let mut ws = ArnoldiBasis::new(b.iter().map(|x| x / beta).collect(), true);
        for _ in 0..m {
            arnoldi_step(&mut ws, a, &mut ident, 2, &r).unwrap();
        }
        let mut c = vec![0.0; m + 1];
        c[0] = beta;
        (ws, c)
    }

    /// Least-squares solution and residual `c − H̄ y`.
    fn lsq(ws: &ArnoldiBasis, c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h = ws.hbar();
        let mut chain = GivensChain::new(c.to_vec());
        for j in 0..h.cols() {
            let col: Vec<f64> = (0..=j).map(|i| h[(i, j)]).collect();
            chain.extend(&col, h[(j + 1, j)]).unwrap();
        }
        (chain.solution().unwrap(), chain.residual_vector())
    }

    #[test]
    fn diagonal_full_krylov_recovers_spectrum() {
        let d = DenseMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
        let a = BlockSparseMatrix::from_dense(&d, 1).unwrap();
        let r = Reducer::single(&a);
        let s = 3f64.sqrt();
        let mut ws = ArnoldiBasis::new(vec![1.0 / s; 3], false);
        for _ in 0..3 {
            arnoldi_step(&mut ws, &a, &mut ident, 2, &r).unwrap();
        }
        let hr = harmonic_ritz(&ws.hbar()).unwrap();
        for (got, want) in hr.pairs.values.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got.re - want).abs() <= 1e-10 && got.im == 0.0, "{got}");
        }
    }

    #[test]
    fn scalar_formula() {
        let (h11, h21) = (2.0, 0.5);
        let hbar = DenseMatrix::from_rows(&[vec![h11], vec![h21]]);
        let hr = harmonic_ritz(&hbar).unwrap();
        assert!((hr.pairs.values[0].re - (h11 + h21 * h21 / h11)).abs() < 1e-15);
    }

    #[test]
    fn standard_form_matches_generalized_form() {
        let a = random_matrix(40, 3);
        let (ws, _) = run_arnoldi(&a, 12, 4);
        let hbar = ws.hbar();
        let hr = harmonic_ritz(&hbar).unwrap();
        // H̄ᵀH̄ g = θ Hᵀ g, solved densely.
        let m = 12;
        let hb = DMatrix::from_fn(m + 1, m, |i, j| hbar[(i, j)]);
        let ht = DMatrix::from_fn(m, m, |i, j| hbar[(j, i)]);
        let lhs = hb.transpose() * &hb;
        let gen = ht.lu().solve(&lhs).unwrap();
        let mut want: Vec<_> = gen.complex_eigenvalues().iter().copied().collect();
        want.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.re.total_cmp(&b.re)).then(b.im.total_cmp(&a.im)));
        for (g, w) in hr.pairs.values.iter().zip(&want) {
            assert!((g.re - w.re).abs() <= 1e-8 * w.norm() && (g.im - w.im).abs() <= 1e-8 * w.norm());
        }
    }

    #[test]
    fn spectral_residual_examples() {
        assert_eq!(spectral_residual(0.0, &[1.0, 2.0]), 0.0);
        assert_eq!(spectral_residual(3.0, &[1.0, 0.0, 0.0]), 0.0);
        // Ritz pair of H_m against the direct residual.
        let a = random_matrix(30, 5);
        let (ws, _) = run_arnoldi(&a, 8, 6);
        let hbar = ws.hbar();
        let h = hbar.submatrix(8, 8);
        let pairs = eig_real_nonsym(&h).unwrap();
        let idx = pairs.values.iter().position(|l| l.im == 0.0).expect("a real Ritz value");
        let g: Vec<f64> = pairs.vectors[idx].iter().map(|z| z.re).collect();
        let lambda = pairs.values[idx].re;
        let mut u = vec![0.0; 30];
        for (gi, vi) in g.iter().zip(ws.basis()) {
            axpy(*gi, vi, &mut u);
        }
        let mut res = a.spmv(&u).unwrap();
        axpy(-lambda, &u, &mut res);
        let direct = norm2(&res);
        assert!((direct - spectral_residual(hbar[(8, 7)], &g)).abs() <= 1e-10);
    }

    #[test]
    fn deflation_invariants() {
        let a = random_matrix(50, 7);
        let (ws, c) = run_arnoldi(&a, 15, 8);
        let (y, res) = lsq(&ws, &c);
        let d = build_deflation(&ws, &res, 5).unwrap();
        let k = d.k();
        assert!(k == 5 || k == 6 || k == 4);
        assert!(d.colinearity <= 1e-10, "{}", d.colinearity);
        let p = &d.p_k1;
        let ptp = p.transpose().matmul(p).unwrap();
        for i in 0..=k {
            for j in 0..=k {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((ptp[(i, j)] - e).abs() <= 1e-12);
            }
        }
        assert!(orthogonality(&d.v) <= 1e-12);
        let rel = relation_residual(&a, d.z.as_ref().unwrap(), &d.v, &d.hbar);
        assert!(rel <= 1e-9, "{rel}");
        // c_new represents the same residual vector.
        let s_norm = {
            let hy = ws.hbar().matvec(&y).unwrap();
            norm2(&c.iter().zip(&hy).map(|(p, q)| p - q).collect::<Vec<_>>())
        };
        assert!((norm2(&d.c) - s_norm).abs() <= 1e-12 * s_norm.max(1.0));
    }

    #[test]
    fn conjugate_pairs_are_never_split() {
        let vals = [
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 1.0),
            Complex64::new(2.0, -1.0),
            Complex64::new(5.0, 0.0),
        ];
        assert_eq!(select(&vals, 2, 10), vec![0, 1, 2]);
        assert_eq!(select(&vals, 2, 2), vec![0]);
        assert_eq!(select(&vals, 1, 10), vec![0]);
    }
}
