use serde::{Deserialize, Serialize};

use super::arnoldi::{arnoldi_step, orthogonality, relation_residual, ArnoldiBasis, Reducer};
use super::deflation::{build_deflation, DeflationSubspace};
use super::inner::{FlexiblePreconditioner, InnerGmres};
use super::report::{ConvergenceReport, CycleRecord, IterationRecord, Status};
use super::{KrylovError, SolverConfig, Variant};
use crate::blocksparse::BlockSparseMatrix;
use crate::dense::{axpy, GivensChain};
use crate::precond::Preconditioner;

/// How the outer solver applies its right preconditioner.
#[derive(Clone, Copy)]
pub enum Preconditioning<'a> {
    /// A linear operator; the update is `x += M (V y)` and `Z` is not stored.
    Fixed(&'a dyn Preconditioner),
    /// A possibly different operator per step; the update is `x += Z y`.
    Flexible(&'a dyn FlexiblePreconditioner),
}

impl Preconditioning<'_> {
    fn dim(&self) -> usize {
        match self {
            Preconditioning::Fixed(m) => m.dim(),
            Preconditioning::Flexible(m) => m.dim(),
        }
    }

    fn apply(&self, v: &[f64], z: &mut [f64]) -> Result<usize, KrylovError> {
        match self {
            Preconditioning::Fixed(m) => {
                m.apply(v, z)?;
                Ok(0)
            }
            Preconditioning::Flexible(m) => m.apply(v, z),
        }
    }
}

/// Checks made after a deflated restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflationDiagnostics {
    pub k: usize,
    /// Relation residual of the compressed triplet.
    pub relation: f64,
    pub colinearity: f64,
    /// `‖P_{k+1}ᵀ P_{k+1} − I‖_F`.
    pub p_orthogonality: f64,
    /// `‖V_{k+1}ᵀ V_{k+1} − I‖_F`.
    pub orthogonality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleDiagnostics {
    pub cycle: usize,
    /// `‖A Z − V H̄‖_F / (‖A‖_F ‖Z‖_F)` at the end of the cycle.
    pub relation: f64,
    pub orthogonality: f64,
    pub deflation: Option<DeflationDiagnostics>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub report: ConvergenceReport,
    /// Empty unless `diagnostics` is set in the configuration.
    pub diagnostics: Vec<CycleDiagnostics>,
}

fn residual(a: &BlockSparseMatrix, x: &[f64], b: &[f64]) -> Result<Vec<f64>, KrylovError> {
    let mut r = a.spmv(x)?;
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    Ok(r)
}

/// Preconditioned vectors for the first `count` basis columns, applying a
/// fixed operator when they were not stored.
fn z_columns(ws_v: &[Vec<f64>], ws_z: Option<&[Vec<f64>]>, pre: Preconditioning, count: usize) -> Result<Vec<Vec<f64>>, KrylovError> {
    if let Some(z) = ws_z {
        return Ok(z[..count].to_vec());
    }
    ws_v[..count]
        .iter()
        .map(|v| {
            let mut z = vec![0.0; v.len()];
            pre.apply(v, &mut z)?;
            Ok(z)
        })
        .collect()
}

fn deflation_diagnostics(
    a: &BlockSparseMatrix,
    d: &DeflationSubspace,
    pre: Preconditioning,
) -> Result<DeflationDiagnostics, KrylovError> {
    let k = d.k();
    let z = z_columns(&d.v, d.z.as_deref(), pre, k)?;
    let ptp = d.p_k1.transpose().matmul(&d.p_k1)?;
    let mut p_orth = 0.0;
    for i in 0..=k {
        for j in 0..=k {
            let e = ptp[(i, j)] - if i == j { 1.0 } else { 0.0 };
            p_orth += e * e;
        }
    }
    Ok(DeflationDiagnostics {
        k,
        relation: relation_residual(a, &z, &d.v, &d.hbar),
        colinearity: d.colinearity,
        p_orthogonality: p_orth.sqrt(),
        orthogonality: orthogonality(&d.v),
    })
}

/// Restarted right-preconditioned (F)GMRES, with deflated restarting when
/// `cfg.deflation` is set and `cfg.k > 0`. Stops on the true residual at
/// cycle boundaries.
pub fn solve(
    a: &BlockSparseMatrix,
    pre: Preconditioning,
    b: &[f64],
    x0: Option<&[f64]>,
    cfg: &SolverConfig,
    reducer: &Reducer,
) -> Result<Solution, KrylovError> {
    cfg.validate()?;
    let n = a.dim();
    for len in [b.len(), pre.dim(), x0.map_or(n, <[f64]>::len)] {
        if len != n {
            return Err(KrylovError::DimensionMismatch { expected: n, found: len });
        }
    }
    let bnorm = reducer.norm(b);
    if bnorm == 0.0 {
        return Err(KrylovError::ZeroRhs);
    }
    let flexible = matches!(pre, Preconditioning::Flexible(_));
    let deflate = cfg.deflation && cfg.k > 0;
    let tol = cfg.tol_outer;

    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut mvps = 0;
    let mut r = match x0 {
        Some(x0) => {
            mvps += 1;
            residual(a, x0, b)?
        }
        None => b.to_vec(),
    };
    let mut true_rel = reducer.norm(&r) / bnorm;
    let mut iterations = Vec::new();
    let mut cycles = Vec::new();
    let mut diagnostics = Vec::new();
    if true_rel <= tol {
        return Ok(Solution {
            x,
            report: ConvergenceReport {
                status: Status::Converged,
                iterations,
                cycles,
                mvps,
                final_true_res: true_rel,
            },
            diagnostics,
        });
    }

    let mut precondition = |v: &[f64], z: &mut [f64]| pre.apply(v, z);
    let mut carried: Option<DeflationSubspace> = None;
    let mut iters = 0;
    let mut stagnant = 0;
    let mut cycle = 0;
    let status = loop {
        let prev_true = true_rel;
        let (mut ws, mut chain, kept) = match carried.take() {
            Some(d) => {
                let kept = d.k();
                let mut c = d.c;
                c.resize(cfg.m + 1, 0.0);
                let mut chain = GivensChain::new(c);
                for j in 0..kept {
                    chain.extend_dense(&d.hbar.column(j))?;
                }
                (ArnoldiBasis::from_parts(d.v, d.z, &d.hbar), chain, kept)
            }
            None => {
                let beta = reducer.norm(&r);
                let v1 = r.iter().map(|v| v / beta).collect();
                let mut c = vec![0.0; cfg.m + 1];
                c[0] = beta;
                (ArnoldiBasis::new(v1, flexible), GivensChain::new(c), 0)
            }
        };
        let mut lsq = chain.residual() / bnorm;
        let mut breakdown = false;
        while ws.len() < cfg.m && iters < cfg.max_iters {
            let step = arnoldi_step(&mut ws, a, &mut precondition, cfg.passes, reducer)?;
            iters += 1;
            mvps += step.mvps;
            lsq = chain.extend(&step.column, step.h_sub)?.residual / bnorm;
            iterations.push(IterationRecord {
                iter: iters,
                cycle,
                lsq_rel_res: lsq,
                true_rel_res: None,
                mvps,
            });
            if step.breakdown {
                breakdown = true;
                break;
            }
            if lsq <= tol {
                break;
            }
        }
        let jm = ws.len();

        let y = chain.solution()?;
        match pre {
            Preconditioning::Flexible(_) => {
                let z = ws.preconditioned().expect("flexible basis stores Z");
                for (yi, zi) in y.iter().zip(z) {
                    axpy(*yi, zi, &mut x);
                }
            }
            Preconditioning::Fixed(m) => {
                let mut t = vec![0.0; n];
                for (yi, vi) in y.iter().zip(ws.basis()) {
                    axpy(*yi, vi, &mut t);
                }
                let mut u = vec![0.0; n];
                m.apply(&t, &mut u)?;
                axpy(1.0, &u, &mut x);
            }
        }
        r = residual(a, &x, b)?;
        mvps += 1;
        true_rel = reducer.norm(&r) / bnorm;
        if jm > kept {
            if let Some(last) = iterations.last_mut() {
                last.true_rel_res = Some(true_rel);
                last.mvps = mvps;
            }
        }

        let outcome = if true_rel <= tol {
            Some(if breakdown {
                Status::BreakdownConverged
            } else {
                Status::Converged
            })
        } else {
            if lsq <= tol && true_rel > 0.99 * prev_true {
                stagnant += 1;
            } else {
                stagnant = 0;
            }
            if stagnant >= 2 {
                Some(Status::Stagnated)
            } else if iters >= cfg.max_iters {
                Some(Status::MaxIter)
            } else {
                None
            }
        };

        let mut diag = cfg.diagnostics.then(|| -> Result<CycleDiagnostics, KrylovError> {
            let z = z_columns(ws.basis(), ws.preconditioned(), pre, jm)?;
            Ok(CycleDiagnostics {
                cycle,
                relation: relation_residual(a, &z, ws.basis(), &ws.hbar()),
                orthogonality: orthogonality(ws.basis()),
                deflation: None,
            })
        });

        let mut fallback = false;
        if outcome.is_none() && deflate && !breakdown && jm > cfg.k {
            let mut s = chain.residual_vector();
            s.truncate(jm + 1);
            match build_deflation(&ws, &s, cfg.k) {
                Ok(mut d) => {
                    if cfg.economical_reorth {
                        let kk = d.k();
                        let (head, tail) = d.v.split_at_mut(kk);
                        let last = &mut tail[0];
                        for vi in head.iter() {
                            let h = reducer.dot(vi, last);
                            axpy(-h, vi, last);
                        }
                        let nl = reducer.norm(last);
                        last.iter_mut().for_each(|v| *v /= nl);
                    }
                    if let Some(Ok(cd)) = diag.as_mut() {
                        cd.deflation = Some(deflation_diagnostics(a, &d, pre)?);
                    }
                    carried = Some(d);
                }
                Err(_) => fallback = true,
            }
        }
        if let Some(cd) = diag {
            diagnostics.push(cd?);
        }

        cycles.push(CycleRecord {
            cycle,
            deflated_columns: kept,
            iterations: jm - kept,
            lsq_rel_res: lsq,
            true_rel_res: true_rel,
            discrepancy: (lsq - true_rel).abs() > 0.1 * true_rel,
            deflation_fallback: fallback,
            breakdown,
        });
        if let Some(s) = outcome {
            break s;
        }
        cycle += 1;
    };

    Ok(Solution {
        x,
        report: ConvergenceReport {
            status,
            iterations,
            cycles,
            mvps,
            final_true_res: true_rel,
        },
        diagnostics,
    })
}

/// Runs one member of the family. Flexible variants precondition each
/// outer step with a non-restarted inner GMRES(`m_inner`) on `m`; the
/// others apply `m` directly.
pub fn solve_variant(
    variant: Variant,
    a: &BlockSparseMatrix,
    m: &dyn Preconditioner,
    b: &[f64],
    x0: Option<&[f64]>,
    cfg: &SolverConfig,
    reducer: &Reducer,
) -> Result<Solution, KrylovError> {
    let cfg = SolverConfig {
        deflation: cfg.deflation && variant.is_deflated(),
        ..cfg.clone()
    };
    if variant.is_flexible() {
        let inner = InnerGmres::new(a, m, cfg.m_inner, cfg.tol_inner)
            .with_passes(cfg.passes)
            .with_reducer(reducer.clone());
        solve(a, Preconditioning::Flexible(&inner), b, x0, &cfg, reducer)
    } else {
        solve(a, Preconditioning::Fixed(m), b, x0, &cfg, reducer)
    }
}

/// GMRES(m) with fixed right preconditioner `m`.
pub fn gmres(
    a: &BlockSparseMatrix,
    m: &dyn Preconditioner,
    b: &[f64],
    x0: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<Solution, KrylovError> {
    solve_variant(Variant::Gmres, a, m, b, x0, cfg, &Reducer::single(a))
}

/// FGMRES(m, mᵢ) with inner GMRES preconditioned by `m`.
pub fn fgmres(
    a: &BlockSparseMatrix,
    m: &dyn Preconditioner,
    b: &[f64],
    x0: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<Solution, KrylovError> {
    solve_variant(Variant::Fgmres, a, m, b, x0, cfg, &Reducer::single(a))
}

/// GMRES-DR(m, k).
pub fn gmres_dr(
    a: &BlockSparseMatrix,
    m: &dyn Preconditioner,
    b: &[f64],
    x0: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<Solution, KrylovError> {
    solve_variant(Variant::GmresDr, a, m, b, x0, cfg, &Reducer::single(a))
}

/// FGMRES-DR(m, mᵢ, k).
pub fn fgmres_dr(
    a: &BlockSparseMatrix,
    m: &dyn Preconditioner,
    b: &[f64],
    x0: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<Solution, KrylovError> {
    solve_variant(Variant::FgmresDr, a, m, b, x0, cfg, &Reducer::single(a))
}
