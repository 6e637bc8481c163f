//! Restarted GMRES family: GMRES(m), flexible FGMRES(m, mᵢ) with an inner
//! GMRES preconditioner, and both variants with deflated restarting.

mod arnoldi;
mod deflation;
mod inner;
mod report;
mod solver;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blocksparse::{BlockSparseError, BlockSparseMatrix};
use crate::dense::{norm2, DenseError};
use crate::precond::PrecondError;

pub use arnoldi::{arnoldi_step, orthogonality, relation_residual, ArnoldiBasis, ArnoldiStep, Reducer, BREAKDOWN_TOL};
pub use deflation::{build_deflation, harmonic_ritz, spectral_residual, DeflationSubspace, HarmonicRitz};
pub use inner::{FlexiblePreconditioner, Frozen, InnerGmres};
pub use report::{ConvergenceReport, CycleRecord, IterationRecord, Status, Summary, CSV_HEADER};
pub use solver::{
    fgmres, fgmres_dr, gmres, gmres_dr, solve, solve_variant, CycleDiagnostics, DeflationDiagnostics, Preconditioning,
    Solution,
};

#[derive(Debug, Error)]
pub enum KrylovError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("right-hand side is zero")]
    ZeroRhs,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("deflation basis has rank {rank}, needed {requested}")]
    DeflationRankLoss { rank: usize, requested: usize },
    #[error(transparent)]
    Precond(#[from] PrecondError),
    #[error(transparent)]
    Dense(#[from] DenseError),
    #[error(transparent)]
    BlockSparse(#[from] BlockSparseError),
}

/// Which member of the solver family to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Gmres,
    Fgmres,
    GmresDr,
    FgmresDr,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Gmres, Variant::Fgmres, Variant::GmresDr, Variant::FgmresDr];

    pub fn is_flexible(self) -> bool {
        matches!(self, Variant::Fgmres | Variant::FgmresDr)
    }

    pub fn is_deflated(self) -> bool {
        matches!(self, Variant::GmresDr | Variant::FgmresDr)
    }

    /// For instance `FGMRES-DR(60,20,20)`.
    pub fn label(self, cfg: &SolverConfig) -> String {
        match self {
            Variant::Gmres => format!("GMRES({})", cfg.m),
            Variant::Fgmres => format!("FGMRES({},{})", cfg.m, cfg.m_inner),
            Variant::GmresDr => format!("GMRES-DR({},{})", cfg.m, cfg.k),
            Variant::FgmresDr => format!("FGMRES-DR({},{},{})", cfg.m, cfg.m_inner, cfg.k),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Gmres => "gmres",
            Variant::Fgmres => "fgmres",
            Variant::GmresDr => "gmres_dr",
            Variant::FgmresDr => "fgmres_dr",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Outer Krylov space size.
    pub m: usize,
    /// Inner GMRES iterations per flexible preconditioner application.
    pub m_inner: usize,
    /// Harmonic Ritz vectors kept across restarts.
    pub k: usize,
    /// Relative true residual at which the outer solve stops.
    pub tol_outer: f64,
    /// Relative residual reduction at which the inner solve stops.
    pub tol_inner: f64,
    /// Total outer iterations allowed.
    pub max_iters: usize,
    /// Modified Gram-Schmidt passes per Arnoldi step.
    pub passes: usize,
    /// Deflated restarting; only used by the `-DR` variants.
    pub deflation: bool,
    /// Re-orthogonalize only the last vector of the deflated basis.
    pub economical_reorth: bool,
    /// Record relation and orthogonality checks at every cycle boundary.
    pub diagnostics: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            m: 60,
            m_inner: 20,
            k: 20,
            tol_outer: 1e-9,
            tol_inner: 0.5,
            max_iters: 1000,
            passes: 2,
            deflation: true,
            economical_reorth: false,
            diagnostics: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), KrylovError> {
        let bad = |msg: String| Err(KrylovError::InvalidConfig(msg));
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        if self.m_inner == 0 {
            return bad("m_inner must be at least 1".into());
        }
        if self.deflation && self.k >= self.m {
            return bad(format!("k = {} must be smaller than m = {}", self.k, self.m));
        }
        if !(self.tol_outer > 0.0 && self.tol_outer.is_finite()) {
            return bad(format!("tol_outer = {} must be positive", self.tol_outer));
        }
        if !(self.tol_inner > 0.0 && self.tol_inner.is_finite()) {
            return bad(format!("tol_inner = {} must be positive", self.tol_inner));
        }
        if !(1..=2).contains(&self.passes) {
            return bad(format!("passes = {} must be 1 or 2", self.passes));
        }
        Ok(())
    }
}

/// `‖b − A x‖ / ‖b‖` with an exact product in working precision.
pub fn true_residual(a: &BlockSparseMatrix, x: &[f64], b: &[f64]) -> Result<f64, KrylovError> {
    if b.len() != a.dim() {
        return Err(KrylovError::DimensionMismatch {
            expected: a.dim(),
            found: b.len(),
        });
    }
    let nb = norm2(b);
    if nb == 0.0 {
        return Err(KrylovError::ZeroRhs);
    }
    let mut r = a.spmv(x)?;
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    Ok(norm2(&r) / nb)
}
