//! TOML run configuration.
//!
//! ```toml
//! [problem]
//! kind = "convdiff"        # convdiff | spectrum | file | identity
//! nx = 48
//! ny = 48
//! peclet = 100.0
//! block_size = 2
//! seed = 7
//!
//! [partition]
//! p = 4
//!
//! [preconditioner]
//! leaf = "bilu"            # bilu | lusgs | none
//! k = 0
//! overlap = 1
//!
//! [solver]
//! variant = "fgmres_dr"
//! ```
//!
//! Every section except `[problem]` may be omitted. Unknown keys are
//! rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use flexdr::krylov::{SolverConfig, Variant};
use flexdr::precond::{Leaf, Precision, StackConfig};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub partition: PartitionConfig,
    #[serde(default)]
    pub preconditioner: PreconditionerConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub scaling: ScalingConfig,
}

fn default_size() -> usize {
    32
}
fn default_one() -> usize {
    1
}
fn default_peclet() -> f64 {
    1.0
}
fn default_lo() -> f64 {
    1.0
}
fn default_hi() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// Upwind convection-diffusion on a grid of `nx × ny` points.
    Convdiff {
        #[serde(default = "default_size")]
        nx: usize,
        #[serde(default = "default_size")]
        ny: usize,
        #[serde(default = "default_peclet")]
        peclet: f64,
        #[serde(default = "default_one")]
        block_size: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        periodic: bool,
    },
    /// Symmetric matrix with a chosen spectrum: either `eigenvalues`
    /// verbatim, or `small` followed by `n − len(small)` values spread
    /// evenly over `[lo, hi]`.
    Spectrum {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eigenvalues: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(default)]
        small: Vec<f64>,
        #[serde(default = "default_lo")]
        lo: f64,
        #[serde(default = "default_hi")]
        hi: f64,
        #[serde(default = "default_one")]
        block_size: usize,
        #[serde(default)]
        seed: u64,
    },
    /// Matrix Market (`.mtx`) or binary BSR (`.bsr`) file. The right-hand
    /// side is `A·1`.
    File {
        path: PathBuf,
        #[serde(default = "default_one")]
        block_size: usize,
    },
    Identity {
        n: usize,
        #[serde(default = "default_one")]
        block_size: usize,
    },
}

impl ProblemConfig {
    pub fn block_size(&self) -> usize {
        match self {
            ProblemConfig::Convdiff { block_size, .. }
            | ProblemConfig::Spectrum { block_size, .. }
            | ProblemConfig::File { block_size, .. }
            | ProblemConfig::Identity { block_size, .. } => *block_size,
        }
    }

    /// The eigenvalue list of a spectrum problem.
    pub fn spectrum(&self) -> Option<Vec<f64>> {
        match self {
            ProblemConfig::Spectrum {
                eigenvalues: Some(ev), ..
            } => Some(ev.clone()),
            ProblemConfig::Spectrum {
                eigenvalues: None,
                n,
                small,
                lo,
                hi,
                ..
            } => Some(flexdr::blocksparse::clustered_spectrum(n.unwrap_or(0), small, *lo, *hi)),
            _ => None,
        }
    }

    pub(crate) fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.block_size() == 0 {
            return bad("problem.block_size must be at least 1".into());
        }
        match self {
            ProblemConfig::Convdiff {
                nx, ny, peclet, periodic, ..
            } => {
                let min = if *periodic { 1 } else { 3 };
                if *nx < min || *ny < min {
                    return bad(format!("problem grid {nx}x{ny} has no interior unknowns"));
                }
                if !peclet.is_finite() || *peclet < 0.0 {
                    return bad(format!("problem.peclet = {peclet} must be finite and non-negative"));
                }
            }
            ProblemConfig::Spectrum {
                eigenvalues,
                n,
                small,
                lo,
                hi,
                ..
            } => match (eigenvalues, n) {
                (Some(_), Some(_)) => return bad("give either problem.eigenvalues or problem.n, not both".into()),
                (None, None) => return bad("spectrum problems need problem.eigenvalues or problem.n".into()),
                (Some(ev), None) if ev.is_empty() => return bad("problem.eigenvalues is empty".into()),
                (None, Some(n)) if *n == 0 || small.len() > *n => {
                    return bad(format!("problem.n = {n} must be positive and at least len(small)"));
                }
                (None, Some(_)) if !(lo.is_finite() && hi.is_finite() && lo <= hi) => {
                    return bad(format!("problem spectrum interval [{lo}, {hi}] is invalid"));
                }
                _ => {}
            },
            ProblemConfig::File { .. } => {}
            ProblemConfig::Identity { n, .. } => {
                if *n == 0 {
                    return bad("problem.n must be positive".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Row-then-column scaling before building the preconditioner.
    pub equilibrate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionConfig {
    /// Number of subdomains.
    pub p: usize,
    /// Optional BFS seed rows, one per subdomain.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<usize>>,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self { p: 1, seeds: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeafKind {
    Bilu,
    Lusgs,
    None,
}

/// A positive CFL number, written either as a number or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cfl(pub f64);

impl Serialize for Cfl {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Cfl {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(v) => Ok(Cfl(v as f64)),
            Repr::Num(v) => Ok(Cfl(v)),
            Repr::Text(t) if t.eq_ignore_ascii_case("inf") => Ok(Cfl(f64::INFINITY)),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("cfl must be a number or \"inf\", got {t:?}"))),
        }
    }
}

impl fmt::Display for Cfl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreconditionerConfig {
    pub leaf: LeafKind,
    /// Fill level of BILU(k).
    pub k: usize,
    /// LU-SGS sweep count, even.
    pub sweeps: usize,
    pub cfl: Cfl,
    /// Schwarz overlap in graph layers.
    pub overlap: usize,
    pub precision: Precision,
}

impl Default for PreconditionerConfig {
    fn default() -> Self {
        Self {
            leaf: LeafKind::Bilu,
            k: 0,
            sweeps: 6,
            cfl: Cfl(f64::INFINITY),
            overlap: 1,
            precision: Precision::Working,
        }
    }
}

impl PreconditionerConfig {
    pub fn stack_config(&self) -> StackConfig {
        let leaf = match self.leaf {
            LeafKind::Bilu => Leaf::Bilu { k: self.k },
            LeafKind::Lusgs => Leaf::Lusgs {
                sweeps: self.sweeps,
                cfl: self.cfl.0,
            },
            LeafKind::None => Leaf::Identity,
        };
        StackConfig {
            leaf,
            overlap: self.overlap,
            precision: self.precision,
        }
    }
}

/// Solver choice plus the numerical parameters of [`SolverConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub variant: Variant,
    pub m: usize,
    pub m_inner: usize,
    pub k: usize,
    pub tol_outer: f64,
    pub tol_inner: f64,
    pub max_iters: usize,
    pub passes: usize,
    pub deflation: bool,
    pub economical_reorth: bool,
    pub diagnostics: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            variant: Variant::FgmresDr,
            m: d.m,
            m_inner: d.m_inner,
            k: d.k,
            tol_outer: d.tol_outer,
            tol_inner: d.tol_inner,
            max_iters: d.max_iters,
            passes: d.passes,
            deflation: d.deflation,
            economical_reorth: d.economical_reorth,
            diagnostics: d.diagnostics,
        }
    }
}

impl SolverSection {
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            m: self.m,
            m_inner: self.m_inner,
            k: self.k,
            tol_outer: self.tol_outer,
            tol_inner: self.tol_inner,
            max_iters: self.max_iters,
            passes: self.passes,
            deflation: self.deflation,
            economical_reorth: self.economical_reorth,
            diagnostics: self.diagnostics,
        }
    }

    pub fn label(&self) -> String {
        self.variant.label(&self.solver_config())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for the CSV history and JSON summary; nothing is written
    /// when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// File stem of the artifacts.
    pub name: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            name: "run".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingConfig {
    /// Thread counts for `scale`, ascending.
    pub threads: Vec<usize>,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self { threads: vec![1, 2, 4] }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config; a relative `problem.path` is resolved
    /// against the config file's directory.
    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            HarnessError::Toml(inner) => HarnessError::Config(format!("{}: {inner}", path.display())),
            other => other,
        })?;
        if let ProblemConfig::File { path: p, .. } = &mut cfg.problem {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Checks everything that can be checked without building the problem.
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.problem.validate()?;
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.partition.p == 0 {
            return bad("partition.p must be at least 1".into());
        }
        if let Some(seeds) = &self.partition.seeds {
            if seeds.len() != self.partition.p {
                return bad(format!(
                    "partition.seeds has {} entries for p = {}",
                    seeds.len(),
                    self.partition.p
                ));
            }
        }
        let pc = &self.preconditioner;
        if pc.leaf == LeafKind::Bilu && pc.k > 1 {
            return bad(format!("preconditioner.k = {} must be 0 or 1", pc.k));
        }
        if pc.leaf == LeafKind::Lusgs && (pc.sweeps < 2 || pc.sweeps % 2 != 0) {
            return bad(format!("preconditioner.sweeps = {} must be even and at least 2", pc.sweeps));
        }
        if !(pc.cfl.0 > 0.0) {
            return bad(format!("preconditioner.cfl = {} must be positive", pc.cfl));
        }
        let mut solver = self.solver.solver_config();
        solver.deflation &= self.solver.variant.is_deflated();
        solver.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.output.name.is_empty() || self.output.name.contains(['/', '\\']) {
            return bad(format!("output.name {:?} must be a plain file stem", self.output.name));
        }
        if self.scaling.threads.is_empty()
            || self.scaling.threads.contains(&0)
            || self.scaling.threads.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("scaling.threads must be a non-empty ascending list of positive counts".into());
        }
        Ok(())
    }

    /// The fully resolved configuration, defaults included.
    pub fn dump(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}
