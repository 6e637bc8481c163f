//! Configuration-driven runs, comparison tables and thread-scaling studies
//! on top of `flexdr`.

pub mod compare;
pub mod config;
pub mod gen;
pub mod run;
pub mod scale;

use std::path::PathBuf;

use flexdr::blocksparse::BlockSparseError;
use flexdr::krylov::KrylovError;
use flexdr::partition::PartitionError;
use flexdr::precond::PrecondError;
use thiserror::Error;

pub use compare::{compare, subdomain_sweep, ComparisonRow, ComparisonTable, SweepRow, SweepTable};
pub use config::RunConfig;
pub use gen::{generate, parse_params, GenKind};
pub use run::{exit_code, prepare, run, run_with_threads, write_artifacts, Prepared, RunOutcome};
pub use scale::{scaling_study, ScalingRow, ScalingTable};

/// Environment variable consulted for the thread count when `--threads`
/// is not given.
pub const THREADS_ENV: &str = "FLEXDR_THREADS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot parse configuration: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Problem(#[from] BlockSparseError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Precond(#[from] PrecondError),
    #[error(transparent)]
    Solver(#[from] KrylovError),
    #[error("cannot build thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
    #[error("runs are not reproducible: {0}")]
    Determinism(String),
    #[error("{0}")]
    Argument(String),
}
