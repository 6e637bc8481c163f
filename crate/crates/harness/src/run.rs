use std::path::{Path, PathBuf};
use std::time::Instant;

use flexdr::blocksparse::{
    equilibrate, generate_convection_diffusion, generate_prescribed_spectrum, read_bsr_binary, read_matrix_market,
    ConvectionDiffusion, PrescribedSpectrum, ProblemInstance, Provenance, ScalingPair,
};
use flexdr::krylov::{solve_variant, ConvergenceReport, CycleDiagnostics, Reducer, Status, Summary};
use flexdr::partition::{partition_bfs, Partition, PartitionDump};
use flexdr::precond::{Preconditioner, PreconditionerStack};

use crate::config::{ProblemConfig, RunConfig};
use crate::HarnessError;

/// Assembles the problem described by `p`.
pub fn build_problem(p: &ProblemConfig) -> Result<ProblemInstance, HarnessError> {
    Ok(match p {
        ProblemConfig::Convdiff {
            nx,
            ny,
            peclet,
            block_size,
            seed,
            periodic,
        } => generate_convection_diffusion(&ConvectionDiffusion {
            nx: *nx,
            ny: *ny,
            peclet: *peclet,
            block_size: *block_size,
            seed: *seed,
            periodic: *periodic,
        })?,
        ProblemConfig::Spectrum { block_size, seed, .. } => generate_prescribed_spectrum(&PrescribedSpectrum {
            eigenvalues: p.spectrum().expect("spectrum problem"),
            block_size: *block_size,
            seed: *seed,
        })?,
        ProblemConfig::File { path, block_size } => match path.extension().and_then(|e| e.to_str()) {
            Some("mtx") => read_matrix_market(path, *block_size)?,
            Some("bsr") => {
                let matrix = read_bsr_binary(path)?;
                if matrix.block_size() != *block_size {
                    return Err(HarnessError::Config(format!(
                        "{} stores {}x{} blocks, config says {block_size}",
                        path.display(),
                        matrix.block_size(),
                        matrix.block_size()
                    )));
                }
                let reference = vec![1.0; matrix.dim()];
                ProblemInstance::with_reference(
                    matrix,
                    reference,
                    Provenance::File {
                        path: path.display().to_string(),
                        block_size: *block_size,
                    },
                )
            }
            _ => {
                return Err(HarnessError::Config(format!(
                    "{}: expected a .mtx or .bsr file",
                    path.display()
                )))
            }
        },
        ProblemConfig::Identity { n, block_size } => ProblemInstance::identity(*n, *block_size),
    })
}

/// Everything built before the solve.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// The system actually solved, equilibrated when requested.
    pub instance: ProblemInstance,
    /// Known solution of the unscaled system.
    pub reference: Option<Vec<f64>>,
    pub scaling: Option<ScalingPair>,
    pub partition: Partition,
    pub stack: PreconditionerStack,
    /// Seconds spent building the preconditioner.
    pub setup_time_s: f64,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared, HarnessError> {
    cfg.validate()?;
    let mut instance = build_problem(&cfg.problem)?;
    let reference = instance.reference.take();
    let scaling = if cfg.preprocess.equilibrate {
        let (a, rhs, pair) = equilibrate(&instance.matrix, &instance.rhs)?;
        instance.matrix = a;
        instance.rhs = rhs;
        Some(pair)
    } else {
        None
    };
    let seeds = cfg.partition.seeds.as_deref();
    let partition = partition_bfs(&instance.matrix, cfg.partition.p, seeds)?;
    let start = Instant::now();
    let stack = PreconditionerStack::build(&instance.matrix, &partition, &cfg.preconditioner.stack_config())?;
    let setup_time_s = start.elapsed().as_secs_f64();
    Ok(Prepared {
        instance,
        reference,
        scaling,
        partition,
        stack,
        setup_time_s,
    })
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub solver: String,
    pub preconditioner: String,
    /// Stored entries of the preconditioner's factors.
    pub precond_nnz: usize,
    /// Solution of the original, unscaled system.
    pub x: Vec<f64>,
    pub report: ConvergenceReport,
    pub diagnostics: Vec<CycleDiagnostics>,
    pub partition: PartitionDump,
    pub setup_time_s: f64,
    /// Seconds spent in the solve alone.
    pub wall_time_s: f64,
    /// `‖x − x_ref‖ / ‖x_ref‖` when the problem has a known solution.
    pub reference_error: Option<f64>,
}

impl RunOutcome {
    pub fn summary(&self) -> Summary {
        self.report.summary(self.wall_time_s)
    }

    pub fn exit_code(&self) -> i32 {
        exit_code(self.report.status)
    }
}

/// 0 when converged, 2 otherwise.
pub fn exit_code(status: Status) -> i32 {
    if status.is_converged() {
        0
    } else {
        2
    }
}

fn relative_error(x: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = reference.iter().map(|v| v * v).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Solves a prepared problem with the solver section of `cfg`.
pub fn solve_prepared(cfg: &RunConfig, prep: &Prepared) -> Result<RunOutcome, HarnessError> {
    let a = &prep.instance.matrix;
    let reducer = Reducer::new(prep.partition.clone(), a.block_size());
    let start = Instant::now();
    let sol = solve_variant(
        cfg.solver.variant,
        a,
        &prep.stack,
        &prep.instance.rhs,
        None,
        &cfg.solver.solver_config(),
        &reducer,
    )?;
    let wall_time_s = start.elapsed().as_secs_f64();
    let x = match &prep.scaling {
        Some(pair) => pair.unscale_solution(&sol.x),
        None => sol.x,
    };
    let reference_error = prep.reference.as_ref().map(|r| relative_error(&x, r));
    Ok(RunOutcome {
        solver: cfg.solver.label(),
        preconditioner: prep.stack.label(),
        precond_nnz: prep.stack.nnz(),
        x,
        report: sol.report,
        diagnostics: sol.diagnostics,
        partition: prep.partition.dump(),
        setup_time_s: prep.setup_time_s,
        wall_time_s,
        reference_error,
    })
}

/// Builds and solves in the current thread pool.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, HarnessError> {
    let prep = prepare(cfg)?;
    solve_prepared(cfg, &prep)
}

/// Like [`run`], inside a dedicated pool of `threads` workers when given.
pub fn run_with_threads(cfg: &RunConfig, threads: Option<usize>) -> Result<RunOutcome, HarnessError> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            pool.install(|| run(cfg))
        }
        None => run(cfg),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `<name>.csv` (iteration history), `<name>.json` (summary) and
/// `<name>.partition.json` into `dir`.
pub fn write_artifacts(outcome: &RunOutcome, dir: &Path, name: &str) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let csv = dir.join(format!("{name}.csv"));
    write_file(&csv, &outcome.report.to_csv())?;
    let json = dir.join(format!("{name}.json"));
    write_file(&json, &(serde_json::to_string_pretty(&outcome.summary())? + "\n"))?;
    let part = dir.join(format!("{name}.partition.json"));
    write_file(&part, &(serde_json::to_string(&outcome.partition)? + "\n"))?;
    Ok(vec![csv, json, part])
}
