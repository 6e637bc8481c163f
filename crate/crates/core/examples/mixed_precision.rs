//! Applying the preconditioner in single precision inside a flexible
//! outer iteration.

use flexdr::blocksparse::{generate_convection_diffusion, ConvectionDiffusion};
use flexdr::krylov::{fgmres_dr, SolverConfig};
use flexdr::partition::partition_bfs;
use flexdr::precond::{Leaf, Precision, Preconditioner, PreconditionerStack, StackConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = generate_convection_diffusion(&ConvectionDiffusion {
        nx: 50,
        ny: 50,
        peclet: 100.0,
        block_size: 4,
        seed: 5,
        periodic: false,
    })?;
    let a = &problem.matrix;
    let part = partition_bfs(a, 4, None)?;
    let cfg = SolverConfig {
        tol_outer: 1e-10,
        tol_inner: 0.1,
        ..SolverConfig::default()
    };
    for leaf in [Leaf::Bilu { k: 0 }, Leaf::Lusgs { sweeps: 4, cfl: f64::INFINITY }] {
        for precision in [Precision::Working, Precision::Reduced] {
            let m = PreconditionerStack::build(a, &part, &StackConfig { leaf, overlap: 1, precision })?;
            let start = std::time::Instant::now();
            let sol = fgmres_dr(a, &m, &problem.rhs, None, &cfg)?;
            println!(
                "{:<26} {:>9}  {:>3} its  {:>5} mvps  true res {:.2e}  {:.3} s",
                m.label(),
                sol.report.status,
                sol.report.iters(),
                sol.report.mvps,
                sol.report.final_true_res,
                start.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
