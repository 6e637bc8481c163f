//! FGMRES whose preconditioner is itself a short GMRES run, with the
//! inner tolerance varied.

use flexdr::blocksparse::{generate_convection_diffusion, ConvectionDiffusion};
use flexdr::krylov::{solve, InnerGmres, Preconditioning, Reducer, SolverConfig};
use flexdr::partition::partition_bfs;
use flexdr::precond::{PreconditionerStack, StackConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = generate_convection_diffusion(&ConvectionDiffusion {
        nx: 50,
        ny: 50,
        peclet: 100.0,
        block_size: 2,
        seed: 3,
        periodic: false,
    })?;
    let a = &problem.matrix;
    let part = partition_bfs(a, 4, None)?;
    let stack = PreconditionerStack::build(a, &part, &StackConfig::default())?;
    let reducer = Reducer::new(part, a.block_size());
    let cfg = SolverConfig {
        deflation: false,
        ..SolverConfig::default()
    };
    println!("{:>9}  {:>10}  {:>5}  {:>6}", "tol_inner", "status", "outer", "mvps");
    for tol_inner in [0.5, 0.1, 1e-2, 1e-4] {
        let inner = InnerGmres::new(a, &stack, 20, tol_inner).with_reducer(reducer.clone());
        let sol = solve(a, Preconditioning::Flexible(&inner), &problem.rhs, None, &cfg, &reducer)?;
        println!(
            "{tol_inner:>9}  {:>10}  {:>5}  {:>6}",
            sol.report.status,
            sol.report.iters(),
            sol.report.mvps
        );
    }
    Ok(())
}
