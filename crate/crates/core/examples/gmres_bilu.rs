//! Restarted GMRES with block ILU preconditioning of increasing fill.

use flexdr::blocksparse::{generate_convection_diffusion, ConvectionDiffusion};
use flexdr::krylov::{gmres, SolverConfig};
use flexdr::partition::Partition;
use flexdr::precond::{Leaf, Precision, Preconditioner, PreconditionerStack, StackConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = generate_convection_diffusion(&ConvectionDiffusion {
        nx: 42,
        ny: 42,
        peclet: 50.0,
        block_size: 2,
        seed: 1,
        periodic: false,
    })?;
    let a = &problem.matrix;
    let reference = problem.reference.as_ref().expect("generated problems know their solution");
    let cfg = SolverConfig {
        m: 30,
        tol_outer: 1e-10,
        ..SolverConfig::default()
    };
    for leaf in [Leaf::Identity, Leaf::Bilu { k: 0 }, Leaf::Bilu { k: 1 }] {
        let m = PreconditionerStack::build(
            a,
            &Partition::single(a.n_block_rows()),
            &StackConfig {
                leaf,
                overlap: 0,
                precision: Precision::Working,
            },
        )?;
        let sol = gmres(a, &m, &problem.rhs, None, &cfg)?;
        let err = sol
            .x
            .iter()
            .zip(reference)
            .map(|(x, r)| (x - r).powi(2))
            .sum::<f64>()
            .sqrt()
            / reference.iter().map(|r| r * r).sum::<f64>().sqrt();
        println!(
            "{:<16} {:>9}  {:>5} its  {:>3} cycles  true res {:.2e}  error {:.2e}  factor nnz {}",
            m.label(),
            sol.report.status,
            sol.report.iters(),
            sol.report.num_cycles(),
            sol.report.final_true_res,
            err,
            m.nnz()
        );
    }
    Ok(())
}
