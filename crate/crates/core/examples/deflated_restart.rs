//! Deflated restarts on a matrix with a few tiny eigenvalues.

use flexdr::blocksparse::{clustered_spectrum, generate_prescribed_spectrum, PrescribedSpectrum};
use flexdr::krylov::{solve_variant, Reducer, SolverConfig, Variant};
use flexdr::partition::Partition;
use flexdr::precond::{Leaf, Precision, PreconditionerStack, StackConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let eigenvalues = clustered_spectrum(200, &[1e-4, 2e-4, 3e-4, 4e-4, 5e-4], 1.0, 2.0);
    let problem = generate_prescribed_spectrum(&PrescribedSpectrum {
        eigenvalues,
        block_size: 1,
        seed: 0,
    })?;
    let a = &problem.matrix;
    let identity = PreconditionerStack::build(
        a,
        &Partition::single(a.n_block_rows()),
        &StackConfig {
            leaf: Leaf::Identity,
            overlap: 0,
            precision: Precision::Working,
        },
    )?;
    let cfg = SolverConfig {
        m: 20,
        k: 8,
        m_inner: 5,
        tol_outer: 1e-10,
        max_iters: 500,
        diagnostics: true,
        ..SolverConfig::default()
    };
    for v in Variant::ALL {
        let sol = solve_variant(v, a, &identity, &problem.rhs, None, &cfg, &Reducer::single(a))?;
        println!(
            "{:<18} {:>9} after {:>3} iterations, {:>2} cycles, {:>4} mvps",
            v.label(&cfg),
            sol.report.status,
            sol.report.iters(),
            sol.report.num_cycles(),
            sol.report.mvps
        );
        for d in sol.diagnostics.iter().filter_map(|d| d.deflation.as_ref().map(|dd| (d.cycle, dd))) {
            println!(
                "    cycle {:>2}: kept {} vectors, relation {:.1e}, colinearity {:.1e}",
                d.0, d.1.k, d.1.relation, d.1.colinearity
            );
        }
    }
    Ok(())
}
