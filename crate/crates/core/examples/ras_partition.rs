//! Subdomain partitions and restricted additive Schwarz overlap.

use flexdr::blocksparse::{generate_convection_diffusion, ConvectionDiffusion};
use flexdr::krylov::{solve_variant, Reducer, SolverConfig, Variant};
use flexdr::partition::{extend_overlap, partition_bfs};
use flexdr::precond::{Leaf, Precision, PreconditionerStack, StackConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = generate_convection_diffusion(&ConvectionDiffusion {
        nx: 42,
        ny: 42,
        peclet: 20.0,
        block_size: 2,
        seed: 2,
        periodic: false,
    })?;
    let a = &problem.matrix;
    let cfg = SolverConfig {
        m: 40,
        ..SolverConfig::default()
    };
    println!("{:>2}  {:>9}  {:>7}  {:>8}  {:>5}", "p", "imbalance", "overlap", "ext rows", "its");
    for p in [1, 2, 4, 8] {
        let part = partition_bfs(a, p, None)?;
        for overlap in [0, 1, 2] {
            let ext: usize = (0..p).map(|s| extend_overlap(a, &part, overlap).extended(s).len()).sum();
            let m = PreconditionerStack::build(
                a,
                &part,
                &StackConfig {
                    leaf: Leaf::Bilu { k: 0 },
                    overlap,
                    precision: Precision::Working,
                },
            )?;
            let reducer = Reducer::new(part.clone(), a.block_size());
            let sol = solve_variant(Variant::Gmres, a, &m, &problem.rhs, None, &cfg, &reducer)?;
            println!(
                "{p:>2}  {:>9.3}  {overlap:>7}  {ext:>8}  {:>5}",
                part.imbalance(),
                sol.report.iters()
            );
        }
    }
    Ok(())
}
