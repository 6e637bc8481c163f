//! Harmonic Ritz values from an Arnoldi factorization approximate the
//! eigenvalues nearest zero.

use flexdr::blocksparse::{clustered_spectrum, generate_prescribed_spectrum, PrescribedSpectrum};
use flexdr::krylov::{arnoldi_step, harmonic_ritz, spectral_residual, ArnoldiBasis, KrylovError, Reducer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let eigenvalues = clustered_spectrum(120, &[0.01, 0.02, 0.05], 1.0, 3.0);
    let problem = generate_prescribed_spectrum(&PrescribedSpectrum {
        eigenvalues,
        block_size: 1,
        seed: 4,
    })?;
    let a = &problem.matrix;
    let beta = problem.rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
    let v1: Vec<f64> = problem.rhs.iter().map(|x| x / beta).collect();
    let reducer = Reducer::single(a);
    let mut identity = |v: &[f64], z: &mut [f64]| -> Result<usize, KrylovError> {
        z.copy_from_slice(v);
        Ok(0)
    };
    let mut ws = ArnoldiBasis::new(v1, false);
    for steps in 1..=40 {
        arnoldi_step(&mut ws, a, &mut identity, 2, &reducer)?;
        if steps % 10 == 0 {
            let hr = harmonic_ritz(&ws.hbar())?;
            let shown: Vec<String> = hr
                .pairs
                .values
                .iter()
                .zip(&hr.pairs.vectors)
                .take(4)
                .map(|(t, g)| {
                    let g: Vec<f64> = g.iter().map(|c| c.norm()).collect();
                    format!("{:.5} (res {:.1e})", t.re, spectral_residual(hr.h_sub, &g))
                })
                .collect();
            println!("{steps:>3} steps: {}", shown.join(", "));
        }
    }
    println!("smallest eigenvalues: 0.01, 0.02, 0.05, 1");
    Ok(())
}
