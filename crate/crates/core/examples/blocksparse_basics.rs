//! Building, multiplying and storing block-sparse matrices.

use flexdr::blocksparse::{
    generate_convection_diffusion, read_bsr_binary, read_matrix_market_matrix, write_bsr_binary, write_matrix_market,
    BsrBuilder, ConvectionDiffusion,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A 3x3 block-tridiagonal matrix with 2x2 blocks.
    let mut builder = BsrBuilder::new(3, 2);
    for i in 0..3 {
        builder.add_block(i, i, &[4.0, 1.0, 0.0, 4.0]);
        if i > 0 {
            builder.add_block(i, i - 1, &[-1.0, 0.0, 0.0, -1.0]);
            builder.add_block(i - 1, i, &[-1.0, 0.0, 0.0, -1.0]);
        }
    }
    let a = builder.build()?;
    println!("{} block rows, {} stored blocks, dimension {}", a.n_block_rows(), a.nnz_blocks(), a.dim());
    println!("A * 1 = {:?}", a.spmv(&vec![1.0; a.dim()])?);

    let dir = std::env::temp_dir().join("flexdr-example");
    std::fs::create_dir_all(&dir)?;
    write_bsr_binary(&a, &dir.join("a.bsr"))?;
    write_matrix_market(&a, &dir.join("a.mtx"))?;
    assert_eq!(read_bsr_binary(&dir.join("a.bsr"))?, a);
    assert_eq!(read_matrix_market_matrix(&dir.join("a.mtx"), 2)?.to_dense(), a.to_dense());
    println!("round-tripped through {}", dir.display());

    let cd = generate_convection_diffusion(&ConvectionDiffusion {
        nx: 34,
        ny: 34,
        peclet: 50.0,
        block_size: 3,
        ..Default::default()
    })?;
    println!(
        "convection-diffusion: {} block rows of size {}, {} nonzeros, ‖A‖_F = {:.3}",
        cd.matrix.n_block_rows(),
        cd.matrix.block_size(),
        cd.matrix.nnz(),
        cd.matrix.frobenius_norm()
    );
    Ok(())
}
