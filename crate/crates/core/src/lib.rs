pub mod blocksparse;
pub mod dense;
pub mod krylov;
pub mod partition;
pub mod precond;
