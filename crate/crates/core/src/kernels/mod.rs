//! Numerical primitives used by the matchers.

mod eigen;
mod hungarian;
mod sinkhorn;

pub use eigen::{top_eigenpairs, EigenResult};
pub use hungarian::hungarian;
pub use sinkhorn::{sinkhorn, SinkhornOutput, LOOP_MAX_ITERS, LOOP_TOL};
