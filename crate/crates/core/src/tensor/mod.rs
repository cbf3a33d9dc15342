//! Dense tensors and a reverse-mode differentiation tape.

mod dense;
mod gemm;
mod gradcheck;
mod params;
mod tape;

pub use dense::Tensor;
pub use gradcheck::{finite_diff_check, FD_MAX_COORDS};
pub use params::{Gradients, ParamStore};
pub use tape::{Reduce, Tape, Var};
