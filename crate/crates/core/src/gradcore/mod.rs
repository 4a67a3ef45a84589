//! Minimal differentiable compute core: dense 2-D tensors, a
//! define-by-run tape with reverse-mode gradients, finite-difference
//! checking and Adam.

mod adam;
mod check;
pub mod ops;
mod params;
mod tape;
mod tensor;

pub use adam::{adam_update, AdamConfig, AdamState};
pub use check::{finite_diff_check, GradCheckOptions};
pub use params::{Param, ParamStore};
pub use tape::{forward_primitive, Primitive, Tape, Var};
pub use tensor::{matmul, Tensor2D, Trans};
