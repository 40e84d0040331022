//! Dense arrays, differentiable primitives, parameter storage and Adam.

mod adam;
pub mod checkpoint;
pub mod conv;
pub mod ops;
mod params;
mod tensor;

pub use adam::{adam_step, AdamConfig};
pub use params::{glorot_bound, init_parameters, Param, ParameterStore};
pub use tensor::{dot, matmul, matmul_nt, matmul_tn, Tensor};
