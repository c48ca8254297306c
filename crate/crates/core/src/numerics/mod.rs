//! Dense tensor math, reverse-mode autodiff, and the Adam optimizer.
//!
//! Training and inference run at f32; every operation also instantiates at
//! f64 so gradients can be verified against central finite differences.

mod gradcheck;
pub mod ops;
mod optim;
mod tape;
mod tensor;

pub use gradcheck::grad_check;
pub use optim::{AdamConfig, AdamState};
pub use tape::{GradTape, Gradients, TensorId};
pub use tensor::{Scalar, Tensor};
