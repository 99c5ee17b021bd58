//! Minimal dense tensor library with reverse-mode automatic differentiation.
//!
//! Every op records a vector-Jacobian closure when any input is tracked;
//! [`Tensor::backward`] replays them in reverse creation order. Execution is
//! single-threaded and deterministic: the same inputs always produce
//! bit-identical values and gradients.

mod element;
mod error;
pub mod gradcheck;
pub mod ops;
mod tensor;

pub use element::Element;
pub use error::{Result, TensorError};
pub use gradcheck::{gradient_check, GradCheckOptions, GradCheckReport};
pub use tensor::Tensor;
