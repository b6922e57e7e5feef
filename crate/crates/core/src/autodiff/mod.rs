//! Dense `f64` tensors with a reverse-mode gradient tape.

pub mod checkpoint;
mod params;
mod tape;
mod tensor;

pub use params::ParamStore;
pub use tape::{Gradients, Tape, Var};
pub use tensor::{is_masked, sigmoid, Tensor, MASKED_THRESHOLD, SENTINEL};
