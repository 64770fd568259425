//! Dense 2-D tensors and the reverse-mode tape used to train the model.

mod scalar;
mod tape;
mod tensor;

pub use scalar::Scalar;
pub use tape::{Tape, Var};
pub use tensor::Tensor2;
