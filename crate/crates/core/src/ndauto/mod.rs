//! Dense tensors with tape-based reverse-mode differentiation, covering the
//! operations the generator, discriminator and feature extractor use.

mod conv;
mod gradcheck;
mod pool;
mod tape;
mod tensor;
mod upsample;

pub use conv::{output_size, Padding};
pub use gradcheck::{grad_check, GradCheck, GradCheckReport, LeafReport};
pub use pool::PoolKind;
pub use tape::{sigmoid_open, CustomBackward, Tape, Var};
pub use tensor::Tensor;
