//! Dense `f64` tensors, a reverse-mode tape, MLP blocks, Adam, and the
//! checkpoint container.

pub mod checkpoint;
pub mod mlp;
pub mod optim;
pub mod params;
pub mod segment;
pub mod tape;
pub mod tensor;

pub use checkpoint::Checkpoint;
pub use mlp::{mlp_forward, Activation, MlpSpec};
pub use optim::{adam_step, AdamConfig};
pub use params::{Initializer, Moments, ParamStore};
pub use segment::{segment_reduce, segment_softmax, ReduceMode};
pub use tape::{backward, Gradients, Tape, Var};
pub use tensor::Tensor;
