//! Dense-tensor numeric core with analytic reverse-mode gradients.
//!
//! The vocabulary is exactly what the model needs: matmul, elementwise ops,
//! concat, pooling, dropout, segmented softmax, sparse propagation, and the
//! center-and-scale normalization. Everything is float64. Shape mismatches
//! and non-finite values panic immediately rather than propagating.

mod adam;
mod checkpoint;
mod tape;
mod tensor;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, restore_into, save_checkpoint, CheckpointError};
pub use tape::{NodeId, Tape};
pub use tensor::{Parameter, Tensor};
