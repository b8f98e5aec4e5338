//! Neural-network primitives with exact reverse-mode gradients.

pub mod adamw;
pub mod checkpoint;
pub mod fusion;
pub mod gradcheck;
mod kernel;
pub mod layer_norm;
pub mod lstm;
pub mod ops;
pub mod params;
pub mod tape;

pub use adamw::{AdamW, AdamWConfig};
pub use fusion::{gated_fuse, Fused};
pub use layer_norm::{layer_norm, LayerNorm, LayerNormParams};
pub use lstm::{bilstm_forward, BiLstm, LstmCell};
pub use ops::{softmax, softmax_cross_entropy};
pub use params::{Grads, ParamId, ParamStore};
pub use tape::{NodeId, Tape};
