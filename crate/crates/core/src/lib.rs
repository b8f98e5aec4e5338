//! Wi-Fi CSI phase calibration and gated-fusion BiLSTM activity recognition.
//!
//! Pipeline: complex CSI is split into amplitude and phase ([`csi`]), phase is
//! unwrapped over time and linearly sanitized per packet ([`phase`]), and the
//! two streams feed a two-stream gated-fusion BiLSTM ([`model`]) built from
//! the primitives in [`nn`]. [`datagen`] synthesizes labeled recordings at
//! three execution speeds and [`harness`] runs leave-one-velocity-out
//! experiments, timing benchmarks and figure exports.

pub mod csi;
pub mod csib;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod model;
pub mod nn;
pub mod phase;
pub mod rng;

pub use csi::{
    decompose, recompose, AmplitudeMatrix, ComplexCsi, CsiShape, Dataset, LabeledSample,
    PhaseMatrix, PhaseState, Velocity,
};
pub use error::{Error, Result};
pub use phase::{
    build_model_input, fit_linear_trend, sanitize, unwrap_temporal, InputConfig, ModelInput,
    TrendParams,
};
pub use rng::SeededRng;
