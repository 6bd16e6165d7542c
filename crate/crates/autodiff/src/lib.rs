//! Minimal reverse-mode automatic differentiation.
//!
//! The engine is deliberately small: dense tensors, a flat tape of operations,
//! and exactly the ops needed for small convolutional encoder/decoder networks
//! (3x3 same-padding convolution, 2x2 max pooling, dense layers, ReLU, sigmoid,
//! scaling, reshape, elementwise add, and a mean-squared-error head).
//!
//! Design points:
//!
//! * Everything is generic over the element type via [`Scalar`]; production
//!   code runs in `f32`, while gradient checking instantiates the same graph
//!   in `f64` for tighter finite-difference agreement.
//! * Trainable state lives in a [`ParamStore`] that outlives any one tape, so
//!   a fresh [`Tape`] can be built per training step without reallocating
//!   parameters.
//! * [`Tape::backward`] accumulates parameter gradients in the store and also
//!   returns per-node gradients, which the finite-difference checker uses to
//!   validate gradients with respect to inputs.
//! * Evaluation order is a strict left-to-right sweep over the tape in both
//!   directions, with no threading, so forward values and gradients are
//!   bit-for-bit reproducible across runs.

mod adam;
mod error;
pub mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use error::{Error, Result};
pub use params::{ParamId, ParamStore, Parameter};
pub use tape::{NodeGrads, NodeId, Tape};
pub use tensor::{Scalar, Tensor};
