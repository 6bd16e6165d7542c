//! Simulated prosthetic vision toolkit: an axon-map percept simulator, a
//! differentiable surrogate of it, and convolutional stimulus encoders
//! trained end-to-end through that surrogate.

pub mod axon;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod digest;
pub mod electrodes;
pub mod error;
pub mod eval;
pub mod grid;
pub mod mnist;
pub mod models;
pub mod percept;
pub mod report;
pub mod rng;
pub mod simulate;
pub mod stim;
pub mod subject;
pub mod train;
pub mod verify;
