//! MGSTC: multi-grained spatial-temporal forecasting for streaming
//! multivariate traffic, with an online learning strategy built around
//! concept-drift detection and experience replay.
//!
//! The crate is organized as:
//!
//! - [`tensor`]: a minimal dense f64 tensor with tape-based reverse-mode
//!   automatic differentiation and an Adam optimizer. Everything else is
//!   built on it.
//! - [`segment`]: padding, chunking, and positional embedding of raw
//!   history windows into per-series token matrices.
//! - [`model`]: the forecasting network itself — coarse-grained temporal
//!   attention over chunks, fine-grained spatial attention routed through
//!   a learnable aggregator, and a flatten+linear decoder.
//! - [`online`]: the streaming update strategy — drift monitor, FIFO
//!   replay stores, fine-tuning and aggressive-update stages, and the
//!   closed-form verifier for the augmentation gap bound.
//! - [`data`]: CSV ingestion, normalization, chronological splitting,
//!   sliding windows, synthetic stream generation, and metrics.

pub mod data;
pub mod error;
pub mod model;
pub mod online;
pub mod rng;
pub mod segment;
pub mod tensor;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::{AdamState, Parameter, Tape, Tensor, TensorId};
