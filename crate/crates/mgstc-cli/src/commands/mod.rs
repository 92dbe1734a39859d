//! Subcommand implementations.

pub mod eval;
pub mod stream;
pub mod synth;
pub mod train;
pub mod verify;

use serde::{Deserialize, Serialize};

/// One line of the prediction log (`--pred-out`): the flat `N x tau`
/// prediction and its ground truth for one stream sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredRecord {
    pub sample: usize,
    pub prediction: Vec<f64>,
    pub target: Vec<f64>,
}
