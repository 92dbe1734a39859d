//! Concept-drift monitor: a one-sided z-test of the current batch's loss
//! level against the recent loss window.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

const SIGMA_FLOOR: f64 = 1e-8;
const SINGLE_SAMPLE_SIGMA_WINDOW: usize = 8;

/// Verdict of one monitor check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftVerdict {
    pub z_statistic: f64,
    pub p_value: f64,
    pub drifted: bool,
    pub batch_index: usize,
}

/// One line of the drift-event log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftEvent {
    pub batch_index: usize,
    pub z: f64,
    pub p_value: f64,
    pub drifted: bool,
    pub stage: String,
}

/// The raw test statistic `(mu - mu_bar) / (sigma / sqrt(B))`, treating
/// the batch statistics as exact distribution parameters.
pub fn z_statistic(batch_mean: f64, batch_std: f64, window_mean: f64, window_len: usize) -> f64 {
    (batch_mean - window_mean) / (batch_std.max(SIGMA_FLOOR) / (window_len as f64).sqrt())
}

/// Upper-tail p-value of a standard normal variate.
pub fn upper_tail_p(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return SIGMA_FLOOR;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    var.sqrt().max(SIGMA_FLOOR)
}

/// Sliding window of recent test losses plus the drift threshold.
///
/// The window mirrors the replay buffer's stored losses: both receive
/// every test loss in order and both are cleared on a drift verdict, so
/// the monitor always reads "the losses currently remembered in B".
#[derive(Debug, Clone)]
pub struct DriftMonitor {
    window: VecDeque<f64>,
    capacity: usize,
    threshold: f64,
    recent: VecDeque<f64>,
}

impl DriftMonitor {
    pub fn new(capacity: usize, threshold: f64) -> Result<Self> {
        if !(0.0 < threshold && threshold < 1.0) {
            return Err(Error::config(format!(
                "drift threshold must lie in (0, 1), got {threshold}"
            )));
        }
        if capacity == 0 {
            return Err(Error::config("monitor window capacity must be positive"));
        }
        Ok(DriftMonitor {
            window: VecDeque::with_capacity(capacity),
            capacity,
            threshold,
            recent: VecDeque::with_capacity(SINGLE_SAMPLE_SIGMA_WINDOW),
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn window_losses(&self) -> Vec<f64> {
        self.window.iter().cloned().collect()
    }

    pub fn push_loss(&mut self, loss: f64) {
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back(loss);
        if self.recent.len() == SINGLE_SAMPLE_SIGMA_WINDOW {
            self.recent.pop_front();
        }
        self.recent.push_back(loss);
    }

    /// Clear all monitor state.
    pub fn reset(&mut self) {
        self.window.clear();
        self.recent.clear();
    }

    /// Test the current batch's losses against the loss window.
    ///
    /// The statistic is the two-sample form
    /// `z = (mu - mu_bar) / (sigma * sqrt(1/b + 1/B))`: the raw
    /// `sigma / sqrt(B)` scaling ignores the estimation error of the
    /// batch mean itself and fires far above the nominal rate for small
    /// batches, which would defeat the threshold semantics. With both
    /// terms the false-alarm rate tracks the threshold. Drift fires when
    /// the upper-tail p-value falls below the threshold.
    pub fn check(&self, batch_losses: &[f64], batch_index: usize) -> DriftVerdict {
        if self.window.is_empty() || batch_losses.is_empty() {
            // Warming up: trivially no drift.
            return DriftVerdict {
                z_statistic: 0.0,
                p_value: 1.0,
                drifted: false,
                batch_index,
            };
        }
        let window_mean = mean(&self.window.iter().cloned().collect::<Vec<f64>>());
        let batch_mean = mean(batch_losses);
        let sigma = if batch_losses.len() >= 2 {
            sample_std(batch_losses)
        } else {
            // A single sample has no spread: borrow it from the most
            // recent losses.
            let mut pool: Vec<f64> = self.recent.iter().cloned().collect();
            pool.extend_from_slice(batch_losses);
            let start = pool.len().saturating_sub(SINGLE_SAMPLE_SIGMA_WINDOW);
            sample_std(&pool[start..])
        };
        let b = batch_losses.len() as f64;
        let w = self.window.len() as f64;
        let z = (batch_mean - window_mean) / (sigma * (1.0 / b + 1.0 / w).sqrt());
        let p_value = upper_tail_p(z);
        DriftVerdict {
            z_statistic: z,
            p_value,
            drifted: p_value < self.threshold,
            batch_index,
        }
    }
}
