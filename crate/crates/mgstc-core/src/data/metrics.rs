//! Streaming metric bookkeeping: per-batch MSE/MAE, compensated running
//! mean of MSEs, and the CSV emission format.

use std::io::Write;

use crate::error::Result;

/// Metrics of one processed batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchMetrics {
    pub batch: usize,
    pub mse: f64,
    pub mae: f64,
    pub cum_mse: f64,
    pub drift: bool,
}

/// Append-only trace with a Neumaier-compensated running MSE mean.
#[derive(Debug, Clone, Default)]
pub struct MetricTrace {
    records: Vec<BatchMetrics>,
    sum: f64,
    compensation: f64,
}

impl MetricTrace {
    pub fn new() -> Self {
        MetricTrace::default()
    }

    pub fn push(&mut self, mse: f64, mae: f64, drift: bool) -> BatchMetrics {
        let t = self.sum + mse;
        if self.sum.abs() >= mse.abs() {
            self.compensation += (self.sum - t) + mse;
        } else {
            self.compensation += (mse - t) + self.sum;
        }
        self.sum = t;
        let k = self.records.len() + 1;
        let cum = (self.sum + self.compensation) / k as f64;
        let record = BatchMetrics {
            batch: self.records.len(),
            mse,
            mae,
            cum_mse: cum,
            drift,
        };
        self.records.push(record);
        record
    }

    /// Mark a past batch as the one whose statistics fired a drift verdict.
    pub fn flag_drift(&mut self, batch: usize) {
        if let Some(r) = self.records.get_mut(batch) {
            r.drift = true;
        }
    }

    pub fn records(&self) -> &[BatchMetrics] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn final_cumulative_mse(&self) -> Option<f64> {
        self.records.last().map(|r| r.cum_mse)
    }

    /// `batch,mse,mae,cum_mse,drift` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "batch,mse,mae,cum_mse,drift")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.batch,
                r.mse,
                r.mae,
                r.cum_mse,
                if r.drift { 1 } else { 0 }
            )?;
        }
        Ok(())
    }
}

/// Running means of a trace: entry `k` is the mean of the first `k + 1`
/// values, computed with compensated summation.
pub fn cumulative_mse(trace: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(trace.len());
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for (k, &v) in trace.iter().enumerate() {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
        out.push((sum + compensation) / (k + 1) as f64);
    }
    out
}
