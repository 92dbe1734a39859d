//! Lazy sliding (window, target) generation over a frame.

use crate::error::{Error, Result};

use super::TrafficFrame;

/// One training or inference example: a flat `N x T` history window and
/// its flat `N x tau` target, both series-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub window: Vec<f64>,
    pub target: Vec<f64>,
}

/// Number of sliding windows of history `t` and horizon `tau` with the
/// given stride.
pub fn window_count(rows: usize, t: usize, tau: usize, stride: usize) -> usize {
    if rows < t + tau {
        return 0;
    }
    (rows - t - tau) / stride + 1
}

/// Chronological sliding-window iterator. Samples are materialized one at
/// a time; nothing is buffered beyond the frame itself.
pub fn windows<'a>(
    frame: &'a TrafficFrame,
    t: usize,
    tau: usize,
    stride: usize,
) -> Result<impl Iterator<Item = Sample> + 'a> {
    if stride == 0 {
        return Err(Error::config("window stride must be positive"));
    }
    if frame.len() < t + tau {
        return Err(Error::config(format!(
            "frame has {} rows, need at least T + tau = {}",
            frame.len(),
            t + tau
        )));
    }
    let count = window_count(frame.len(), t, tau, stride);
    let n = frame.series_count();
    Ok((0..count).map(move |w| {
        let start = w * stride;
        let mut window = Vec::with_capacity(n * t);
        let mut target = Vec::with_capacity(n * tau);
        for s in 0..n {
            for r in start..start + t {
                window.push(frame.value(r, s));
            }
            for r in start + t..start + t + tau {
                target.push(frame.value(r, s));
            }
        }
        Sample { window, target }
    }))
}
