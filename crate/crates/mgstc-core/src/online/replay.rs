//! FIFO replay stores: the recent buffer (samples with their test
//! losses) and the long-term historical repository.

use std::collections::VecDeque;

use crate::data::Sample;
use crate::error::{Error, Result};

/// A buffered recent sample together with the test loss it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredSample {
    pub sample: Sample,
    pub loss: f64,
}

/// Recent FIFO buffer plus historical FIFO repository. Eviction is
/// strictly oldest-first; a drift flush moves the whole buffer into the
/// repository in arrival order.
#[derive(Debug, Clone)]
pub struct ReplayStores {
    buffer: VecDeque<StoredSample>,
    history: VecDeque<Sample>,
    cap_buffer: usize,
    cap_history: usize,
}

impl ReplayStores {
    pub fn new(cap_buffer: usize, cap_history: usize) -> Result<Self> {
        if cap_buffer == 0 || cap_history == 0 {
            return Err(Error::config("replay capacities must be positive"));
        }
        Ok(ReplayStores {
            buffer: VecDeque::with_capacity(cap_buffer),
            history: VecDeque::with_capacity(cap_history),
            cap_buffer,
            cap_history,
        })
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    pub fn buffer_is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn history_is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn buffer(&self) -> impl Iterator<Item = &StoredSample> {
        self.buffer.iter()
    }

    pub fn history(&self) -> impl Iterator<Item = &Sample> {
        self.history.iter()
    }

    pub fn buffer_get(&self, idx: usize) -> &StoredSample {
        &self.buffer[idx]
    }

    pub fn history_get(&self, idx: usize) -> &Sample {
        &self.history[idx]
    }

    pub fn buffer_losses(&self) -> Vec<f64> {
        self.buffer.iter().map(|s| s.loss).collect()
    }

    /// Push a sample with its test loss, evicting the oldest if full.
    pub fn push_recent(&mut self, sample: Sample, loss: f64) {
        if self.buffer.len() == self.cap_buffer {
            self.buffer.pop_front();
        }
        self.buffer.push_back(StoredSample { sample, loss });
    }

    /// Move all buffered samples into the repository in arrival order
    /// (oldest first), then clear the buffer.
    pub fn flush_to_history(&mut self) {
        while let Some(stored) = self.buffer.pop_front() {
            if self.history.len() == self.cap_history {
                self.history.pop_front();
            }
            self.history.push_back(stored.sample);
        }
    }
}
