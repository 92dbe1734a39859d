//! Data plumbing: CSV ingestion, chronological splitting with train-only
//! normalization, sliding windows, synthetic stream generation, and
//! streaming metrics.

mod frame;
mod metrics;
mod split;
mod synth;
mod windows;

pub use frame::{exponential_smooth, load_csv, write_csv, TrafficFrame};
pub use metrics::{cumulative_mse, BatchMetrics, MetricTrace};
pub use split::{split_and_normalize, Normalizer, SplitSpec};
pub use synth::{synth_stream, DriftKind, DriftPlan, DriftSpec};
pub use windows::{window_count, windows, Sample};
