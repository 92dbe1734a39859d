//! Online learning: drift monitoring, FIFO replay stores, the two-stage
//! update strategy, and the augmentation-gap verifier.

pub mod gap;
pub mod monitor;
pub mod replay;
pub mod spectral;
mod strategy;

pub use gap::{
    augmentation_gap, sample_valid_params, verify_appendix, worked_example, xi_regime_bound,
    GapParams, VerifyReport,
};
pub use monitor::{upper_tail_p, z_statistic, DriftEvent, DriftMonitor, DriftVerdict};
pub use replay::{ReplayStores, StoredSample};
pub use strategy::{
    augment_sample, online_loop, BatchRecord, OnlineConfig, OnlineRunner, Stage, StageLosses,
    UpdateRecord,
};
