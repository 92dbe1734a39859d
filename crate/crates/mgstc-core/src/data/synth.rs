//! Synthetic traffic streams with injected distribution shifts.
//!
//! The base signal is a shared daily sinusoid plus a spatially coupled
//! stochastic part: burst events centered on one series and attenuated
//! towards its neighbors, riding on a shared white component, plus
//! per-series noise. Neighboring series therefore share fluctuation
//! detail while keeping individual texture.

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::TrafficFrame;

const DAILY_PERIOD: usize = 144;
const BASE_LEVEL: f64 = 5.0;
const SHARED_WHITE_WEIGHT: f64 = 0.7;
const OWN_NOISE_WEIGHT: f64 = 0.35;
const BURST_MEAN_GAP: f64 = 100.0;
const BURST_NEIGHBOR_DECAY: f64 = 0.8;
const EPOCH_START: i64 = 1_577_836_800; // 2020-01-01T00:00:00Z
const INTERVAL_SECS: i64 = 600;

/// Kind of injected distribution change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftKind {
    /// Additive step in every series' level.
    MeanShift,
    /// Multiplicative step in the deviation around the level.
    ScaleShift,
    /// Decoupling of the shared stochastic component.
    CorrelationShift,
}

impl DriftKind {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "mean_shift" => Ok(DriftKind::MeanShift),
            "scale_shift" => Ok(DriftKind::ScaleShift),
            "correlation_shift" => Ok(DriftKind::CorrelationShift),
            other => Err(Error::config(format!(
                "unknown drift kind '{other}' (expected mean_shift, scale_shift, correlation_shift)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DriftKind::MeanShift => "mean_shift",
            DriftKind::ScaleShift => "scale_shift",
            DriftKind::CorrelationShift => "correlation_shift",
        }
    }
}

/// One drift event, in force from `start` to the end of the stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSpec {
    pub start: usize,
    pub kind: DriftKind,
    pub magnitude: f64,
}

/// Ordered drift events.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DriftPlan {
    pub events: Vec<DriftSpec>,
}

impl DriftPlan {
    pub fn stationary() -> Self {
        DriftPlan { events: Vec::new() }
    }

    pub fn validate(&self, length: usize) -> Result<()> {
        let mut corr_total = 0.0;
        for (i, event) in self.events.iter().enumerate() {
            if event.start == 0 || event.start >= length {
                return Err(Error::config(format!(
                    "drift start {} outside (0, {length})",
                    event.start
                )));
            }
            if event.magnitude <= 0.0 || !event.magnitude.is_finite() {
                return Err(Error::config(format!(
                    "drift magnitude must be positive, got {}",
                    event.magnitude
                )));
            }
            if i > 0 && self.events[i - 1].start >= event.start {
                return Err(Error::config(format!(
                    "drift segments overlap: start {} does not follow {}",
                    event.start,
                    self.events[i - 1].start
                )));
            }
            if event.kind == DriftKind::CorrelationShift {
                corr_total += event.magnitude;
                if corr_total > 1.0 {
                    return Err(Error::config(
                        "cumulative correlation_shift magnitude exceeds 1".to_string(),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn white(len: usize, rng: &mut Rng) -> Vec<f64> {
    (0..len).map(|_| rng.normal(0.0, 1.0)).collect()
}

/// Burst events: exponential inter-arrival gaps, Gaussian bump envelope.
/// Each event has a center series; its amplitude decays geometrically
/// with series distance.
fn shared_bursts(n: usize, len: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; len]; n];
    let mut t = 0.0f64;
    loop {
        let gap = -BURST_MEAN_GAP * rng.uniform(1e-9, 1.0).ln();
        t += gap.max(1.0);
        if t as usize >= len {
            break;
        }
        let center_time = t;
        let center_series = rng.index(n);
        let amp = rng.uniform(0.8, 2.0);
        let width = rng.uniform(3.0, 10.0);
        let lo = (center_time - 4.0 * width).max(0.0) as usize;
        let hi = ((center_time + 4.0 * width) as usize).min(len - 1);
        for (s, series) in out.iter_mut().enumerate() {
            let reach = amp * BURST_NEIGHBOR_DECAY.powi((s as i64 - center_series as i64).unsigned_abs() as i32);
            for (tt, v) in series.iter_mut().enumerate().take(hi + 1).skip(lo) {
                let d = (tt as f64 - center_time) / width;
                *v += reach * (-0.5 * d * d).exp();
            }
        }
    }
    out
}

/// Per-series burst process with the same marginal construction but no
/// cross-series coupling.
fn own_bursts(len: usize, rng: &mut Rng) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let mut t = 0.0f64;
    loop {
        let gap = -BURST_MEAN_GAP * rng.uniform(1e-9, 1.0).ln();
        t += gap.max(1.0);
        if t as usize >= len {
            break;
        }
        let amp = rng.uniform(0.8, 2.0);
        let width = rng.uniform(3.0, 10.0);
        let lo = (t - 4.0 * width).max(0.0) as usize;
        let hi = ((t + 4.0 * width) as usize).min(len - 1);
        for (tt, v) in out.iter_mut().enumerate().take(hi + 1).skip(lo) {
            let d = (tt as f64 - t) / width;
            *v += amp * (-0.5 * d * d).exp();
        }
    }
    out
}

/// Generate a synthetic stream. Same seed, same plan: bit-identical frame.
pub fn synth_stream(
    n_series: usize,
    length: usize,
    plan: &DriftPlan,
    seed: u64,
) -> Result<TrafficFrame> {
    if n_series == 0 || length < 2 {
        return Err(Error::config("need at least one series and two timesteps"));
    }
    plan.validate(length)?;

    let root = Rng::from_seed(seed);
    let mut daily_rng = root.derive("daily");
    let phase = daily_rng.uniform(0.0, std::f64::consts::TAU);
    let amps: Vec<f64> = (0..n_series).map(|_| daily_rng.uniform(0.3, 0.5)).collect();

    let shared_white = white(length, &mut root.derive("shared-white"));
    let shared = shared_bursts(n_series, length, &mut root.derive("shared-bursts"));
    let own: Vec<Vec<f64>> = (0..n_series)
        .map(|s| {
            let mut rng = root.derive(&format!("own-bursts-{s}"));
            let bursts = own_bursts(length, &mut rng);
            let mut wrng = root.derive(&format!("own-white-{s}"));
            let w = white(length, &mut wrng);
            bursts
                .iter()
                .zip(&w)
                .map(|(b, n)| b + SHARED_WHITE_WEIGHT * n)
                .collect::<Vec<f64>>()
        })
        .collect();
    let noise: Vec<Vec<f64>> = (0..n_series)
        .map(|s| white(length, &mut root.derive(&format!("noise-{s}"))))
        .collect();

    let mut values = vec![0.0; length * n_series];
    let mut event_idx = 0;
    let mut mean_add = 0.0;
    let mut scale = 1.0;
    let mut decouple = 0.0f64;
    for t in 0..length {
        while event_idx < plan.events.len() && plan.events[event_idx].start == t {
            let event = plan.events[event_idx];
            match event.kind {
                DriftKind::MeanShift => mean_add += event.magnitude,
                DriftKind::ScaleShift => scale *= 1.0 + event.magnitude,
                DriftKind::CorrelationShift => decouple = (decouple + event.magnitude).min(1.0),
            }
            event_idx += 1;
        }
        let keep = (1.0 - decouple).sqrt();
        let swap = decouple.sqrt();
        let season = (std::f64::consts::TAU * t as f64 / DAILY_PERIOD as f64 + phase).sin();
        for s in 0..n_series {
            let shared_part = SHARED_WHITE_WEIGHT * shared_white[t] + shared[s][t];
            let stochastic = keep * shared_part + swap * own[s][t] + OWN_NOISE_WEIGHT * noise[s][t];
            let deviation = amps[s] * season + stochastic;
            values[t * n_series + s] = BASE_LEVEL + mean_add + scale * deviation;
        }
    }

    let timestamps: Vec<i64> = (0..length as i64)
        .map(|t| EPOCH_START + t * INTERVAL_SECS)
        .collect();
    let ids: Vec<String> = (0..n_series).map(|s| format!("s{s}")).collect();
    TrafficFrame::new(values, timestamps, ids)
}
