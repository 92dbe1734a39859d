//! The streaming update strategy: per-batch fine-tuning with a replayed
//! mini-batch, drift-triggered aggressive retraining on the buffer plus
//! perturbation-augmented history, and the driving loop.
//!
//! Ground truth for a window arrives `tau` steps after its prediction
//! point, so parameter updates for a batch run with a lag of
//! `ceil(tau / batch_size)` batches behind prediction.

use crate::data::{MetricTrace, Sample};
use crate::error::{Error, Result};
use crate::model::{mae, mse, ModelState};
use crate::rng::Rng;

use super::monitor::{DriftMonitor, DriftVerdict};
use super::replay::ReplayStores;

/// Knobs of the online strategy.
#[derive(Debug, Clone, Copy)]
pub struct OnlineConfig {
    /// Replay weight in the fine-tuning loss.
    pub eta_fine: f64,
    /// History weight in the aggressive-update loss.
    pub eta_aggressive: f64,
    /// Drift threshold d.
    pub drift_threshold: f64,
    /// Recent buffer capacity.
    pub cap_buffer: usize,
    /// Historical repository capacity.
    pub cap_history: usize,
    /// Epochs of the aggressive update.
    pub aggressive_epochs: usize,
    /// Per-entry variance of the history perturbation.
    pub perturb_variance: f64,
    /// Stream batch size (also the replay mini-batch size).
    pub batch_size: usize,
    /// Replay a single sample per fine-tuning step instead of a mini-batch.
    pub replay_single: bool,
    /// Optimizer learning rate for online updates.
    pub lr: f64,
    /// Disable all updates (frozen baseline).
    pub updates_enabled: bool,
    /// Seed for replay selection and perturbations.
    pub seed: u64,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        OnlineConfig {
            eta_fine: 0.5,
            eta_aggressive: 0.5,
            drift_threshold: 0.05,
            cap_buffer: 100,
            cap_history: 256,
            aggressive_epochs: 5,
            perturb_variance: 0.05 * 0.05,
            batch_size: 16,
            replay_single: false,
            lr: 1e-4,
            updates_enabled: true,
            seed: 0,
        }
    }
}

impl OnlineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eta_fine < 0.0 || self.eta_aggressive < 0.0 {
            return Err(Error::config("stage coefficients must be non-negative"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        if self.perturb_variance < 0.0 {
            return Err(Error::config("perturbation variance must be non-negative"));
        }
        if !(0.0 < self.drift_threshold && self.drift_threshold < 1.0) {
            return Err(Error::config("drift threshold must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Which update stage ran for a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    FineTune,
    Aggressive,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::FineTune => "fine_tune",
            Stage::Aggressive => "aggressive",
        }
    }
}

/// Loss components of one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageLosses {
    pub current: f64,
    pub replay: f64,
    pub history: f64,
    pub eta_fine: f64,
    pub eta_aggressive: f64,
}

impl StageLosses {
    /// The fine-tuning objective value `L_current + eta * L_replay`.
    pub fn fine_tune_total(&self) -> f64 {
        self.current + self.eta_fine * self.replay
    }
}

/// Everything recorded about the update executed when a batch's labels
/// arrived.
#[derive(Debug, Clone)]
pub struct UpdateRecord {
    /// Index of the batch whose samples were fine-tuned.
    pub updated_batch: usize,
    pub verdict: DriftVerdict,
    pub losses: StageLosses,
    pub stage: Stage,
    /// Final aggressive objective value, when that stage ran.
    pub aggressive_loss: Option<f64>,
}

/// Per-arrival record: prediction metrics immediately, update details
/// once the lagged labels allowed one.
#[derive(Debug, Clone)]
pub struct BatchRecord {
    pub batch_index: usize,
    pub mse: f64,
    pub mae: f64,
    pub update: Option<UpdateRecord>,
}

/// Add zero-mean Gaussian noise with the given per-entry variance to the
/// input window; the target is untouched.
pub fn augment_sample(sample: &Sample, variance: f64, rng: &mut Rng) -> Sample {
    let std = variance.sqrt();
    Sample {
        window: sample.window.iter().map(|v| v + rng.normal(0.0, std)).collect(),
        target: sample.target.clone(),
    }
}

/// Mutable state of one online run.
pub struct OnlineRunner {
    pub model: ModelState,
    pub stores: ReplayStores,
    pub monitor: DriftMonitor,
    pub config: OnlineConfig,
    rng: Rng,
}

impl OnlineRunner {
    pub fn new(model: ModelState, config: OnlineConfig) -> Result<Self> {
        config.validate()?;
        let stores = ReplayStores::new(config.cap_buffer, config.cap_history)?;
        let monitor = DriftMonitor::new(config.cap_buffer, config.drift_threshold)?;
        let rng = Rng::from_seed(config.seed).derive("online");
        Ok(OnlineRunner { model, stores, monitor, config, rng })
    }

    /// One fine-tuning update: current-batch loss plus `eta_fine` times
    /// the loss of a mini-batch replayed from the buffer, one backward
    /// pass, one optimizer step. The current samples then enter the
    /// buffer (and the monitor window) with their test losses.
    pub fn fine_tune_step(&mut self, batch: &[Sample], test_losses: &[f64]) -> Result<StageLosses> {
        if batch.is_empty() || batch.len() != test_losses.len() {
            return Err(Error::usage("fine_tune_step needs samples with matching losses"));
        }
        let mut tape = crate::tensor::Tape::new();
        let bound = self.model.bind(&mut tape, true);

        let windows: Vec<Vec<f64>> = batch.iter().map(|s| s.window.clone()).collect();
        let targets: Vec<Vec<f64>> = batch.iter().map(|s| s.target.clone()).collect();
        let (current_loss, _) = self.model.batch_loss(&mut tape, &bound, &windows, &targets)?;
        let current_value = tape.data(current_loss)[0];

        let mut replay_value = 0.0;
        let mut terms = vec![(current_loss, 1.0)];
        if self.config.eta_fine > 0.0 && !self.stores.buffer_is_empty() {
            let draw = if self.config.replay_single {
                1
            } else {
                self.stores.buffer_len().min(self.config.batch_size)
            };
            let picks = self.rng.sample_without_replacement(self.stores.buffer_len(), draw);
            let replay_windows: Vec<Vec<f64>> =
                picks.iter().map(|&i| self.stores.buffer_get(i).sample.window.clone()).collect();
            let replay_targets: Vec<Vec<f64>> =
                picks.iter().map(|&i| self.stores.buffer_get(i).sample.target.clone()).collect();
            let (replay_loss, _) =
                self.model.batch_loss(&mut tape, &bound, &replay_windows, &replay_targets)?;
            replay_value = tape.data(replay_loss)[0];
            terms.push((replay_loss, self.config.eta_fine));
        }

        let total = tape.weighted_sum(&terms)?;
        tape.backward(total)?;
        self.model.apply_gradients(&tape, &bound);
        self.model.optimizer_step(self.config.lr)?;

        for (sample, &loss) in batch.iter().zip(test_losses) {
            self.stores.push_recent(sample.clone(), loss);
            self.monitor.push_loss(loss);
        }

        Ok(StageLosses {
            current: current_value,
            replay: replay_value,
            history: 0.0,
            eta_fine: self.config.eta_fine,
            eta_aggressive: self.config.eta_aggressive,
        })
    }

    /// Drift response: several epochs over the buffer paired with
    /// perturbation-augmented history draws, then the buffer flushes
    /// into history and the monitor resets. Returns the last objective
    /// value.
    pub fn aggressive_update(&mut self) -> Result<f64> {
        let mut last_total = 0.0;
        for _epoch in 0..self.config.aggressive_epochs {
            if self.stores.buffer_is_empty() {
                break;
            }
            let mut order: Vec<usize> = (0..self.stores.buffer_len()).collect();
            self.rng.shuffle(&mut order);
            for chunk in order.chunks(self.config.batch_size) {
                let windows: Vec<Vec<f64>> =
                    chunk.iter().map(|&i| self.stores.buffer_get(i).sample.window.clone()).collect();
                let targets: Vec<Vec<f64>> =
                    chunk.iter().map(|&i| self.stores.buffer_get(i).sample.target.clone()).collect();

                let mut tape = crate::tensor::Tape::new();
                let bound = self.model.bind(&mut tape, true);
                let (buffer_loss, _) = self.model.batch_loss(&mut tape, &bound, &windows, &targets)?;
                let mut terms = vec![(buffer_loss, 1.0)];

                if self.config.eta_aggressive > 0.0 && !self.stores.history_is_empty() {
                    let mut h_windows = Vec::with_capacity(chunk.len());
                    let mut h_targets = Vec::with_capacity(chunk.len());
                    for _ in 0..chunk.len() {
                        let idx = self.rng.index(self.stores.history_len());
                        let augmented = augment_sample(
                            self.stores.history_get(idx),
                            self.config.perturb_variance,
                            &mut self.rng,
                        );
                        h_windows.push(augmented.window);
                        h_targets.push(augmented.target);
                    }
                    let (history_loss, _) =
                        self.model.batch_loss(&mut tape, &bound, &h_windows, &h_targets)?;
                    terms.push((history_loss, self.config.eta_aggressive));
                }

                let total = tape.weighted_sum(&terms)?;
                last_total = tape.data(total)[0];
                tape.backward(total)?;
                self.model.apply_gradients(&tape, &bound);
                self.model.optimizer_step(self.config.lr)?;
            }
        }
        self.stores.flush_to_history();
        self.monitor.reset();
        Ok(last_total)
    }

    /// Process the lagged batch whose labels just arrived: drift check
    /// against the pre-push window, fine-tune, then aggressive update if
    /// drift fired.
    pub fn process_update(
        &mut self,
        batch: &[Sample],
        test_losses: &[f64],
        batch_index: usize,
    ) -> Result<UpdateRecord> {
        let verdict = self.monitor.check(test_losses, batch_index);
        let mut losses = self.fine_tune_step(batch, test_losses)?;
        let (stage, aggressive_loss) = if verdict.drifted {
            let total = self.aggressive_update()?;
            losses.history = total;
            (Stage::Aggressive, Some(total))
        } else {
            (Stage::FineTune, None)
        };
        Ok(UpdateRecord {
            updated_batch: batch_index,
            verdict,
            losses,
            stage,
            aggressive_loss,
        })
    }
}

/// Replay a recorded stream: predict each arriving batch, record metrics,
/// and (unless frozen) run the lagged update pipeline. `on_prediction`
/// receives every sample index with its prediction. When `metric_space`
/// is given, reported metrics are computed after denormalizing
/// predictions and targets with it; the losses driving the monitor and
/// the buffer stay in model (normalized) space.
pub fn online_loop(
    model: ModelState,
    stream: &[Sample],
    horizon: usize,
    config: OnlineConfig,
    metric_space: Option<&crate::data::Normalizer>,
    mut on_prediction: impl FnMut(usize, &Sample, &[f64]),
) -> Result<(MetricTrace, Vec<BatchRecord>, ModelState)> {
    config.validate()?;
    let mut runner = OnlineRunner::new(model, config)?;
    let lag = horizon.div_ceil(config.batch_size);
    let horizon_len = horizon;
    let mut trace = MetricTrace::new();
    let mut records: Vec<BatchRecord> = Vec::new();
    let mut pending: std::collections::VecDeque<(usize, Vec<Sample>, Vec<f64>)> =
        std::collections::VecDeque::new();

    let batches: Vec<&[Sample]> = stream.chunks(config.batch_size).collect();
    for (k, batch) in batches.iter().enumerate() {
        let windows: Vec<Vec<f64>> = batch.iter().map(|s| s.window.clone()).collect();
        let preds = runner.model.predict(&windows)?;
        let mut batch_losses = Vec::with_capacity(batch.len());
        let mut metric_mses = Vec::with_capacity(batch.len());
        let mut metric_maes = Vec::with_capacity(batch.len());
        for (i, (sample, pred)) in batch.iter().zip(&preds).enumerate() {
            batch_losses.push(mse(pred, &sample.target)?);
            match metric_space {
                Some(norm) => {
                    let mut p = pred.clone();
                    let mut t = sample.target.clone();
                    norm.inverse_flat(&mut p, horizon_len);
                    norm.inverse_flat(&mut t, horizon_len);
                    metric_mses.push(mse(&p, &t)?);
                    metric_maes.push(mae(&p, &t)?);
                }
                None => {
                    metric_mses.push(*batch_losses.last().expect("just pushed"));
                    metric_maes.push(mae(pred, &sample.target)?);
                }
            }
            on_prediction(k * config.batch_size + i, sample, pred);
        }
        let batch_mse = metric_mses.iter().sum::<f64>() / metric_mses.len() as f64;
        let batch_mae = metric_maes.iter().sum::<f64>() / metric_maes.len() as f64;
        trace.push(batch_mse, batch_mae, false);
        let mut record = BatchRecord { batch_index: k, mse: batch_mse, mae: batch_mae, update: None };

        if config.updates_enabled {
            pending.push_back((k, batch.to_vec(), batch_losses));
            if k >= lag {
                let (j, jbatch, jlosses) = pending.pop_front().expect("lagged batch queued");
                let update = runner.process_update(&jbatch, &jlosses, j)?;
                if update.verdict.drifted {
                    trace.flag_drift(j);
                }
                record.update = Some(update);
            }
        }
        records.push(record);
    }
    Ok((trace, records, runner.model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, ModelConfig};
    use crate::segment::ChunkConfig;

    fn tiny_model(series: usize, history: usize, horizon: usize, seed: u64) -> ModelState {
        let config = ModelConfig {
            series,
            chunking: ChunkConfig { history, chunk: 4, stride: 4, dim: 8 },
            horizon,
            heads: 2,
            aggregators: 2,
            activation: Activation::Gelu,
            use_fgsa: true,
        };
        ModelState::init(config, seed).unwrap()
    }

    fn tiny_config() -> OnlineConfig {
        OnlineConfig {
            cap_buffer: 12,
            cap_history: 24,
            batch_size: 4,
            aggressive_epochs: 2,
            lr: 1e-3,
            ..OnlineConfig::default()
        }
    }

    fn make_sample(model: &ModelState, seed: u64) -> Sample {
        let mut rng = Rng::from_seed(seed);
        Sample {
            window: (0..model.config.window_len()).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            target: (0..model.config.target_len()).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        }
    }

    #[test]
    fn empty_buffer_fine_tune_uses_current_loss_only() {
        let model = tiny_model(2, 8, 2, 1);
        let mut runner = OnlineRunner::new(model, tiny_config()).unwrap();
        let s = make_sample(&runner.model, 5);
        let losses = runner.fine_tune_step(&[s], &[0.3]).unwrap();
        assert_eq!(losses.replay, 0.0);
        assert!((losses.fine_tune_total() - losses.current).abs() < 1e-15);
        assert_eq!(runner.stores.buffer_len(), 1);
        assert_eq!(runner.monitor.window_len(), 1);
    }

    #[test]
    fn fine_tune_total_arithmetic() {
        let losses = StageLosses {
            current: 1.0,
            replay: 0.5,
            history: 0.0,
            eta_fine: 0.5,
            eta_aggressive: 0.5,
        };
        assert_eq!(losses.fine_tune_total(), 1.25);
    }

    #[test]
    fn zero_eta_fine_matches_plain_update() {
        // With eta_fine = 0 the replay draw is skipped entirely, so one
        // step equals plain single-batch fine-tuning bit for bit.
        let model = tiny_model(2, 8, 2, 3);
        let mut zero_eta = OnlineRunner::new(
            model.clone(),
            OnlineConfig { eta_fine: 0.0, ..tiny_config() },
        )
        .unwrap();
        // Preload a buffer so a replay draw would be possible.
        for i in 0..6 {
            let s = make_sample(&model, 100 + i);
            zero_eta.stores.push_recent(s, 0.1);
        }
        let batch = vec![make_sample(&model, 50), make_sample(&model, 51)];
        let losses = vec![0.2, 0.3];
        zero_eta.fine_tune_step(&batch, &losses).unwrap();

        let mut plain = model.clone();
        let windows: Vec<Vec<f64>> = batch.iter().map(|s| s.window.clone()).collect();
        let targets: Vec<Vec<f64>> = batch.iter().map(|s| s.target.clone()).collect();
        plain.train_step(&windows, &targets, tiny_config().lr).unwrap();

        for (a, b) in zero_eta.model.parameters().iter().zip(plain.parameters()) {
            let bits = |t: &[f64]| t.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a.value.data()), bits(b.value.data()), "{}", a.name);
        }
    }

    #[test]
    fn augment_zero_variance_is_identity() {
        let sample = Sample { window: vec![1.0, -2.0, 3.0], target: vec![0.5] };
        let mut rng = Rng::from_seed(1);
        let out = augment_sample(&sample, 0.0, &mut rng);
        assert_eq!(out, sample);
    }

    #[test]
    fn augment_noise_moments() {
        let sample = Sample { window: vec![0.0; 10_000], target: vec![] };
        let variance = 0.04;
        let mut rng = Rng::from_seed(2);
        let out = augment_sample(&sample, variance, &mut rng);
        let n = out.window.len() as f64;
        let mean = out.window.iter().sum::<f64>() / n;
        assert!(mean.abs() < 3.0 * (variance / n).sqrt(), "mean {mean}");
        let var = out.window.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!((var - variance).abs() / variance < 0.05, "variance {var}");
    }

    #[test]
    fn aggressive_update_flushes_buffer_and_resets_monitor() {
        let model = tiny_model(2, 8, 2, 7);
        let mut runner = OnlineRunner::new(model.clone(), tiny_config()).unwrap();
        for i in 0..6 {
            let s = make_sample(&model, 200 + i);
            runner.stores.push_recent(s, 0.1 * i as f64);
            runner.monitor.push_loss(0.1 * i as f64);
        }
        let before: Vec<f64> = runner.stores.buffer_losses();
        assert_eq!(before.len(), 6);
        runner.aggressive_update().unwrap();
        assert_eq!(runner.stores.buffer_len(), 0);
        assert_eq!(runner.stores.history_len(), 6);
        assert_eq!(runner.monitor.window_len(), 0);
    }

    #[test]
    fn aggressive_update_with_empty_history_uses_buffer_only() {
        let model = tiny_model(2, 8, 2, 9);
        let mut runner = OnlineRunner::new(
            model.clone(),
            OnlineConfig { aggressive_epochs: 1, ..tiny_config() },
        )
        .unwrap();
        for i in 0..4 {
            runner.stores.push_recent(make_sample(&model, 300 + i), 0.1);
        }
        assert!(runner.stores.history_is_empty());
        let total = runner.aggressive_update().unwrap();
        assert!(total.is_finite());
        assert!(runner.stores.history_len() == 4);
    }

    fn stationary_stream(model: &ModelState, count: usize, seed: u64) -> Vec<Sample> {
        (0..count).map(|i| make_sample(model, seed + i as u64)).collect()
    }

    #[test]
    fn extreme_threshold_means_no_drift_events() {
        let model = tiny_model(2, 8, 2, 11);
        let stream = stationary_stream(&model, 48, 1000);
        let config = OnlineConfig {
            drift_threshold: 1e-9,
            ..tiny_config()
        };
        let (trace, records, _) =
            online_loop(model, &stream, 2, config, None, |_, _, _| {}).unwrap();
        assert!(trace.records().iter().all(|r| !r.drift));
        for record in &records {
            if let Some(update) = &record.update {
                assert!(!update.verdict.drifted);
                assert_eq!(update.stage, Stage::FineTune);
            }
        }
    }

    #[test]
    fn stage_exclusivity_and_lag() {
        let model = tiny_model(2, 8, 2, 13);
        let stream = stationary_stream(&model, 32, 2000);
        let config = tiny_config();
        let lag = 2usize.div_ceil(config.batch_size); // = 1
        let (_, records, _) = online_loop(model, &stream, 2, config, None, |_, _, _| {}).unwrap();
        for (k, record) in records.iter().enumerate() {
            if k < lag {
                assert!(record.update.is_none(), "batch {k} updated before labels arrived");
            } else {
                let update = record.update.as_ref().expect("update after lag");
                assert_eq!(update.updated_batch, k - lag);
                // Aggressive never runs without the fine-tune stage.
                if update.stage == Stage::Aggressive {
                    assert!(update.aggressive_loss.is_some());
                }
            }
        }
    }

    #[test]
    fn frozen_mode_never_updates() {
        let model = tiny_model(2, 8, 2, 17);
        let stream = stationary_stream(&model, 24, 3000);
        let config = OnlineConfig { updates_enabled: false, ..tiny_config() };
        let before: Vec<Vec<f64>> =
            model.parameters().iter().map(|p| p.value.data().to_vec()).collect();
        let (trace, records, after_model) =
            online_loop(model, &stream, 2, config, None, |_, _, _| {}).unwrap();
        assert_eq!(trace.len(), records.len());
        assert!(records.iter().all(|r| r.update.is_none()));
        for (b, p) in before.iter().zip(after_model.parameters()) {
            assert_eq!(b, p.value.data());
        }
    }

    #[test]
    fn monitor_window_mirrors_buffer_losses() {
        let model = tiny_model(2, 8, 2, 19);
        let stream = stationary_stream(&model, 40, 4000);
        let config = tiny_config();
        let mut runner = OnlineRunner::new(model, config).unwrap();
        for (k, batch) in stream.chunks(config.batch_size).enumerate() {
            let losses: Vec<f64> = batch.iter().map(|_| 0.1 * k as f64).collect();
            runner.process_update(batch, &losses, k).unwrap();
            assert_eq!(runner.monitor.window_losses(), runner.stores.buffer_losses());
        }
    }
}
