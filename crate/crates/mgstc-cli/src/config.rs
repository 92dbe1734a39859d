//! Run configuration: defaults, flat key=value config files, and CLI
//! flag overrides. Flags win over the file; the file wins over defaults.

use std::collections::BTreeSet;
use std::path::Path;

use mgstc_core::data::SplitSpec;
use mgstc_core::error::{Error, Result};
use mgstc_core::model::{Activation, ModelConfig};
use mgstc_core::online::OnlineConfig;
use mgstc_core::segment::ChunkConfig;

/// Every tunable of a run. Defaults follow the published configuration:
/// T=128, tau=60, D=512, C=48, S=32, lr=1e-4, eta_fine=eta_aggr=0.5,
/// cap_b=100, cap_h=256.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub history: usize,
    pub horizon: usize,
    pub dim: usize,
    pub chunk: usize,
    pub stride: usize,
    pub heads: usize,
    pub aggregators: usize,
    pub activation: Activation,
    pub use_fgsa: bool,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub eta_fine: f64,
    pub eta_aggr: f64,
    pub drift_threshold: f64,
    pub cap_b: usize,
    pub cap_h: usize,
    pub aggr_epochs: usize,
    pub xi: f64,
    pub replay_single: bool,
    pub split: SplitSpec,
    pub smooth: Option<f64>,
    pub denorm_metrics: bool,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            history: 128,
            horizon: 60,
            dim: 512,
            chunk: 48,
            stride: 32,
            heads: 8,
            aggregators: 10,
            activation: Activation::Gelu,
            use_fgsa: true,
            lr: 1e-4,
            batch_size: 16,
            epochs: 50,
            patience: 3,
            eta_fine: 0.5,
            eta_aggr: 0.5,
            drift_threshold: 0.05,
            cap_b: 100,
            cap_h: 256,
            aggr_epochs: 5,
            xi: 0.05 * 0.05,
            replay_single: false,
            split: SplitSpec { train: 5, val: 2, test: 55 },
            smooth: None,
            denorm_metrics: false,
            seed: 0,
        }
    }
}

/// A resolved configuration plus the set of keys that were explicitly
/// set (by file or flag) rather than defaulted.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub run: RunConfig,
    pub explicit: BTreeSet<String>,
}

impl ResolvedConfig {
    pub fn defaults() -> Self {
        ResolvedConfig {
            run: RunConfig::default(),
            explicit: BTreeSet::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let run = &mut self.run;
        let bad = |what: &str| Error::config(format!("invalid value '{value}' for {what}"));
        match key {
            "history" => run.history = value.parse().map_err(|_| bad("history"))?,
            "horizon" => run.horizon = value.parse().map_err(|_| bad("horizon"))?,
            "dim" => run.dim = value.parse().map_err(|_| bad("dim"))?,
            "chunk" => run.chunk = value.parse().map_err(|_| bad("chunk"))?,
            "stride" => run.stride = value.parse().map_err(|_| bad("stride"))?,
            "heads" => run.heads = value.parse().map_err(|_| bad("heads"))?,
            "aggregators" => run.aggregators = value.parse().map_err(|_| bad("aggregators"))?,
            "activation" => {
                run.activation = match value {
                    "gelu" => Activation::Gelu,
                    "relu" => Activation::Relu,
                    "tanh" => Activation::Tanh,
                    _ => return Err(bad("activation")),
                }
            }
            "use_fgsa" => run.use_fgsa = value.parse().map_err(|_| bad("use_fgsa"))?,
            "lr" => run.lr = value.parse().map_err(|_| bad("lr"))?,
            "batch_size" => run.batch_size = value.parse().map_err(|_| bad("batch_size"))?,
            "epochs" => run.epochs = value.parse().map_err(|_| bad("epochs"))?,
            "patience" => run.patience = value.parse().map_err(|_| bad("patience"))?,
            "eta_fine" => run.eta_fine = value.parse().map_err(|_| bad("eta_fine"))?,
            "eta_aggr" => run.eta_aggr = value.parse().map_err(|_| bad("eta_aggr"))?,
            "drift_threshold" => {
                run.drift_threshold = value.parse().map_err(|_| bad("drift_threshold"))?
            }
            "cap_b" => run.cap_b = value.parse().map_err(|_| bad("cap_b"))?,
            "cap_h" => run.cap_h = value.parse().map_err(|_| bad("cap_h"))?,
            "aggr_epochs" => run.aggr_epochs = value.parse().map_err(|_| bad("aggr_epochs"))?,
            "xi" => run.xi = value.parse().map_err(|_| bad("xi"))?,
            "replay_single" => run.replay_single = value.parse().map_err(|_| bad("replay_single"))?,
            "split" => run.split = SplitSpec::parse(value)?,
            "smooth" => run.smooth = Some(value.parse().map_err(|_| bad("smooth"))?),
            "denorm_metrics" => {
                run.denorm_metrics = value.parse().map_err(|_| bad("denorm_metrics"))?
            }
            "seed" => run.seed = value.parse().map_err(|_| bad("seed"))?,
            _ => return Err(Error::config(format!("unknown configuration key '{key}'"))),
        }
        self.explicit.insert(key.to_string());
        Ok(())
    }

    /// Apply `key=value` lines; `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: lineno + 1,
                message: format!("expected key=value, got '{line}'"),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let run = &self.run;
        self.model_config(1).validate()?;
        run.split.validate()?;
        self.online_config(false).validate()?;
        if run.epochs == 0 {
            return Err(Error::config("epochs must be positive"));
        }
        if let Some(alpha) = run.smooth {
            if !(0.0 < alpha && alpha <= 1.0) {
                return Err(Error::config(format!("smooth factor must lie in (0,1], got {alpha}")));
            }
        }
        Ok(())
    }

    pub fn model_config(&self, series: usize) -> ModelConfig {
        let run = &self.run;
        ModelConfig {
            series,
            chunking: ChunkConfig {
                history: run.history,
                chunk: run.chunk,
                stride: run.stride,
                dim: run.dim,
            },
            horizon: run.horizon,
            heads: run.heads,
            aggregators: run.aggregators,
            activation: run.activation,
            use_fgsa: run.use_fgsa,
        }
    }

    pub fn online_config(&self, updates_enabled: bool) -> OnlineConfig {
        let run = &self.run;
        OnlineConfig {
            eta_fine: run.eta_fine,
            eta_aggressive: run.eta_aggr,
            drift_threshold: run.drift_threshold,
            cap_buffer: run.cap_b,
            cap_history: run.cap_h,
            aggressive_epochs: run.aggr_epochs,
            perturb_variance: run.xi,
            batch_size: run.batch_size,
            replay_single: run.replay_single,
            lr: run.lr,
            updates_enabled,
            seed: run.seed,
        }
    }

    /// Explicitly-set geometry keys that disagree with a checkpoint's
    /// model configuration.
    pub fn geometry_conflicts(&self, ckpt: &ModelConfig) -> Vec<String> {
        let mut conflicts = Vec::new();
        let run = &self.run;
        let checks: Vec<(&str, bool)> = vec![
            ("history", run.history != ckpt.chunking.history),
            ("horizon", run.horizon != ckpt.horizon),
            ("dim", run.dim != ckpt.chunking.dim),
            ("chunk", run.chunk != ckpt.chunking.chunk),
            ("stride", run.stride != ckpt.chunking.stride),
            ("heads", run.heads != ckpt.heads),
            ("aggregators", run.aggregators != ckpt.aggregators),
            ("activation", run.activation != ckpt.activation),
            ("use_fgsa", run.use_fgsa != ckpt.use_fgsa),
        ];
        for (key, differs) in checks {
            if differs && self.explicit.contains(key) {
                conflicts.push(key.to_string());
            }
        }
        conflicts
    }
}
