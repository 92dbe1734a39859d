//! The forecasting network: chunk embedding, coarse-grained temporal
//! attention per series, fine-grained spatial attention across series via
//! a learnable aggregator, and a flatten+linear decoder per series.
//!
//! Temporal encoding runs independently per series on its `M x D` chunk
//! tokens. The spatial stage runs independently at each chunk position,
//! taking the `N x D` slice across series; its weights and the aggregator
//! are shared across positions. All parameters are shared across series.

pub mod attention;
pub mod checkpoint;

pub use attention::{multi_head_attention, AttentionOutput, BoundAttention};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::segment::{positional_matrix, segment, ChunkConfig};
use crate::tensor::{adam_step, Parameter, Tape, Tensor, TensorId};

const LN_EPS: f64 = 1e-8;

/// Feed-forward activation. The network uses GELU unless configured
/// otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Gelu,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, tape: &mut Tape, id: TensorId) -> TensorId {
        match self {
            Activation::Gelu => tape.gelu(id),
            Activation::Relu => tape.relu(id),
            Activation::Tanh => tape.tanh(id),
        }
    }
}

/// Full network geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of traffic series (N).
    pub series: usize,
    /// Chunking geometry (T, C, S, D).
    pub chunking: ChunkConfig,
    /// Prediction horizon in timesteps.
    pub horizon: usize,
    /// Attention heads.
    pub heads: usize,
    /// Rows of the learnable aggregator used as spatial queries.
    pub aggregators: usize,
    /// Feed-forward activation.
    pub activation: Activation,
    /// Spatial refinement on/off (off = temporal pipeline only).
    pub use_fgsa: bool,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.chunking.validate()?;
        if self.series == 0 {
            return Err(Error::config("series count must be positive"));
        }
        if self.horizon == 0 {
            return Err(Error::config("prediction horizon must be positive"));
        }
        if self.aggregators == 0 {
            return Err(Error::config("aggregator count must be positive"));
        }
        if self.heads == 0 || self.chunking.dim % self.heads != 0 {
            return Err(Error::config(format!(
                "embedding dimension {} must be divisible by head count {}",
                self.chunking.dim, self.heads
            )));
        }
        Ok(())
    }

    pub fn num_chunks(&self) -> Result<usize> {
        self.chunking.num_chunks()
    }

    /// Flat length of one input window (N x T, series-major).
    pub fn window_len(&self) -> usize {
        self.series * self.chunking.history
    }

    /// Flat length of one target (N x tau, series-major).
    pub fn target_len(&self) -> usize {
        self.series * self.horizon
    }
}

/// Q/K/V projections of one attention layer.
#[derive(Debug, Clone)]
pub struct AttentionParams {
    pub w_q: Parameter,
    pub w_k: Parameter,
    pub w_v: Parameter,
}

impl AttentionParams {
    fn init(prefix: &str, dim: usize, rng: &mut Rng) -> Self {
        AttentionParams {
            w_q: Parameter::new(format!("{prefix}.w_q"), Tensor::glorot(dim, dim, rng)),
            w_k: Parameter::new(format!("{prefix}.w_k"), Tensor::glorot(dim, dim, rng)),
            w_v: Parameter::new(format!("{prefix}.w_v"), Tensor::glorot(dim, dim, rng)),
        }
    }
}

/// Per-feature affine of a normalization layer.
#[derive(Debug, Clone)]
pub struct NormParams {
    pub gamma: Parameter,
    pub beta: Parameter,
}

impl NormParams {
    fn init(prefix: &str, dim: usize) -> Self {
        NormParams {
            gamma: Parameter::new(format!("{prefix}.gamma"), Tensor::filled(vec![dim], 1.0)),
            beta: Parameter::new(format!("{prefix}.beta"), Tensor::filled(vec![dim], 0.0)),
        }
    }
}

/// Single-layer feed-forward weights.
#[derive(Debug, Clone)]
pub struct FfnParams {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl FfnParams {
    fn init(prefix: &str, dim: usize, rng: &mut Rng) -> Self {
        FfnParams {
            weight: Parameter::new(format!("{prefix}.w"), Tensor::glorot(dim, dim, rng)),
            bias: Parameter::new(format!("{prefix}.b"), Tensor::filled(vec![dim], 0.0)),
        }
    }
}

/// Coarse-grained temporal encoder parameters.
#[derive(Debug, Clone)]
pub struct TemporalParams {
    pub attn: AttentionParams,
    pub norm: NormParams,
    pub ffn: FfnParams,
}

/// Fine-grained spatial refinement parameters.
#[derive(Debug, Clone)]
pub struct SpatialParams {
    pub aggregator: Parameter,
    pub first: AttentionParams,
    pub second: AttentionParams,
    pub norm: NormParams,
    pub ffn: FfnParams,
}

/// All learnable state plus the data-independent positional matrix.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub config: ModelConfig,
    pub seed: u64,
    pub embed: Parameter,
    pub temporal: TemporalParams,
    pub spatial: SpatialParams,
    pub decoder_w: Parameter,
    pub decoder_b: Parameter,
    positional: Tensor,
}

impl ModelState {
    /// Fresh state with seeded initialization: Glorot projections, zero
    /// biases, identity normalization, N(0, 1/D) aggregator.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let dim = config.chunking.dim;
        let chunks = config.num_chunks()?;
        let root = Rng::from_seed(seed);
        let mut rng = root.derive("model-init");
        let embed = Parameter::new(
            "embed.w_c",
            Tensor::glorot(config.chunking.chunk, dim, &mut rng),
        );
        let temporal = TemporalParams {
            attn: AttentionParams::init("cgta.attn", dim, &mut rng),
            norm: NormParams::init("cgta.norm", dim),
            ffn: FfnParams::init("cgta.ffn", dim, &mut rng),
        };
        let spatial = SpatialParams {
            aggregator: Parameter::new(
                "fgsa.aggregator",
                Tensor::gaussian(vec![config.aggregators, dim], 1.0 / dim as f64, &mut rng),
            ),
            first: AttentionParams::init("fgsa.attn1", dim, &mut rng),
            second: AttentionParams::init("fgsa.attn2", dim, &mut rng),
            norm: NormParams::init("fgsa.norm", dim),
            ffn: FfnParams::init("fgsa.ffn", dim, &mut rng),
        };
        let decoder_w = Parameter::new(
            "decoder.w",
            Tensor::glorot(chunks * dim, config.horizon, &mut rng),
        );
        let decoder_b = Parameter::new("decoder.b", Tensor::filled(vec![config.horizon], 0.0));
        let positional = positional_matrix(chunks, dim)?;
        Ok(ModelState {
            config,
            seed,
            embed,
            temporal,
            spatial,
            decoder_w,
            decoder_b,
            positional,
        })
    }

    /// All parameters in canonical order.
    pub fn parameters(&self) -> Vec<&Parameter> {
        vec![
            &self.embed,
            &self.temporal.attn.w_q,
            &self.temporal.attn.w_k,
            &self.temporal.attn.w_v,
            &self.temporal.norm.gamma,
            &self.temporal.norm.beta,
            &self.temporal.ffn.weight,
            &self.temporal.ffn.bias,
            &self.spatial.aggregator,
            &self.spatial.first.w_q,
            &self.spatial.first.w_k,
            &self.spatial.first.w_v,
            &self.spatial.second.w_q,
            &self.spatial.second.w_k,
            &self.spatial.second.w_v,
            &self.spatial.norm.gamma,
            &self.spatial.norm.beta,
            &self.spatial.ffn.weight,
            &self.spatial.ffn.bias,
            &self.decoder_w,
            &self.decoder_b,
        ]
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![
            &mut self.embed,
            &mut self.temporal.attn.w_q,
            &mut self.temporal.attn.w_k,
            &mut self.temporal.attn.w_v,
            &mut self.temporal.norm.gamma,
            &mut self.temporal.norm.beta,
            &mut self.temporal.ffn.weight,
            &mut self.temporal.ffn.bias,
            &mut self.spatial.aggregator,
            &mut self.spatial.first.w_q,
            &mut self.spatial.first.w_k,
            &mut self.spatial.first.w_v,
            &mut self.spatial.second.w_q,
            &mut self.spatial.second.w_k,
            &mut self.spatial.second.w_v,
            &mut self.spatial.norm.gamma,
            &mut self.spatial.norm.beta,
            &mut self.spatial.ffn.weight,
            &mut self.spatial.ffn.bias,
            &mut self.decoder_w,
            &mut self.decoder_b,
        ]
    }

    pub fn num_parameters(&self) -> usize {
        self.parameters().iter().map(|p| p.value.numel()).sum()
    }

    /// Bind every parameter onto a tape. `trainable` controls whether
    /// gradients flow (inference passes bind frozen for speed).
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> BoundModel {
        let mut ids = Vec::new();
        let mut bind_one = |tape: &mut Tape, p: &Parameter| -> TensorId {
            let mut t = p.value.clone();
            t.grad = None;
            t.requires_grad = trainable;
            let id = tape.leaf(t);
            ids.push(id);
            id
        };
        let embed_w = bind_one(tape, &self.embed);
        let cgta_q = bind_one(tape, &self.temporal.attn.w_q);
        let cgta_k = bind_one(tape, &self.temporal.attn.w_k);
        let cgta_v = bind_one(tape, &self.temporal.attn.w_v);
        let cgta_gamma = bind_one(tape, &self.temporal.norm.gamma);
        let cgta_beta = bind_one(tape, &self.temporal.norm.beta);
        let cgta_ffn_w = bind_one(tape, &self.temporal.ffn.weight);
        let cgta_ffn_b = bind_one(tape, &self.temporal.ffn.bias);
        let aggregator = bind_one(tape, &self.spatial.aggregator);
        let fgsa1_q = bind_one(tape, &self.spatial.first.w_q);
        let fgsa1_k = bind_one(tape, &self.spatial.first.w_k);
        let fgsa1_v = bind_one(tape, &self.spatial.first.w_v);
        let fgsa2_q = bind_one(tape, &self.spatial.second.w_q);
        let fgsa2_k = bind_one(tape, &self.spatial.second.w_k);
        let fgsa2_v = bind_one(tape, &self.spatial.second.w_v);
        let fgsa_gamma = bind_one(tape, &self.spatial.norm.gamma);
        let fgsa_beta = bind_one(tape, &self.spatial.norm.beta);
        let fgsa_ffn_w = bind_one(tape, &self.spatial.ffn.weight);
        let fgsa_ffn_b = bind_one(tape, &self.spatial.ffn.bias);
        let decoder_w = bind_one(tape, &self.decoder_w);
        let decoder_b = bind_one(tape, &self.decoder_b);
        let positional = tape.leaf(self.positional.clone());
        BoundModel {
            ids,
            positional,
            embed_w,
            cgta: BoundTemporal {
                attn: BoundAttention { w_q: cgta_q, w_k: cgta_k, w_v: cgta_v },
                gamma: cgta_gamma,
                beta: cgta_beta,
                ffn_w: cgta_ffn_w,
                ffn_b: cgta_ffn_b,
            },
            fgsa: BoundSpatial {
                aggregator,
                first: BoundAttention { w_q: fgsa1_q, w_k: fgsa1_k, w_v: fgsa1_v },
                second: BoundAttention { w_q: fgsa2_q, w_k: fgsa2_k, w_v: fgsa2_v },
                gamma: fgsa_gamma,
                beta: fgsa_beta,
                ffn_w: fgsa_ffn_w,
                ffn_b: fgsa_ffn_b,
            },
            decoder_w,
            decoder_b,
        }
    }

    /// Copy tape gradients back into the parameters' gradient slots.
    pub fn apply_gradients(&mut self, tape: &Tape, bound: &BoundModel) {
        let ids = bound.ids.clone();
        for (param, id) in self.parameters_mut().into_iter().zip(ids) {
            if let Some(g) = tape.grad(id) {
                param.accumulate_grad(g);
            }
        }
    }

    /// Adam step on every parameter that received a gradient.
    pub fn optimizer_step(&mut self, lr: f64) -> Result<()> {
        for param in self.parameters_mut() {
            if param.value.grad.is_some() {
                param.adam.lr = lr;
                adam_step(&mut param.value, &mut param.adam)?;
            }
        }
        Ok(())
    }

    /// Forward one window (`N x T`, series-major flat) to its prediction
    /// node (`N x tau`).
    pub fn forward_sample(
        &self,
        tape: &mut Tape,
        bound: &BoundModel,
        window: &[f64],
    ) -> Result<TensorId> {
        let cfg = &self.config;
        if window.len() != cfg.window_len() {
            return Err(Error::Dimension {
                op: "forward",
                left: vec![cfg.series, cfg.chunking.history],
                right: vec![window.len()],
            });
        }
        let history = cfg.chunking.history;
        let chunks_per_series = cfg.num_chunks()?;

        // Temporal stage, independent per series.
        let mut temporal_out = Vec::with_capacity(cfg.series);
        for n in 0..cfg.series {
            let series = &window[n * history..(n + 1) * history];
            let chunk_matrix = segment(series, &cfg.chunking)?;
            let embedded =
                crate::segment::embed(tape, &chunk_matrix, bound.embed_w, bound.positional)?;
            let encoded = cgta_forward(tape, embedded, &bound.cgta, cfg.activation, cfg.heads)?;
            if !tape.value(encoded).is_finite() {
                return Err(Error::numeric(format!("cgta output, series {n}")));
            }
            temporal_out.push(encoded);
        }

        // Spatial stage, independent per chunk position.
        let refined: Vec<TensorId> = if cfg.use_fgsa {
            let mut per_position = Vec::with_capacity(chunks_per_series);
            for m in 0..chunks_per_series {
                let rows: Vec<TensorId> = temporal_out
                    .iter()
                    .map(|&h| tape.slice_rows(h, m, 1))
                    .collect::<Result<_>>()?;
                let across_series = tape.concat_rows(&rows)?;
                let z = fgsa_forward(tape, across_series, &bound.fgsa, cfg.activation, cfg.heads)?;
                if !tape.value(z).is_finite() {
                    return Err(Error::numeric(format!("fgsa output, chunk position {m}")));
                }
                per_position.push(z);
            }
            // Regroup back to one M x D matrix per series.
            (0..cfg.series)
                .map(|n| {
                    let rows: Vec<TensorId> = per_position
                        .iter()
                        .map(|&z| tape.slice_rows(z, n, 1))
                        .collect::<Result<_>>()?;
                    tape.concat_rows(&rows)
                })
                .collect::<Result<_>>()?
        } else {
            temporal_out
        };

        // Decode each series: flatten M x D and project to the horizon.
        let preds: Vec<TensorId> = refined
            .iter()
            .map(|&z| decode(tape, z, bound.decoder_w, bound.decoder_b))
            .collect::<Result<_>>()?;
        let out = tape.concat_rows(&preds)?;
        if !tape.value(out).is_finite() {
            return Err(Error::numeric("decoder output"));
        }
        Ok(out)
    }

    /// Pure inference for a batch of windows; returns flat `N x tau`
    /// predictions.
    pub fn predict(&self, windows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(windows.len());
        for window in windows {
            let mut tape = Tape::new();
            let bound = self.bind(&mut tape, false);
            let pred = self.forward_sample(&mut tape, &bound, window)?;
            out.push(tape.data(pred).to_vec());
        }
        Ok(out)
    }

    /// Mean MSE over a batch as a differentiable scalar, plus the
    /// per-sample loss nodes.
    pub fn batch_loss(
        &self,
        tape: &mut Tape,
        bound: &BoundModel,
        windows: &[Vec<f64>],
        targets: &[Vec<f64>],
    ) -> Result<(TensorId, Vec<TensorId>)> {
        if windows.is_empty() || windows.len() != targets.len() {
            return Err(Error::usage("batch_loss needs equally many windows and targets"));
        }
        let mut losses = Vec::with_capacity(windows.len());
        for (window, target) in windows.iter().zip(targets) {
            let pred = self.forward_sample(tape, bound, window)?;
            losses.push(tape.mse_loss(pred, target)?);
        }
        let mean = tape.mean_scalars(&losses)?;
        Ok((mean, losses))
    }

    /// One optimizer step on a batch; returns the batch MSE.
    pub fn train_step(&mut self, windows: &[Vec<f64>], targets: &[Vec<f64>], lr: f64) -> Result<f64> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, true);
        let (loss, _) = self.batch_loss(&mut tape, &bound, windows, targets)?;
        let value = tape.data(loss)[0];
        tape.backward(loss)?;
        self.apply_gradients(&tape, &bound);
        self.optimizer_step(lr)?;
        Ok(value)
    }
}

/// Parameter handles bound to one tape.
pub struct BoundModel {
    pub ids: Vec<TensorId>,
    pub positional: TensorId,
    pub embed_w: TensorId,
    pub cgta: BoundTemporal,
    pub fgsa: BoundSpatial,
    pub decoder_w: TensorId,
    pub decoder_b: TensorId,
}

pub struct BoundTemporal {
    pub attn: BoundAttention,
    pub gamma: TensorId,
    pub beta: TensorId,
    pub ffn_w: TensorId,
    pub ffn_b: TensorId,
}

pub struct BoundSpatial {
    pub aggregator: TensorId,
    pub first: BoundAttention,
    pub second: BoundAttention,
    pub gamma: TensorId,
    pub beta: TensorId,
    pub ffn_w: TensorId,
    pub ffn_b: TensorId,
}

/// Temporal encoder block over one series' chunk tokens:
/// self-attention, add & norm, feed-forward with residual.
pub fn cgta_forward(
    tape: &mut Tape,
    embedded: TensorId,
    block: &BoundTemporal,
    activation: Activation,
    heads: usize,
) -> Result<TensorId> {
    let attended = multi_head_attention(tape, embedded, embedded, embedded, &block.attn, heads)?;
    let residual = tape.add(attended.output, embedded)?;
    let normed = tape.layer_norm(residual, block.gamma, block.beta, LN_EPS)?;
    let ff = tape.matmul(normed, block.ffn_w)?;
    let ff = tape.add_row_broadcast(ff, block.ffn_b)?;
    let activated = activation.apply(tape, ff);
    tape.add(activated, normed)
}

/// Spatial refinement block over the `N x D` slice at one chunk position:
/// aggregator-query attention, cross-back attention, add & norm,
/// feed-forward with residual.
pub fn fgsa_forward(
    tape: &mut Tape,
    across_series: TensorId,
    block: &BoundSpatial,
    activation: Activation,
    heads: usize,
) -> Result<TensorId> {
    let pooled = multi_head_attention(
        tape,
        block.aggregator,
        across_series,
        across_series,
        &block.first,
        heads,
    )?;
    let spread = multi_head_attention(
        tape,
        across_series,
        pooled.output,
        pooled.output,
        &block.second,
        heads,
    )?;
    let residual = tape.add(spread.output, across_series)?;
    let normed = tape.layer_norm(residual, block.gamma, block.beta, LN_EPS)?;
    let ff = tape.matmul(normed, block.ffn_w)?;
    let ff = tape.add_row_broadcast(ff, block.ffn_b)?;
    let activated = activation.apply(tape, ff);
    tape.add(activated, normed)
}

/// Flatten `M x D` and project to the horizon: `W . Flatten(Z) + b`.
pub fn decode(tape: &mut Tape, z: TensorId, w: TensorId, b: TensorId) -> Result<TensorId> {
    let flat = tape.flatten_row(z)?;
    let projected = tape.matmul(flat, w)?;
    tape.add_row_broadcast(projected, b)
}

/// Mean over all entries of squared error.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Dimension {
            op: "mse",
            left: vec![pred.len()],
            right: vec![target.len()],
        });
    }
    Ok(pred.iter().zip(target).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / pred.len() as f64)
}

/// Mean over all entries of absolute error.
pub fn mae(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Dimension {
            op: "mae",
            left: vec![pred.len()],
            right: vec![target.len()],
        });
    }
    Ok(pred.iter().zip(target).map(|(p, y)| (p - y).abs()).sum::<f64>() / pred.len() as f64)
}

/// Measured attention-core FLOPs of one spatial refinement pass
/// (aggregator layer + spread layer) and of one full `N x N`
/// self-attention over the same tokens.
pub fn spatial_attention_flops(
    n: usize,
    aggregators: usize,
    dim: usize,
    heads: usize,
    seed: u64,
) -> Result<(u64, u64)> {
    let mut rng = Rng::from_seed(seed);
    let tokens: Vec<f64> = (0..n * dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let agg: Vec<f64> = (0..aggregators * dim).map(|_| rng.uniform(-1.0, 1.0)).collect();

    let bind = |tape: &mut Tape, rng: &mut Rng| -> BoundAttention {
        BoundAttention {
            w_q: tape.leaf(Tensor::glorot(dim, dim, rng)),
            w_k: tape.leaf(Tensor::glorot(dim, dim, rng)),
            w_v: tape.leaf(Tensor::glorot(dim, dim, rng)),
        }
    };

    let mut tape = Tape::new();
    let first = bind(&mut tape, &mut rng);
    let second = bind(&mut tape, &mut rng);
    let h = tape.constant(vec![n, dim], tokens.clone())?;
    let g = tape.constant(vec![aggregators, dim], agg)?;
    let pooled = multi_head_attention(&mut tape, g, h, h, &first, heads)?;
    let spread = multi_head_attention(&mut tape, h, pooled.output, pooled.output, &second, heads)?;
    let fgsa_flops = pooled.core_flops + spread.core_flops;

    let mut full_tape = Tape::new();
    let full_attn = bind(&mut full_tape, &mut rng);
    let h_full = full_tape.constant(vec![n, dim], tokens)?;
    let full = multi_head_attention(&mut full_tape, h_full, h_full, h_full, &full_attn, heads)?;
    Ok((fgsa_flops, full.core_flops))
}
