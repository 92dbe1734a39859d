//! Chunking front end: pad a raw history window, cut it into overlapping
//! chunks, and embed each chunk with a shared value projection plus a
//! sinusoidal positional matrix.

use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, TensorId};

/// Chunking geometry shared by the segmenter and the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ChunkConfig {
    /// History length in timesteps.
    pub history: usize,
    /// Chunk length in timesteps.
    pub chunk: usize,
    /// Stride between consecutive chunk starts.
    pub stride: usize,
    /// Embedding dimension.
    pub dim: usize,
}

impl ChunkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 || self.stride > self.chunk {
            return Err(Error::config(format!(
                "stride must satisfy 0 < S <= C, got S={} C={}",
                self.stride, self.chunk
            )));
        }
        if self.chunk > self.history {
            return Err(Error::config(format!(
                "chunk length C={} exceeds history T={}",
                self.chunk, self.history
            )));
        }
        if self.dim % 2 != 0 {
            return Err(Error::config(format!(
                "embedding dimension must be even for sinusoidal pairing, got {}",
                self.dim
            )));
        }
        Ok(())
    }

    /// Number of chunks per series: `floor((T - C) / S) + 2`.
    pub fn num_chunks(&self) -> Result<usize> {
        self.validate()?;
        Ok((self.history - self.chunk) / self.stride + 2)
    }
}

/// The per-series chunk matrix: `num_chunks` rows of length `chunk`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkMatrix {
    pub rows: usize,
    pub chunk_len: usize,
    pub data: Vec<f64>,
}

impl ChunkMatrix {
    pub fn row(&self, m: usize) -> &[f64] {
        &self.data[m * self.chunk_len..(m + 1) * self.chunk_len]
    }
}

/// Extend a series by repeating its last value `stride` times.
pub fn pad_series(series: &[f64], stride: usize) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::config("cannot pad an empty series"));
    }
    let mut padded = Vec::with_capacity(series.len() + stride);
    padded.extend_from_slice(series);
    let last = *series.last().expect("non-empty");
    padded.extend(std::iter::repeat(last).take(stride));
    Ok(padded)
}

/// Number of chunks for a (T, C, S) geometry.
pub fn count_chunks(history: usize, chunk: usize, stride: usize) -> Result<usize> {
    ChunkConfig {
        history,
        chunk,
        stride,
        dim: 2,
    }
    .num_chunks()
}

/// Cut a series into its chunk matrix. Row `m` (0-based) is the padded
/// series slice starting at offset `m * S`.
pub fn segment(series: &[f64], cfg: &ChunkConfig) -> Result<ChunkMatrix> {
    if series.len() != cfg.history {
        return Err(Error::config(format!(
            "series length {} does not match configured history {}",
            series.len(),
            cfg.history
        )));
    }
    let m = cfg.num_chunks()?;
    let padded = pad_series(series, cfg.stride)?;
    let mut data = Vec::with_capacity(m * cfg.chunk);
    for row in 0..m {
        let start = row * cfg.stride;
        data.extend_from_slice(&padded[start..start + cfg.chunk]);
    }
    Ok(ChunkMatrix {
        rows: m,
        chunk_len: cfg.chunk,
        data,
    })
}

/// Sinusoidal positional matrix. Depends only on the geometry, never on
/// data: `P[pos, 2i] = sin(pos / 10000^(2i/D))`, `P[pos, 2i+1]` the cosine.
pub fn positional_matrix(num_chunks: usize, dim: usize) -> Result<Tensor> {
    if dim % 2 != 0 {
        return Err(Error::config(format!(
            "positional matrix needs an even dimension, got {dim}"
        )));
    }
    let mut data = vec![0.0; num_chunks * dim];
    for pos in 0..num_chunks {
        for i in 0..dim / 2 {
            let angle = pos as f64 / 10000f64.powf(2.0 * i as f64 / dim as f64);
            data[pos * dim + 2 * i] = angle.sin();
            data[pos * dim + 2 * i + 1] = angle.cos();
        }
    }
    Tensor::from_vec(vec![num_chunks, dim], data)
}

/// Embed a chunk matrix on the tape: `E = C_n . W_C + P`, with gradient
/// flowing to the projection `W_C` only.
pub fn embed(
    tape: &mut Tape,
    chunks: &ChunkMatrix,
    w_c: TensorId,
    positional: TensorId,
) -> Result<TensorId> {
    let chunk_id = tape.constant(vec![chunks.rows, chunks.chunk_len], chunks.data.clone())?;
    let projected = tape.matmul(chunk_id, w_c)?;
    tape.add(projected, positional)
}
