//! Multi-head scaled dot-product attention on the tape.

use crate::error::{Error, Result};
use crate::tensor::{Tape, TensorId};

/// Tape handles for one attention layer's projections.
#[derive(Debug, Clone, Copy)]
pub struct BoundAttention {
    pub w_q: TensorId,
    pub w_k: TensorId,
    pub w_v: TensorId,
}

/// Result of one multi-head attention application.
#[derive(Debug)]
pub struct AttentionOutput {
    /// Concatenated head outputs, shape `query_rows x D`.
    pub output: TensorId,
    /// Per-head attention probability matrices (rows sum to 1).
    pub probs: Vec<TensorId>,
    /// Arithmetic spent on scores, softmax, and value mixing — the part
    /// of the cost that scales with sequence length, as opposed to the
    /// Q/K/V projections.
    pub core_flops: u64,
}

/// `softmax((Q W_q)(K W_k)^T / sqrt(d_k)) (V W_v)` per head, heads
/// concatenated back to width `D`. There is no output projection.
pub fn multi_head_attention(
    tape: &mut Tape,
    query: TensorId,
    key: TensorId,
    value: TensorId,
    weights: &BoundAttention,
    heads: usize,
) -> Result<AttentionOutput> {
    let dim = {
        let qs = tape.shape(query);
        if qs.len() != 2 {
            return Err(Error::Dimension {
                op: "multi_head_attention",
                left: qs.to_vec(),
                right: vec![],
            });
        }
        qs[1]
    };
    if heads == 0 || dim % heads != 0 {
        return Err(Error::config(format!(
            "embedding dimension {dim} not divisible by head count {heads}"
        )));
    }
    if tape.shape(key) != tape.shape(value) {
        return Err(Error::Dimension {
            op: "multi_head_attention",
            left: tape.shape(key).to_vec(),
            right: tape.shape(value).to_vec(),
        });
    }
    let head_dim = dim / heads;
    let scale = 1.0 / (head_dim as f64).sqrt();

    let q = tape.matmul(query, weights.w_q)?;
    let k = tape.matmul(key, weights.w_k)?;
    let v = tape.matmul(value, weights.w_v)?;

    let core_start = tape.flops();
    let mut outputs = Vec::with_capacity(heads);
    let mut probs = Vec::with_capacity(heads);
    for h in 0..heads {
        let offset = h * head_dim;
        let qh = tape.slice_cols(q, offset, head_dim)?;
        let kh = tape.slice_cols(k, offset, head_dim)?;
        let vh = tape.slice_cols(v, offset, head_dim)?;
        let kt = tape.transpose(kh)?;
        let scores = tape.matmul(qh, kt)?;
        let scaled = tape.scale(scores, scale);
        let p = tape.softmax_rows(scaled)?;
        probs.push(p);
        outputs.push(tape.matmul(p, vh)?);
    }
    let core_flops = tape.flops() - core_start;
    let output = tape.concat_cols(&outputs)?;
    Ok(AttentionOutput {
        output,
        probs,
        core_flops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::tensor::Tensor;

    fn bound_random(tape: &mut Tape, dim: usize, rng: &mut Rng) -> BoundAttention {
        BoundAttention {
            w_q: tape.leaf(Tensor::glorot(dim, dim, rng).with_requires_grad()),
            w_k: tape.leaf(Tensor::glorot(dim, dim, rng).with_requires_grad()),
            w_v: tape.leaf(Tensor::glorot(dim, dim, rng).with_requires_grad()),
        }
    }

    #[test]
    fn identical_keys_give_uniform_attention() {
        let dim = 8;
        let mut rng = Rng::from_seed(1);
        let mut tape = Tape::new();
        let weights = bound_random(&mut tape, dim, &mut rng);
        // Four identical key/value rows: attention is uniform no matter
        // the query, so the output equals the mean projected value row.
        let row: Vec<f64> = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let kv_data: Vec<f64> = row.iter().cycle().take(4 * dim).cloned().collect();
        let kv = tape.constant(vec![4, dim], kv_data).unwrap();

        let q1_data: Vec<f64> = (0..2 * dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let q2_data: Vec<f64> = (0..2 * dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let q1 = tape.constant(vec![2, dim], q1_data).unwrap();
        let q2 = tape.constant(vec![2, dim], q2_data).unwrap();

        let out1 = multi_head_attention(&mut tape, q1, kv, kv, &weights, 2).unwrap();
        let out2 = multi_head_attention(&mut tape, q2, kv, kv, &weights, 2).unwrap();
        let a = tape.data(out1.output).to_vec();
        let b = tape.data(out2.output).to_vec();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12, "query should not matter");
        }
        // Both rows of each output are the projected row itself.
        let vw = tape.matmul(kv, weights.w_v).unwrap();
        let expect = &tape.data(vw)[..dim];
        for r in 0..2 {
            for j in 0..dim {
                assert!((a[r * dim + j] - expect[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn probability_rows_sum_to_one() {
        let dim = 12;
        let mut rng = Rng::from_seed(2);
        let mut tape = Tape::new();
        let weights = bound_random(&mut tape, dim, &mut rng);
        let x_data: Vec<f64> = (0..5 * dim).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let x = tape.constant(vec![5, dim], x_data).unwrap();
        let out = multi_head_attention(&mut tape, x, x, x, &weights, 3).unwrap();
        for &p in &out.probs {
            let (rows, cols) = (tape.shape(p)[0], tape.shape(p)[1]);
            for r in 0..rows {
                let sum: f64 = tape.data(p)[r * cols..(r + 1) * cols].iter().sum();
                assert!((sum - 1.0).abs() <= 1e-12);
            }
        }
    }

    /// Independent oracle: single-head attention computed with plain
    /// scalar loops, no tape involved.
    #[test]
    fn single_head_matches_scalar_oracle() {
        let dim = 4;
        let rows = 3;
        let mut rng = Rng::from_seed(3);
        let x: Vec<f64> = (0..rows * dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let wq: Vec<f64> = (0..dim * dim).map(|_| rng.uniform(-0.7, 0.7)).collect();
        let wk: Vec<f64> = (0..dim * dim).map(|_| rng.uniform(-0.7, 0.7)).collect();
        let wv: Vec<f64> = (0..dim * dim).map(|_| rng.uniform(-0.7, 0.7)).collect();

        let project = |m: &[f64], w: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; rows * dim];
            for i in 0..rows {
                for j in 0..dim {
                    for p in 0..dim {
                        out[i * dim + j] += m[i * dim + p] * w[p * dim + j];
                    }
                }
            }
            out
        };
        let q = project(&x, &wq);
        let k = project(&x, &wk);
        let v = project(&x, &wv);
        let scale = 1.0 / (dim as f64).sqrt();
        let mut expect = vec![0.0; rows * dim];
        for i in 0..rows {
            let mut scores = vec![0.0; rows];
            for j in 0..rows {
                for p in 0..dim {
                    scores[j] += q[i * dim + p] * k[j * dim + p];
                }
                scores[j] *= scale;
            }
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut weights_row: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let total: f64 = weights_row.iter().sum();
            for w in weights_row.iter_mut() {
                *w /= total;
            }
            for j in 0..rows {
                for p in 0..dim {
                    expect[i * dim + p] += weights_row[j] * v[j * dim + p];
                }
            }
        }

        let mut tape = Tape::new();
        let weights = BoundAttention {
            w_q: tape.constant(vec![dim, dim], wq).unwrap(),
            w_k: tape.constant(vec![dim, dim], wk).unwrap(),
            w_v: tape.constant(vec![dim, dim], wv).unwrap(),
        };
        let ix = tape.constant(vec![rows, dim], x).unwrap();
        let out = multi_head_attention(&mut tape, ix, ix, ix, &weights, 1).unwrap();
        for (got, want) in tape.data(out.output).iter().zip(&expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn rejects_indivisible_heads() {
        let mut tape = Tape::new();
        let mut rng = Rng::from_seed(4);
        let weights = bound_random(&mut tape, 6, &mut rng);
        let x = tape.constant(vec![2, 6], vec![0.1; 12]).unwrap();
        let err = multi_head_attention(&mut tape, x, x, x, &weights, 4).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn core_flops_scale_with_key_rows() {
        let dim = 16;
        let mut rng = Rng::from_seed(5);
        let measure = |n: usize, rng: &mut Rng| -> u64 {
            let mut tape = Tape::new();
            let weights = bound_random(&mut tape, dim, rng);
            let data: Vec<f64> = (0..n * dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let x = tape.constant(vec![n, dim], data).unwrap();
            multi_head_attention(&mut tape, x, x, x, &weights, 2).unwrap().core_flops
        };
        let f1 = measure(8, &mut rng);
        let f2 = measure(16, &mut rng);
        // Self-attention core is quadratic in its own row count.
        assert_eq!(f2, 4 * f1);
    }
}
