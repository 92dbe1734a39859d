//! Computation tape: forward ops, reverse-mode backward, FLOP accounting.

use crate::error::{Error, Result};

use super::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorId(usize);

/// Recorded operation for one tape node.
#[derive(Debug, Clone)]
pub enum Op {
    Leaf,
    Matmul { a: usize, b: usize },
    Add { a: usize, b: usize },
    AddRowBroadcast { a: usize, bias: usize },
    Sub { a: usize, b: usize },
    Scale { a: usize, factor: f64 },
    SoftmaxRows { a: usize },
    LayerNormRows { x: usize, gamma: usize, beta: usize, eps: f64 },
    Gelu { a: usize },
    Relu { a: usize },
    Tanh { a: usize },
    Transpose { a: usize },
    SliceCols { a: usize, start: usize, width: usize },
    ConcatCols { parts: Vec<usize> },
    SliceRows { a: usize, start: usize, rows: usize },
    ConcatRows { parts: Vec<usize> },
    Reshape { a: usize },
    SumAll { a: usize },
    MseLoss { pred: usize, target: Vec<f64> },
    WeightedSum { parts: Vec<(usize, f64)> },
}

struct Node {
    tensor: Tensor,
    op: Op,
}

/// A single-use computation graph. Leaves are bound per forward pass;
/// `backward` fills the `grad` slot of every node that requires gradients.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    flops: u64,
}

const GELU_COEFF: f64 = 0.044_715;

fn gelu_scalar(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * x * (1.0 + (c * (x + GELU_COEFF * x.powi(3))).tanh())
}

fn gelu_grad_scalar(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let t = (c * (x + GELU_COEFF * x.powi(3))).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * GELU_COEFF * x * x)
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Forward arithmetic operations executed so far (multiply and add
    /// each count as one).
    pub fn flops(&self) -> u64 {
        self.flops
    }

    pub fn value(&self, id: TensorId) -> &Tensor {
        &self.nodes[id.0].tensor
    }

    pub fn data(&self, id: TensorId) -> &[f64] {
        self.nodes[id.0].tensor.data()
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        self.nodes[id.0].tensor.shape()
    }

    pub fn grad(&self, id: TensorId) -> Option<&[f64]> {
        self.nodes[id.0].tensor.grad.as_deref()
    }

    /// Bind an externally owned tensor as a leaf.
    pub fn leaf(&mut self, tensor: Tensor) -> TensorId {
        self.push(tensor, Op::Leaf)
    }

    /// Bind constant (non-differentiable) data as a leaf.
    pub fn constant(&mut self, shape: Vec<usize>, data: Vec<f64>) -> Result<TensorId> {
        Ok(self.push(Tensor::from_vec(shape, data)?, Op::Leaf))
    }

    fn push(&mut self, tensor: Tensor, op: Op) -> TensorId {
        self.nodes.push(Node { tensor, op });
        TensorId(self.nodes.len() - 1)
    }

    fn push_result(&mut self, shape: Vec<usize>, data: Vec<f64>, requires_grad: bool, op: Op) -> TensorId {
        let tensor = Tensor {
            shape,
            data,
            grad: None,
            requires_grad,
        };
        self.nodes.push(Node { tensor, op });
        TensorId(self.nodes.len() - 1)
    }

    fn requires(&self, id: TensorId) -> bool {
        self.nodes[id.0].tensor.requires_grad
    }

    fn dims2(&self, id: TensorId, op: &'static str) -> Result<(usize, usize)> {
        let shape = self.shape(id);
        if shape.len() != 2 {
            return Err(Error::Dimension {
                op,
                left: shape.to_vec(),
                right: vec![],
            });
        }
        Ok((shape[0], shape[1]))
    }

    // ── Forward ops ──────────────────────────────────────────────────

    /// Matrix product `[m x k] . [k x n] -> [m x n]`.
    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (m, k) = self.dims2(a, "matmul")?;
        let (k2, n) = self.dims2(b, "matmul")?;
        if k != k2 {
            return Err(Error::Dimension {
                op: "matmul",
                left: self.shape(a).to_vec(),
                right: self.shape(b).to_vec(),
            });
        }
        let mut out = vec![0.0; m * n];
        matmul_raw(self.data(a), self.data(b), m, k, n, &mut out);
        self.flops += 2 * (m * k * n) as u64;
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push_result(vec![m, n], out, rg, Op::Matmul { a: a.0, b: b.0 }))
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Dimension {
                op: "add",
                left: self.shape(a).to_vec(),
                right: self.shape(b).to_vec(),
            });
        }
        let data: Vec<f64> = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x + y).collect();
        self.flops += data.len() as u64;
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push_result(self.shape(a).to_vec(), data, rg, Op::Add { a: a.0, b: b.0 }))
    }

    /// `[m x n] + [n]`, adding the bias row to every row.
    pub fn add_row_broadcast(&mut self, a: TensorId, bias: TensorId) -> Result<TensorId> {
        let (m, n) = self.dims2(a, "add_row_broadcast")?;
        if self.shape(bias) != [n] {
            return Err(Error::Dimension {
                op: "add_row_broadcast",
                left: self.shape(a).to_vec(),
                right: self.shape(bias).to_vec(),
            });
        }
        let bias_data = self.data(bias).to_vec();
        let mut data = self.data(a).to_vec();
        for i in 0..m {
            for (v, b) in data[i * n..(i + 1) * n].iter_mut().zip(&bias_data) {
                *v += b;
            }
        }
        self.flops += (m * n) as u64;
        let rg = self.requires(a) || self.requires(bias);
        Ok(self.push_result(vec![m, n], data, rg, Op::AddRowBroadcast { a: a.0, bias: bias.0 }))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Dimension {
                op: "sub",
                left: self.shape(a).to_vec(),
                right: self.shape(b).to_vec(),
            });
        }
        let data: Vec<f64> = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x - y).collect();
        self.flops += data.len() as u64;
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push_result(self.shape(a).to_vec(), data, rg, Op::Sub { a: a.0, b: b.0 }))
    }

    pub fn scale(&mut self, a: TensorId, factor: f64) -> TensorId {
        let data: Vec<f64> = self.data(a).iter().map(|x| x * factor).collect();
        self.flops += data.len() as u64;
        let rg = self.requires(a);
        self.push_result(self.shape(a).to_vec(), data, rg, Op::Scale { a: a.0, factor })
    }

    /// Row-wise softmax with max-subtraction for stability.
    pub fn softmax_rows(&mut self, a: TensorId) -> Result<TensorId> {
        let (m, n) = self.dims2(a, "softmax_rows")?;
        let mut data = self.data(a).to_vec();
        for i in 0..m {
            let row = &mut data[i * n..(i + 1) * n];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        self.flops += 5 * (m * n) as u64;
        let rg = self.requires(a);
        Ok(self.push_result(vec![m, n], data, rg, Op::SoftmaxRows { a: a.0 }))
    }

    /// Layer normalization over the last axis with per-feature affine.
    /// `gamma` and `beta` have shape `[n]`.
    pub fn layer_norm(&mut self, x: TensorId, gamma: TensorId, beta: TensorId, eps: f64) -> Result<TensorId> {
        if eps <= 0.0 {
            return Err(Error::config(format!("layer_norm epsilon must be positive, got {eps}")));
        }
        let (m, n) = self.dims2(x, "layer_norm")?;
        if self.shape(gamma) != [n] || self.shape(beta) != [n] {
            return Err(Error::Dimension {
                op: "layer_norm",
                left: self.shape(x).to_vec(),
                right: self.shape(gamma).to_vec(),
            });
        }
        let gamma_data = self.data(gamma).to_vec();
        let beta_data = self.data(beta).to_vec();
        let mut data = self.data(x).to_vec();
        for i in 0..m {
            let row = &mut data[i * n..(i + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let inv_std = 1.0 / (var + eps).sqrt();
            for (j, v) in row.iter_mut().enumerate() {
                *v = gamma_data[j] * (*v - mean) * inv_std + beta_data[j];
            }
        }
        self.flops += 8 * (m * n) as u64;
        let rg = self.requires(x) || self.requires(gamma) || self.requires(beta);
        Ok(self.push_result(
            vec![m, n],
            data,
            rg,
            Op::LayerNormRows { x: x.0, gamma: gamma.0, beta: beta.0, eps },
        ))
    }

    pub fn gelu(&mut self, a: TensorId) -> TensorId {
        let data: Vec<f64> = self.data(a).iter().map(|&x| gelu_scalar(x)).collect();
        self.flops += 10 * data.len() as u64;
        let rg = self.requires(a);
        self.push_result(self.shape(a).to_vec(), data, rg, Op::Gelu { a: a.0 })
    }

    pub fn relu(&mut self, a: TensorId) -> TensorId {
        let data: Vec<f64> = self.data(a).iter().map(|&x| x.max(0.0)).collect();
        self.flops += data.len() as u64;
        let rg = self.requires(a);
        self.push_result(self.shape(a).to_vec(), data, rg, Op::Relu { a: a.0 })
    }

    pub fn tanh(&mut self, a: TensorId) -> TensorId {
        let data: Vec<f64> = self.data(a).iter().map(|&x| x.tanh()).collect();
        self.flops += 5 * data.len() as u64;
        let rg = self.requires(a);
        self.push_result(self.shape(a).to_vec(), data, rg, Op::Tanh { a: a.0 })
    }

    pub fn transpose(&mut self, a: TensorId) -> Result<TensorId> {
        let (m, n) = self.dims2(a, "transpose")?;
        let src = self.data(a);
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = src[i * n + j];
            }
        }
        let rg = self.requires(a);
        Ok(self.push_result(vec![n, m], data, rg, Op::Transpose { a: a.0 }))
    }

    /// Columns `[start, start+width)` of a 2-D tensor.
    pub fn slice_cols(&mut self, a: TensorId, start: usize, width: usize) -> Result<TensorId> {
        let (m, n) = self.dims2(a, "slice_cols")?;
        if start + width > n {
            return Err(Error::Dimension {
                op: "slice_cols",
                left: vec![m, n],
                right: vec![start, width],
            });
        }
        let src = self.data(a);
        let mut data = Vec::with_capacity(m * width);
        for i in 0..m {
            data.extend_from_slice(&src[i * n + start..i * n + start + width]);
        }
        let rg = self.requires(a);
        Ok(self.push_result(vec![m, width], data, rg, Op::SliceCols { a: a.0, start, width }))
    }

    /// Horizontal concatenation of 2-D tensors with equal row counts.
    pub fn concat_cols(&mut self, parts: &[TensorId]) -> Result<TensorId> {
        if parts.is_empty() {
            return Err(Error::usage("concat_cols of zero tensors"));
        }
        let (m, _) = self.dims2(parts[0], "concat_cols")?;
        let mut widths = Vec::with_capacity(parts.len());
        let mut total = 0;
        for &p in parts {
            let (pm, pn) = self.dims2(p, "concat_cols")?;
            if pm != m {
                return Err(Error::Dimension {
                    op: "concat_cols",
                    left: vec![m],
                    right: vec![pm],
                });
            }
            widths.push(pn);
            total += pn;
        }
        let mut data = Vec::with_capacity(m * total);
        for i in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                let src = self.data(p);
                data.extend_from_slice(&src[i * w..(i + 1) * w]);
            }
        }
        let rg = parts.iter().any(|&p| self.requires(p));
        Ok(self.push_result(
            vec![m, total],
            data,
            rg,
            Op::ConcatCols { parts: parts.iter().map(|p| p.0).collect() },
        ))
    }

    /// Rows `[start, start+rows)` of a 2-D tensor.
    pub fn slice_rows(&mut self, a: TensorId, start: usize, rows: usize) -> Result<TensorId> {
        let (m, n) = self.dims2(a, "slice_rows")?;
        if start + rows > m {
            return Err(Error::Dimension {
                op: "slice_rows",
                left: vec![m, n],
                right: vec![start, rows],
            });
        }
        let data = self.data(a)[start * n..(start + rows) * n].to_vec();
        let rg = self.requires(a);
        Ok(self.push_result(vec![rows, n], data, rg, Op::SliceRows { a: a.0, start, rows }))
    }

    /// Vertical concatenation of 2-D tensors with equal column counts.
    pub fn concat_rows(&mut self, parts: &[TensorId]) -> Result<TensorId> {
        if parts.is_empty() {
            return Err(Error::usage("concat_rows of zero tensors"));
        }
        let (_, n) = self.dims2(parts[0], "concat_rows")?;
        let mut total_rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let (pm, pn) = self.dims2(p, "concat_rows")?;
            if pn != n {
                return Err(Error::Dimension {
                    op: "concat_rows",
                    left: vec![n],
                    right: vec![pn],
                });
            }
            total_rows += pm;
            data.extend_from_slice(self.data(p));
        }
        let rg = parts.iter().any(|&p| self.requires(p));
        Ok(self.push_result(
            vec![total_rows, n],
            data,
            rg,
            Op::ConcatRows { parts: parts.iter().map(|p| p.0).collect() },
        ))
    }

    pub fn reshape(&mut self, a: TensorId, shape: Vec<usize>) -> Result<TensorId> {
        let numel: usize = shape.iter().product();
        if numel != self.data(a).len() {
            return Err(Error::Dimension {
                op: "reshape",
                left: self.shape(a).to_vec(),
                right: shape,
            });
        }
        let data = self.data(a).to_vec();
        let rg = self.requires(a);
        Ok(self.push_result(shape, data, rg, Op::Reshape { a: a.0 }))
    }

    /// Flatten a 2-D tensor into a single row.
    pub fn flatten_row(&mut self, a: TensorId) -> Result<TensorId> {
        let numel = self.data(a).len();
        self.reshape(a, vec![1, numel])
    }

    pub fn sum_all(&mut self, a: TensorId) -> TensorId {
        let s: f64 = self.data(a).iter().sum();
        self.flops += self.data(a).len() as u64;
        let rg = self.requires(a);
        self.push_result(vec![1], vec![s], rg, Op::SumAll { a: a.0 })
    }

    /// Mean squared error between `pred` and constant targets.
    pub fn mse_loss(&mut self, pred: TensorId, target: &[f64]) -> Result<TensorId> {
        if self.data(pred).len() != target.len() {
            return Err(Error::Dimension {
                op: "mse_loss",
                left: self.shape(pred).to_vec(),
                right: vec![target.len()],
            });
        }
        let k = target.len() as f64;
        let s: f64 = self.data(pred).iter().zip(target).map(|(p, y)| (p - y).powi(2)).sum();
        self.flops += 3 * target.len() as u64;
        let rg = self.requires(pred);
        Ok(self.push_result(
            vec![1],
            vec![s / k],
            rg,
            Op::MseLoss { pred: pred.0, target: target.to_vec() },
        ))
    }

    /// Weighted sum of scalar nodes: `sum_i w_i * x_i`.
    pub fn weighted_sum(&mut self, parts: &[(TensorId, f64)]) -> Result<TensorId> {
        if parts.is_empty() {
            return Err(Error::usage("weighted_sum of zero terms"));
        }
        let mut total = 0.0;
        for &(id, w) in parts {
            if !self.value(id).is_scalar() {
                return Err(Error::usage("weighted_sum expects scalar terms"));
            }
            total += w * self.data(id)[0];
        }
        self.flops += 2 * parts.len() as u64;
        let rg = parts.iter().any(|&(id, _)| self.requires(id));
        Ok(self.push_result(
            vec![1],
            vec![total],
            rg,
            Op::WeightedSum { parts: parts.iter().map(|&(id, w)| (id.0, w)).collect() },
        ))
    }

    /// Mean of scalar nodes.
    pub fn mean_scalars(&mut self, parts: &[TensorId]) -> Result<TensorId> {
        let w = 1.0 / parts.len() as f64;
        let weighted: Vec<(TensorId, f64)> = parts.iter().map(|&id| (id, w)).collect();
        self.weighted_sum(&weighted)
    }

    // ── Backward ─────────────────────────────────────────────────────

    /// Reverse-mode sweep from a scalar loss. Gradients accumulate into
    /// each node's `grad` slot; repeated calls without a fresh tape keep
    /// accumulating. The sweep itself works on call-local buffers so a
    /// second call is not contaminated by the first.
    pub fn backward(&mut self, loss: TensorId) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(Error::usage(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        if !self.nodes[loss.0].tensor.requires_grad {
            // Loss does not depend on any trainable leaf; nothing to do.
            return Ok(());
        }
        let mut local: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        local[loss.0] = Some(vec![1.0]);

        // Distribute into a call-local slot, skipping non-differentiable inputs.
        fn spread(nodes: &[Node], local: &mut [Option<Vec<f64>>], idx: usize, src: &[f64]) {
            if !nodes[idx].tensor.requires_grad {
                return;
            }
            match &mut local[idx] {
                Some(g) => {
                    for (a, b) in g.iter_mut().zip(src) {
                        *a += b;
                    }
                }
                slot @ None => *slot = Some(src.to_vec()),
            }
        }

        for i in (0..=loss.0).rev() {
            let grad = match local[i].take() {
                Some(g) => g,
                None => continue,
            };
            // Commit into the node's persistent gradient slot.
            {
                let node = &mut self.nodes[i];
                let numel = node.tensor.numel();
                let slot = node.tensor.grad.get_or_insert_with(|| vec![0.0; numel]);
                for (a, b) in slot.iter_mut().zip(&grad) {
                    *a += b;
                }
            }
            let op = self.nodes[i].op.clone();
            match op {
                Op::Leaf => {}
                Op::Matmul { a, b } => {
                    let (m, k) = (self.nodes[a].tensor.rows(), self.nodes[a].tensor.cols());
                    let n = self.nodes[b].tensor.cols();
                    if self.nodes[a].tensor.requires_grad {
                        // dA = G . B^T
                        let bdata = self.nodes[b].tensor.data();
                        let mut bt = vec![0.0; k * n];
                        for r in 0..k {
                            for c in 0..n {
                                bt[c * k + r] = bdata[r * n + c];
                            }
                        }
                        let mut da = vec![0.0; m * k];
                        matmul_raw(&grad, &bt, m, n, k, &mut da);
                        spread(&self.nodes, &mut local, a, &da);
                    }
                    if self.nodes[b].tensor.requires_grad {
                        // dB = A^T . G
                        let adata = self.nodes[a].tensor.data();
                        let mut at = vec![0.0; m * k];
                        for r in 0..m {
                            for c in 0..k {
                                at[c * m + r] = adata[r * k + c];
                            }
                        }
                        let mut db = vec![0.0; k * n];
                        matmul_raw(&at, &grad, k, m, n, &mut db);
                        spread(&self.nodes, &mut local, b, &db);
                    }
                }
                Op::Add { a, b } => {
                    spread(&self.nodes, &mut local, a, &grad);
                    spread(&self.nodes, &mut local, b, &grad);
                }
                Op::AddRowBroadcast { a, bias } => {
                    spread(&self.nodes, &mut local, a, &grad);
                    if self.nodes[bias].tensor.requires_grad {
                        let n = self.nodes[bias].tensor.numel();
                        let m = grad.len() / n;
                        let mut dbias = vec![0.0; n];
                        for i in 0..m {
                            for j in 0..n {
                                dbias[j] += grad[i * n + j];
                            }
                        }
                        spread(&self.nodes, &mut local, bias, &dbias);
                    }
                }
                Op::Sub { a, b } => {
                    spread(&self.nodes, &mut local, a, &grad);
                    if self.nodes[b].tensor.requires_grad {
                        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
                        spread(&self.nodes, &mut local, b, &neg);
                    }
                }
                Op::Scale { a, factor } => {
                    let da: Vec<f64> = grad.iter().map(|g| g * factor).collect();
                    spread(&self.nodes, &mut local, a, &da);
                }
                Op::SoftmaxRows { a } => {
                    let out = self.nodes[i].tensor.data();
                    let (m, n) = (self.nodes[i].tensor.rows(), self.nodes[i].tensor.cols());
                    let mut da = vec![0.0; m * n];
                    for r in 0..m {
                        let srow = &out[r * n..(r + 1) * n];
                        let grow = &grad[r * n..(r + 1) * n];
                        let dot: f64 = srow.iter().zip(grow).map(|(s, g)| s * g).sum();
                        for j in 0..n {
                            da[r * n + j] = srow[j] * (grow[j] - dot);
                        }
                    }
                    spread(&self.nodes, &mut local, a, &da);
                }
                Op::LayerNormRows { x, gamma, beta, eps } => {
                    let xdata = self.nodes[x].tensor.data();
                    let gdata = self.nodes[gamma].tensor.data();
                    let (m, n) = (self.nodes[x].tensor.rows(), self.nodes[x].tensor.cols());
                    let nf = n as f64;
                    let mut dx = vec![0.0; m * n];
                    let mut dgamma = vec![0.0; n];
                    let mut dbeta = vec![0.0; n];
                    for r in 0..m {
                        let row = &xdata[r * n..(r + 1) * n];
                        let grow = &grad[r * n..(r + 1) * n];
                        let mean = row.iter().sum::<f64>() / nf;
                        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
                        let inv_std = 1.0 / (var + eps).sqrt();
                        let xhat: Vec<f64> = row.iter().map(|v| (v - mean) * inv_std).collect();
                        let dxhat: Vec<f64> = grow.iter().zip(gdata).map(|(g, gm)| g * gm).collect();
                        let sum_dxhat: f64 = dxhat.iter().sum();
                        let sum_dxhat_xhat: f64 = dxhat.iter().zip(&xhat).map(|(a, b)| a * b).sum();
                        for j in 0..n {
                            dgamma[j] += grow[j] * xhat[j];
                            dbeta[j] += grow[j];
                            dx[r * n + j] =
                                inv_std / nf * (nf * dxhat[j] - sum_dxhat - xhat[j] * sum_dxhat_xhat);
                        }
                    }
                    spread(&self.nodes, &mut local, x, &dx);
                    spread(&self.nodes, &mut local, gamma, &dgamma);
                    spread(&self.nodes, &mut local, beta, &dbeta);
                }
                Op::Gelu { a } => {
                    let xdata = self.nodes[a].tensor.data();
                    let da: Vec<f64> = grad
                        .iter()
                        .zip(xdata)
                        .map(|(g, &x)| g * gelu_grad_scalar(x))
                        .collect();
                    spread(&self.nodes, &mut local, a, &da);
                }
                Op::Relu { a } => {
                    let xdata = self.nodes[a].tensor.data();
                    let da: Vec<f64> = grad
                        .iter()
                        .zip(xdata)
                        .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                        .collect();
                    spread(&self.nodes, &mut local, a, &da);
                }
                Op::Tanh { a } => {
                    let out = self.nodes[i].tensor.data();
                    let da: Vec<f64> = grad.iter().zip(out).map(|(g, t)| g * (1.0 - t * t)).collect();
                    spread(&self.nodes, &mut local, a, &da);
                }
                Op::Transpose { a } => {
                    let (n, m) = (self.nodes[i].tensor.rows(), self.nodes[i].tensor.cols());
                    let mut da = vec![0.0; m * n];
                    for r in 0..n {
                        for c in 0..m {
                            da[c * n + r] = grad[r * m + c];
                        }
                    }
                    spread(&self.nodes, &mut local, a, &da);
                }
                Op::SliceCols { a, start, width } => {
                    let (m, n) = (self.nodes[a].tensor.rows(), self.nodes[a].tensor.cols());
                    let mut da = vec![0.0; m * n];
                    for r in 0..m {
                        for j in 0..width {
                            da[r * n + start + j] = grad[r * width + j];
                        }
                    }
                    spread(&self.nodes, &mut local, a, &da);
                }
                Op::ConcatCols { parts } => {
                    let m = self.nodes[i].tensor.rows();
                    let total = self.nodes[i].tensor.cols();
                    let mut offset = 0;
                    for p in parts {
                        let w = self.nodes[p].tensor.cols();
                        if self.nodes[p].tensor.requires_grad {
                            let mut dp = vec![0.0; m * w];
                            for r in 0..m {
                                dp[r * w..(r + 1) * w]
                                    .copy_from_slice(&grad[r * total + offset..r * total + offset + w]);
                            }
                            spread(&self.nodes, &mut local, p, &dp);
                        }
                        offset += w;
                    }
                }
                Op::SliceRows { a, start, rows } => {
                    let (m, n) = (self.nodes[a].tensor.rows(), self.nodes[a].tensor.cols());
                    let mut da = vec![0.0; m * n];
                    da[start * n..(start + rows) * n].copy_from_slice(&grad);
                    spread(&self.nodes, &mut local, a, &da);
                }
                Op::ConcatRows { parts } => {
                    let n = self.nodes[i].tensor.cols();
                    let mut offset = 0;
                    for p in parts {
                        let pm = self.nodes[p].tensor.rows();
                        if self.nodes[p].tensor.requires_grad {
                            let dp = grad[offset * n..(offset + pm) * n].to_vec();
                            spread(&self.nodes, &mut local, p, &dp);
                        }
                        offset += pm;
                    }
                }
                Op::Reshape { a } => {
                    spread(&self.nodes, &mut local, a, &grad);
                }
                Op::SumAll { a } => {
                    let numel = self.nodes[a].tensor.numel();
                    let da = vec![grad[0]; numel];
                    spread(&self.nodes, &mut local, a, &da);
                }
                Op::MseLoss { pred, target } => {
                    let pdata = self.nodes[pred].tensor.data();
                    let k = target.len() as f64;
                    let da: Vec<f64> = pdata
                        .iter()
                        .zip(&target)
                        .map(|(p, y)| grad[0] * 2.0 * (p - y) / k)
                        .collect();
                    spread(&self.nodes, &mut local, pred, &da);
                }
                Op::WeightedSum { parts } => {
                    for (p, w) in parts {
                        spread(&self.nodes, &mut local, p, &[grad[0] * w]);
                    }
                }
            }
        }
        Ok(())
    }
}
