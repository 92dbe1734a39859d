//! Dense f64 tensors with reverse-mode automatic differentiation.
//!
//! [`Tensor`] is a plain row-major value. Differentiable computation is
//! recorded on a [`Tape`]: every op pushes a node, `backward` walks the
//! nodes in reverse and accumulates gradients into each node's `grad`
//! slot. Trainable values live outside the tape as [`Parameter`]s and are
//! re-bound as leaves on every fresh tape.

mod adam;
pub mod gradcheck;
mod tape;

pub use adam::{adam_step, AdamState};
pub use tape::{Op, Tape, TensorId};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Dense row-major tensor of 64-bit floats with an optional gradient slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    pub grad: Option<Vec<f64>>,
    pub requires_grad: bool,
}

impl Tensor {
    /// Build a tensor from a flat row-major buffer, checking the shape
    /// product and rejecting non-finite entries.
    pub fn from_vec(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.iter().any(|&e| e == 0) {
            return Err(Error::config(format!("zero extent in shape {shape:?}")));
        }
        if numel != data.len() {
            return Err(Error::Dimension {
                op: "from_vec",
                left: shape,
                right: vec![data.len()],
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::numeric("tensor construction"));
        }
        Ok(Tensor {
            shape,
            data,
            grad: None,
            requires_grad: false,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; numel],
            grad: None,
            requires_grad: false,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor::from_vec(vec![1], vec![value]).expect("scalar is well formed")
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Tensor::from_vec(vec![rows, cols], data)
    }

    /// Uniform Xavier/Glorot init for a `fan_in x fan_out` projection.
    pub fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> Self {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.uniform(-bound, bound)).collect();
        Tensor::from_vec(vec![rows, cols], data).expect("glorot init is finite")
    }

    /// Zero-mean Gaussian init with the given per-entry variance.
    pub fn gaussian(shape: Vec<usize>, variance: f64, rng: &mut Rng) -> Self {
        let numel = shape.iter().product();
        let std = variance.sqrt();
        let data = (0..numel).map(|_| rng.normal(0.0, std)).collect();
        Tensor::from_vec(shape, data).expect("gaussian init is finite")
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Self {
        let numel = shape.iter().product();
        Tensor::from_vec(shape, vec![value; numel]).expect("fill is finite")
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.shape[1] + col]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn with_requires_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }
}

/// A named trainable tensor paired with its optimizer moments.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub adam: AdamState,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let adam = AdamState::for_len(value.numel());
        Parameter {
            name: name.into(),
            value: value.with_requires_grad(),
            adam,
        }
    }

    /// Add `grad` into this parameter's gradient slot.
    pub fn accumulate_grad(&mut self, grad: &[f64]) {
        debug_assert_eq!(grad.len(), self.value.numel());
        match &mut self.value.grad {
            Some(g) => {
                for (a, b) in g.iter_mut().zip(grad) {
                    *a += b;
                }
            }
            None => self.value.grad = Some(grad.to_vec()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_shape_product() {
        let err = Tensor::from_vec(vec![2, 3], vec![1.0; 5]).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn from_vec_rejects_nan() {
        let err = Tensor::from_vec(vec![2], vec![1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::Numeric { .. }));
    }

    #[test]
    fn glorot_is_within_bound() {
        let mut rng = Rng::from_seed(0);
        let t = Tensor::glorot(16, 48, &mut rng);
        let bound = (6.0 / 64.0f64).sqrt();
        assert!(t.data().iter().all(|v| v.abs() <= bound));
    }
}
