//! Adam optimizer state and update step.

use crate::error::{Error, Result};

use super::Tensor;

/// Per-parameter Adam moments plus hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn for_len(len: usize) -> Self {
        AdamState {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn with_lr(mut self, lr: f64) -> Self {
        self.lr = lr;
        self
    }
}

/// One bias-corrected Adam update. Consumes the parameter's gradient
/// (cleared afterwards) and advances the step count by exactly one.
pub fn adam_step(param: &mut Tensor, state: &mut AdamState) -> Result<()> {
    let grad = param
        .grad
        .take()
        .ok_or_else(|| Error::usage("adam_step called without a gradient"))?;
    if grad.len() != param.numel()
        || state.first_moment.len() != param.numel()
        || state.second_moment.len() != param.numel()
    {
        return Err(Error::Dimension {
            op: "adam_step",
            left: param.shape().to_vec(),
            right: vec![grad.len()],
        });
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for ((value, g), (m, v)) in param
        .data_mut()
        .iter_mut()
        .zip(&grad)
        .zip(state.first_moment.iter_mut().zip(state.second_moment.iter_mut()))
    {
        *m = state.beta1 * *m + (1.0 - state.beta1) * g;
        *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *value -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = Tensor::from_vec(vec![3], vec![1.0, -2.0, 0.5]).unwrap();
        p.grad = Some(vec![0.0; 3]);
        let mut state = AdamState::for_len(3).with_lr(0.1);
        adam_step(&mut p, &mut state).unwrap();
        assert_eq!(p.data(), &[1.0, -2.0, 0.5]);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_about_lr() {
        // With g=1 at t=1: m_hat = 1, v_hat = 1, so the step is
        // lr / (1 + eps) which is 0.1 up to 1e-9.
        let mut p = Tensor::scalar(2.0);
        p.grad = Some(vec![1.0]);
        let mut state = AdamState::for_len(1).with_lr(0.1);
        adam_step(&mut p, &mut state).unwrap();
        let expected = 2.0 - 0.1 / (1.0 + 1e-8);
        assert!((p.data()[0] - expected).abs() < 1e-15);
        assert!((p.data()[0] - 1.9).abs() < 1e-8);
    }

    #[test]
    fn identical_params_follow_identical_trajectories() {
        let mut a = Tensor::scalar(0.7);
        let mut b = Tensor::scalar(0.7);
        let mut sa = AdamState::for_len(1).with_lr(0.05);
        let mut sb = AdamState::for_len(1).with_lr(0.05);
        for step in 0..25 {
            let g = (step as f64 * 0.3).sin();
            a.grad = Some(vec![g]);
            b.grad = Some(vec![g]);
            adam_step(&mut a, &mut sa).unwrap();
            adam_step(&mut b, &mut sb).unwrap();
            assert_eq!(a.data()[0].to_bits(), b.data()[0].to_bits());
        }
        assert_eq!(sa.step_count, 25);
    }

    #[test]
    fn missing_gradient_is_a_usage_error() {
        let mut p = Tensor::scalar(1.0);
        let mut state = AdamState::for_len(1);
        let err = adam_step(&mut p, &mut state).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn gradient_cleared_after_step() {
        let mut p = Tensor::scalar(1.0);
        p.grad = Some(vec![0.5]);
        let mut state = AdamState::for_len(1);
        adam_step(&mut p, &mut state).unwrap();
        assert!(p.grad.is_none());
    }
}
