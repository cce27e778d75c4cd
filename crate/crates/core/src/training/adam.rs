//! Adam with bias correction and optional global gradient-norm clipping.

use crate::error::{Error, Result};
use crate::math::l2_norm;
use crate::neural::NetworkParameters;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators plus the step counter.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub params: AdamParams,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(dim: usize, params: AdamParams) -> Self {
        Self {
            params,
            step: 0,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
        }
    }

    /// One Adam step in place; advances the step counter.
    pub fn update(&mut self, theta: &mut NetworkParameters, grad: &[f64]) -> Result<()> {
        if grad.len() != self.m.len() || theta.len() != self.m.len() {
            return Err(Error::InvalidDimension {
                what: "optimizer step",
                expected: self.m.len(),
                got: grad.len().min(theta.len()),
            });
        }
        self.step += 1;
        let AdamParams {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.params;
        let bias1 = 1.0 - beta1.powi(self.step as i32);
        let bias2 = 1.0 - beta2.powi(self.step as i32);
        let theta = theta.theta_mut();
        for i in 0..grad.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            theta[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

/// Scale the gradient so its global L2 norm does not exceed `max_norm`.
/// Returns the pre-clipping norm. `max_norm <= 0` disables clipping.
pub fn clip_global_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = l2_norm(grad);
    if max_norm > 0.0 && norm > max_norm {
        let scale = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= scale;
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::NetworkDims;

    fn tiny_params() -> NetworkParameters {
        NetworkParameters::init(NetworkDims { m: 4, p: 2 }, 1)
    }

    #[test]
    fn zero_gradient_leaves_parameters_and_advances_counter() {
        let mut params = tiny_params();
        let before = params.theta().to_vec();
        let mut opt = OptimizerState::new(params.len(), AdamParams::default());
        let grad = vec![0.0; params.len()];
        opt.update(&mut params, &grad).unwrap();
        assert_eq!(params.theta(), &before[..]);
        assert_eq!(opt.step, 1);
    }

    #[test]
    fn first_step_is_signlike() {
        // After bias correction, step 1 moves each coordinate by
        // -lr * g / (|g| + eps'), i.e. approximately -lr * sign(g).
        let mut params = tiny_params();
        let before = params.theta().to_vec();
        let ap = AdamParams::default();
        let mut opt = OptimizerState::new(params.len(), ap);
        let grad: Vec<f64> = (0..params.len())
            .map(|i| if i % 2 == 0 { 3.0 } else { -0.5 })
            .collect();
        opt.update(&mut params, &grad).unwrap();
        for i in 0..params.len() {
            let delta = params.theta()[i] - before[i];
            let expected = -ap.learning_rate * grad[i].signum();
            assert!((delta - expected).abs() < 1e-6, "delta {delta} vs {expected}");
        }
    }

    #[test]
    fn two_steps_match_hand_recursion() {
        let dims = NetworkDims { m: 4, p: 2 };
        let mut params = NetworkParameters::zeros(dims);
        let ap = AdamParams {
            learning_rate: 0.1,
            beta1: 0.9,
            beta2: 0.99,
            epsilon: 1e-8,
        };
        let mut opt = OptimizerState::new(params.len(), ap);
        let g = 2.0;
        let grad = vec![g; params.len()];
        opt.update(&mut params, &grad).unwrap();
        opt.update(&mut params, &grad).unwrap();

        // Hand recursion for one coordinate.
        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, 0.0f64);
        for step in 1..=2u32 {
            m = 0.9 * m + 0.1 * g;
            v = 0.99 * v + 0.01 * g * g;
            let m_hat = m / (1.0 - 0.9f64.powi(step as i32));
            let v_hat = v / (1.0 - 0.99f64.powi(step as i32));
            x -= 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
        }
        for &theta in params.theta() {
            assert!((theta - x).abs() < 1e-12);
        }
    }

    #[test]
    fn clipping_preserves_direction() {
        let mut g = vec![3.0, 4.0];
        let norm = clip_global_norm(&mut g, 1.0);
        assert!((norm - 5.0).abs() < 1e-12);
        assert!((g[0] - 0.6).abs() < 1e-12);
        assert!((g[1] - 0.8).abs() < 1e-12);
        // Below the threshold, untouched.
        let mut h = vec![0.3, 0.4];
        clip_global_norm(&mut h, 1.0);
        assert_eq!(h, vec![0.3, 0.4]);
    }
}
