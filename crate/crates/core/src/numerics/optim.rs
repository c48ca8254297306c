//! Adam optimizer with bias correction.

use serde::{Deserialize, Serialize};

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates, one pair per parameter tensor.
pub struct AdamState<E> {
    cfg: AdamConfig,
    m: Vec<Tensor<E>>,
    v: Vec<Tensor<E>>,
    step: u64,
}

impl<E: Scalar> AdamState<E> {
    pub fn new(cfg: AdamConfig, param_shapes: &[Vec<usize>]) -> Self {
        Self {
            cfg,
            m: param_shapes.iter().map(|s| Tensor::zeros(s.clone())).collect(),
            v: param_shapes.iter().map(|s| Tensor::zeros(s.clone())).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> AdamConfig {
        self.cfg
    }

    /// One Adam update. `grads[i]` must match `params[i]` in shape; a missing
    /// gradient leaves that parameter untouched (its moments still decay).
    pub fn step(&mut self, params: &mut [Tensor<E>], grads: &[Option<Tensor<E>>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(Error::ShapeMismatch {
                op: "adam_step",
                detail: format!(
                    "{} params, {} grads, {} moment pairs",
                    params.len(),
                    grads.len(),
                    self.m.len()
                ),
            });
        }
        self.step += 1;
        let b1 = E::from_f64(self.cfg.beta1);
        let b2 = E::from_f64(self.cfg.beta2);
        let one_m_b1 = E::ONE - b1;
        let one_m_b2 = E::ONE - b2;
        let lr = E::from_f64(self.cfg.lr);
        let eps = E::from_f64(self.cfg.eps);
        let bc1 = E::from_f64(1.0 - self.cfg.beta1.powi(self.step as i32));
        let bc2 = E::from_f64(1.0 - self.cfg.beta2.powi(self.step as i32));

        for (i, param) in params.iter_mut().enumerate() {
            let Some(grad) = &grads[i] else { continue };
            if grad.shape() != param.shape() {
                return Err(Error::ShapeMismatch {
                    op: "adam_step",
                    detail: format!(
                        "param {} shape {:?} vs grad {:?}",
                        i,
                        param.shape(),
                        grad.shape()
                    ),
                });
            }
            let g = grad.data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let p = param.data_mut();
            for t in 0..p.len() {
                m[t] = b1 * m[t] + one_m_b1 * g[t];
                v[t] = b2 * v[t] + one_m_b2 * g[t] * g[t];
                let m_hat = m[t] / bc1;
                let v_hat = v[t] / bc2;
                p[t] = p[t] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        for param in params.iter() {
            param.check_finite("adam_step")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let cfg = AdamConfig::default();
        let mut params = vec![Tensor::<f64>::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap()];
        let before = params[0].clone();
        let mut state = AdamState::new(cfg, &[vec![3]]);
        let grads = vec![Some(Tensor::zeros(vec![3]))];
        state.step(&mut params, &grads).unwrap();
        assert!(params[0].bit_eq(&before));
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // Hand-evaluated t=1: m_hat = g, v_hat = g^2, update = lr * g/(|g|+eps)
        // which is lr in magnitude up to eps.
        let cfg = AdamConfig {
            lr: 0.01,
            ..AdamConfig::default()
        };
        let mut params = vec![Tensor::<f64>::new(vec![2], vec![0.0, 0.0]).unwrap()];
        let mut state = AdamState::new(cfg, &[vec![2]]);
        let grads = vec![Some(Tensor::new(vec![2], vec![0.3, -0.7]).unwrap())];
        state.step(&mut params, &grads).unwrap();
        assert!((params[0].data()[0] + 0.01).abs() < 1e-6);
        assert!((params[0].data()[1] - 0.01).abs() < 1e-6);
    }

    #[test]
    fn steps_are_deterministic() {
        let run = || {
            let cfg = AdamConfig::default();
            let mut params = vec![Tensor::<f32>::new(vec![2], vec![0.5, -0.5]).unwrap()];
            let mut state = AdamState::new(cfg, &[vec![2]]);
            for s in 1..=2 {
                let g = Tensor::new(vec![2], vec![0.1 * s as f32, -0.2]).unwrap();
                state.step(&mut params, &[Some(g)]).unwrap();
            }
            params[0].clone()
        };
        assert!(run().bit_eq(&run()));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let cfg = AdamConfig::default();
        let mut params = vec![Tensor::<f64>::zeros(vec![2])];
        let mut state = AdamState::new(cfg, &[vec![2]]);
        let grads = vec![Some(Tensor::zeros(vec![3]))];
        assert!(state.step(&mut params, &grads).is_err());
    }
}
