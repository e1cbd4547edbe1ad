use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::mlp::{Gradients, Mlp};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Default::default()
        }
    }
}

/// Bias-corrected Adam over a flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, n_params: usize) -> Self {
        Adam {
            config,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn for_net(config: AdamConfig, net: &Mlp) -> Self {
        Self::new(config, net.num_params())
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// One descent step. Non-finite gradients are rejected before anything
    /// is modified; non-finite parameters after the step are an error.
    pub fn step_flat<'a>(
        &mut self,
        params: impl Iterator<Item = &'a mut f64>,
        grads: &[f64],
    ) -> Result<()> {
        if grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch {
                expected: self.m.len(),
                actual: grads.len(),
            });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.t.min(i32::MAX as u64) as i32);
        let c2 = 1.0 - beta2.powi(self.t.min(i32::MAX as u64) as i32);
        let mut finite = true;
        let mut count = 0;
        for (i, p) in params.enumerate() {
            let g = grads[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
            finite &= p.is_finite();
            count += 1;
        }
        if count != grads.len() {
            return Err(Error::ShapeMismatch {
                expected: grads.len(),
                actual: count,
            });
        }
        if !finite {
            return Err(Error::NonFinite("parameters after optimizer step"));
        }
        Ok(())
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        let flat = grads.flat();
        self.step_flat(net.params_mut(), &flat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut adam = Adam::new(AdamConfig::default(), 3);
        let mut p = vec![1.0, -2.0, 0.5];
        adam.step_flat(p.iter_mut(), &[0.3, 0.3, 0.3]).unwrap();
        let after_first = p.clone();
        let m_before = adam.first_moment().to_vec();
        adam.step_flat(p.iter_mut(), &[0.0; 3]).unwrap();
        // the update uses the decayed moment, so parameters still move; a
        // fresh optimizer with zero gradients must not move at all
        for (m, m0) in adam.first_moment().iter().zip(&m_before) {
            assert_abs_diff_eq!(*m, 0.9 * m0, epsilon = 1e-15);
        }
        assert!(p.iter().zip(&after_first).all(|(a, b)| a <= b));

        let mut fresh = Adam::new(AdamConfig::default(), 3);
        let mut q = vec![1.0, -2.0, 0.5];
        fresh.step_flat(q.iter_mut(), &[0.0; 3]).unwrap();
        assert_eq!(q, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // bias correction makes the first update lr * g / (|g| + eps')
        let cfg = AdamConfig::with_lr(1e-3);
        let mut adam = Adam::new(cfg, 3);
        let mut p = vec![0.0; 3];
        adam.step_flat(p.iter_mut(), &[2.0, -0.5, 1e-2]).unwrap();
        assert_abs_diff_eq!(p[0], -1e-3, epsilon = 1e-10);
        assert_abs_diff_eq!(p[1], 1e-3, epsilon = 1e-10);
        assert_abs_diff_eq!(p[2], -1e-3 * 1e-2 / (1e-2 + 1e-8), epsilon = 1e-12);
    }

    #[test]
    fn constant_gradient_descends() {
        let mut adam = Adam::new(AdamConfig::with_lr(1e-2), 1);
        let mut p = vec![0.0];
        for _ in 0..200 {
            adam.step_flat(p.iter_mut(), &[1.5]).unwrap();
        }
        assert!(p[0] < -1.0);
        assert_eq!(adam.steps(), 200);
    }

    #[test]
    fn rejects_nan_gradient_without_mutating() {
        let mut adam = Adam::new(AdamConfig::default(), 2);
        let mut p = vec![1.0, 2.0];
        let err = adam.step_flat(p.iter_mut(), &[f64::NAN, 0.0]);
        assert!(matches!(err, Err(Error::NonFinite(_))));
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(adam.steps(), 0);
    }
}
