//! Adam with bias correction, one instance per parameter tensor.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 2e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug)]
pub struct Adam {
    cfg: AdamConfig,
    m: DVector<f64>,
    v: DVector<f64>,
    t: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig, dim: usize) -> Self {
        Self { cfg, m: DVector::zeros(dim), v: DVector::zeros(dim), t: 0 }
    }

    /// One update of `theta` by `grad` (the gradient of the loss to
    /// minimize).
    pub fn step(&mut self, theta: &mut DVector<f64>, grad: &DVector<f64>) {
        assert_eq!(theta.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let b1 = self.cfg.beta1;
        let b2 = self.cfg.beta2;
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        for i in 0..theta.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            theta[i] -= self.cfg.lr * m_hat / (v_hat.sqrt() + self.cfg.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn first_step_moves_by_lr_regardless_of_gradient_scale() {
        // With zero state, m_hat = g and v_hat = g^2, so the first update
        // is -lr * g / (|g| + eps): magnitude ~lr, sign of g.
        for g in [1e-6, 0.5, 3.0, 1e4] {
            let cfg = AdamConfig::default();
            let mut adam = Adam::new(cfg, 1);
            let mut theta = DVector::from_element(1, 0.0);
            adam.step(&mut theta, &DVector::from_element(1, g));
            let expect = -cfg.lr * g / (g + cfg.eps);
            assert_abs_diff_eq!(theta[0], expect, epsilon = 1e-15);
        }
    }

    #[test]
    fn two_steps_match_hand_computed_moments() {
        let cfg = AdamConfig { lr: 0.1, beta1: 0.9, beta2: 0.999, eps: 1e-8 };
        let mut adam = Adam::new(cfg, 1);
        let mut theta = DVector::from_element(1, 1.0);

        // Step 1, g = 2.
        adam.step(&mut theta, &DVector::from_element(1, 2.0));
        let m1 = 0.1 * 2.0f64;
        let v1 = 0.001 * 4.0f64;
        let t1 = 1.0 - 0.1 * (m1 / 0.1) / ((v1 / 0.001).sqrt() + 1e-8);
        assert_abs_diff_eq!(theta[0], t1, epsilon = 1e-12);

        // Step 2, g = -1.
        adam.step(&mut theta, &DVector::from_element(1, -1.0));
        let m2 = 0.9 * m1 + 0.1 * (-1.0);
        let v2 = 0.999 * v1 + 0.001 * 1.0;
        let m_hat = m2 / (1.0 - 0.9f64.powi(2));
        let v_hat = v2 / (1.0 - 0.999f64.powi(2));
        let t2 = t1 - 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
        assert_abs_diff_eq!(theta[0], t2, epsilon = 1e-12);
    }

    #[test]
    fn constant_gradient_descends_a_quadratic() {
        let cfg = AdamConfig { lr: 0.05, ..AdamConfig::default() };
        let mut adam = Adam::new(cfg, 1);
        let mut theta = DVector::from_element(1, 3.0);
        for _ in 0..2000 {
            let g = DVector::from_element(1, 2.0 * theta[0]);
            adam.step(&mut theta, &g);
        }
        assert!(theta[0].abs() < 1e-3, "theta {}", theta[0]);
    }
}
