//! Gaussian policy and value networks sharing the 256/128 trunk shape.

use super::mlp::{Mlp, MlpSpec};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub const HIDDEN: [usize; 2] = [256, 128];
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Policy mean network, state-independent log standard deviations, and the
/// value network.
#[derive(Clone, Debug)]
pub struct PolicyValue {
    pub policy: Mlp,
    pub log_std: DVector<f64>,
    pub value: Mlp,
}

impl PolicyValue {
    /// Fresh networks: orthogonal layers (gain sqrt(2) hidden, 0.01 on the
    /// policy output, 1.0 on the value output), log_std at -1.
    pub fn new(obs_dim: usize, act_dim: usize, rng: &mut impl Rng) -> Self {
        let policy_spec = MlpSpec::new(vec![obs_dim, HIDDEN[0], HIDDEN[1], act_dim]);
        let value_spec = MlpSpec::new(vec![obs_dim, HIDDEN[0], HIDDEN[1], 1]);
        Self {
            policy: Mlp::orthogonal(policy_spec, 2f64.sqrt(), 0.01, rng),
            log_std: DVector::from_element(act_dim, -1.0),
            value: Mlp::orthogonal(value_spec, 2f64.sqrt(), 1.0, rng),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.policy.spec.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.policy.spec.output_dim()
    }

    /// Mean actions for a batch of observations (columns).
    pub fn means(&self, obs: &DMatrix<f64>) -> DMatrix<f64> {
        self.policy.forward(obs)
    }

    /// Deterministic action for one observation slice.
    pub fn mean_action(&self, obs: &[f64]) -> Vec<f64> {
        assert_eq!(obs.len(), self.obs_dim());
        let col = DMatrix::from_column_slice(obs.len(), 1, obs);
        self.means(&col).column(0).as_slice().to_vec()
    }

    /// State values for a batch of observations.
    pub fn values(&self, obs: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_row_slice(self.value.forward(obs).row(0).transpose().as_slice())
    }

    /// Draws one action per column of `means`.
    pub fn sample(&self, means: &DMatrix<f64>, rng: &mut impl Rng) -> DMatrix<f64> {
        let mut a = means.clone();
        for mut col in a.column_iter_mut() {
            for (k, v) in col.iter_mut().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                *v += self.log_std[k].exp() * z;
            }
        }
        a
    }

    /// Log densities of `actions` under N(means, diag(exp(log_std)^2)).
    pub fn log_probs(&self, actions: &DMatrix<f64>, means: &DMatrix<f64>) -> DVector<f64> {
        gaussian_log_probs(actions, means, &self.log_std)
    }

    /// Policy entropy per sample: state-independent for a Gaussian with
    /// fixed log_std.
    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| ls + 0.5 + HALF_LN_2PI).sum()
    }
}

/// Diagonal-Gaussian log densities, one per column.
pub fn gaussian_log_probs(
    actions: &DMatrix<f64>,
    means: &DMatrix<f64>,
    log_std: &DVector<f64>,
) -> DVector<f64> {
    assert_eq!(actions.shape(), means.shape());
    assert_eq!(actions.nrows(), log_std.len());
    let n = actions.ncols();
    let mut lp = DVector::zeros(n);
    for j in 0..n {
        let mut s = 0.0;
        for k in 0..actions.nrows() {
            let sigma = log_std[k].exp();
            let z = (actions[(k, j)] - means[(k, j)]) / sigma;
            s += -0.5 * z * z - log_std[k] - HALF_LN_2PI;
        }
        lp[j] = s;
    }
    lp
}
