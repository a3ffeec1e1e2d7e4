//! Clipped-surrogate PPO over rollout buffers.

use super::adam::{Adam, AdamConfig};
use super::policy::PolicyValue;
use super::rollout::RolloutBuffer;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lam: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub normalize_advantages: bool,
    pub normalize_obs: bool,
    pub adam: AdamConfig,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            lam: 0.95,
            clip: 0.2,
            epochs: 10,
            minibatch: 4096,
            value_coef: 0.5,
            entropy_coef: 0.0,
            normalize_advantages: true,
            normalize_obs: false,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("non-finite {0} during the PPO update; parameters left as they were")]
    NonFinite(&'static str),
}

/// Post-update diagnostics, averaged over minibatches.
#[derive(Clone, Copy, Debug, Default)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub minibatches: usize,
}

pub struct PpoOptimizer {
    policy: Adam,
    log_std: Adam,
    value: Adam,
}

impl PpoOptimizer {
    pub fn new(pv: &PolicyValue, adam: AdamConfig) -> Self {
        Self {
            policy: Adam::new(adam, pv.policy.theta.len()),
            log_std: Adam::new(adam, pv.log_std.len()),
            value: Adam::new(adam, pv.value.theta.len()),
        }
    }
}

pub struct MinibatchGrads {
    pub policy: DVector<f64>,
    pub log_std: DVector<f64>,
    pub value: DVector<f64>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Loss gradients for one minibatch (columns of `obs`/`actions`). The
/// loss is the clipped surrogate plus `value_coef` times the value MSE
/// minus `entropy_coef` times the entropy.
pub fn ppo_minibatch_gradients(
    pv: &PolicyValue,
    obs: &DMatrix<f64>,
    actions: &DMatrix<f64>,
    old_log_probs: &DVector<f64>,
    advantages: &DVector<f64>,
    returns: &DVector<f64>,
    cfg: &PpoConfig,
) -> Result<MinibatchGrads, LearnError> {
    let m = obs.ncols() as f64;
    let act_dim = pv.act_dim();

    let policy_cache = pv.policy.forward_cached(obs);
    let means = policy_cache.output();
    let new_lp = pv.log_probs(actions, means);

    let mut dl_dmean = DMatrix::zeros(act_dim, obs.ncols());
    let mut dl_dlogstd = DVector::zeros(act_dim);
    let mut policy_loss = 0.0;
    let mut approx_kl = 0.0;
    let mut clipped = 0usize;

    for j in 0..obs.ncols() {
        let a = advantages[j];
        let ratio = (new_lp[j] - old_log_probs[j]).exp();
        let unclipped = ratio * a;
        let clip_term = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * a;
        policy_loss -= unclipped.min(clip_term) / m;
        approx_kl += (old_log_probs[j] - new_lp[j]) / m;
        if (ratio - 1.0).abs() > cfg.clip {
            clipped += 1;
        }

        // The min gates the gradient: it flows only when the unclipped
        // branch is active (ties included, where the branches agree).
        if unclipped <= clip_term {
            let glp = -(a * ratio) / m;
            for k in 0..act_dim {
                let sigma = pv.log_std[k].exp();
                let z = (actions[(k, j)] - means[(k, j)]) / sigma;
                dl_dmean[(k, j)] = glp * z / sigma;
                dl_dlogstd[k] += glp * (z * z - 1.0);
            }
        }
    }

    // Entropy bonus: d entropy / d log_std = 1 per dimension.
    for k in 0..act_dim {
        dl_dlogstd[k] -= cfg.entropy_coef;
    }

    let value_cache = pv.value.forward_cached(obs);
    let v = value_cache.output();
    let mut dl_dv = DMatrix::zeros(1, obs.ncols());
    let mut value_loss = 0.0;
    for j in 0..obs.ncols() {
        let err = v[(0, j)] - returns[j];
        value_loss += err * err / m;
        dl_dv[(0, j)] = cfg.value_coef * 2.0 * err / m;
    }

    let grads = MinibatchGrads {
        policy: pv.policy.backward(&policy_cache, &dl_dmean),
        log_std: dl_dlogstd,
        value: pv.value.backward(&value_cache, &dl_dv),
        policy_loss,
        value_loss,
        approx_kl,
        clip_fraction: clipped as f64 / m,
    };

    let finite = grads.policy.iter().all(|g| g.is_finite())
        && grads.log_std.iter().all(|g| g.is_finite())
        && grads.value.iter().all(|g| g.is_finite());
    if !finite || !policy_loss.is_finite() || !value_loss.is_finite() {
        return Err(LearnError::NonFinite("loss or gradient"));
    }
    Ok(grads)
}

/// Runs the epoch/minibatch schedule over `buf`, updating `pv` in place.
/// Advantage normalization (when enabled) happens once over the whole
/// batch. Any non-finite loss or gradient aborts before the offending
/// minibatch is applied.
pub fn ppo_update(
    pv: &mut PolicyValue,
    opt: &mut PpoOptimizer,
    buf: &RolloutBuffer,
    cfg: &PpoConfig,
    rng: &mut impl Rng,
) -> Result<PpoStats, LearnError> {
    let n = buf.len();
    assert!(n > 0);

    let mut adv = buf.advantages.clone();
    if cfg.normalize_advantages {
        let mean = adv.mean();
        let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt().max(1e-8);
        for a in adv.iter_mut() {
            *a = (*a - mean) / std;
        }
    }

    let mb = cfg.minibatch.min(n).max(1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut stats = PpoStats::default();

    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(mb) {
            let gather_mat = |src: &DMatrix<f64>| {
                let mut m = DMatrix::zeros(src.nrows(), chunk.len());
                for (dst, &c) in chunk.iter().enumerate() {
                    m.set_column(dst, &src.column(c));
                }
                m
            };
            let gather_vec = |src: &DVector<f64>| {
                DVector::from_iterator(chunk.len(), chunk.iter().map(|&c| src[c]))
            };

            let obs = gather_mat(&buf.obs);
            let acts = gather_mat(&buf.actions);
            let old_lp = gather_vec(&buf.log_probs);
            let badv = gather_vec(&adv);
            let bret = gather_vec(&buf.returns);

            let g = ppo_minibatch_gradients(pv, &obs, &acts, &old_lp, &badv, &bret, cfg)?;
            opt.policy.step(&mut pv.policy.theta, &g.policy);
            opt.log_std.step(&mut pv.log_std, &g.log_std);
            opt.value.step(&mut pv.value.theta, &g.value);

            stats.policy_loss += g.policy_loss;
            stats.value_loss += g.value_loss;
            stats.approx_kl += g.approx_kl;
            stats.clip_fraction += g.clip_fraction;
            stats.minibatches += 1;
        }
    }

    let mbs = stats.minibatches.max(1) as f64;
    stats.policy_loss /= mbs;
    stats.value_loss /= mbs;
    stats.approx_kl /= mbs;
    stats.clip_fraction /= mbs;
    stats.entropy = pv.entropy();
    Ok(stats)
}
