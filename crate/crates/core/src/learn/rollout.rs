//! On-policy data collection: a fixed number of phases per environment,
//! batched network evaluation across environments, GAE at the end.

use super::gae::gae_advantages;
use super::policy::PolicyValue;
use crate::env::{Env, RewardBreakdown, OBS_DIM};
use crate::gait::{Action, ACTION_DIM};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Which part of the reward the learner sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// The full shaping sum (and the termination penalty).
    Full,
    /// Stand-still diagnostic: height and roll terms only, no penalty.
    StandStill,
}

impl RewardMode {
    pub fn extract(&self, r: &RewardBreakdown) -> f64 {
        match self {
            RewardMode::Full => r.total,
            RewardMode::StandStill => r.r_s + r.r_r,
        }
    }
}

/// Running per-feature mean/variance (Welford), optionally applied to
/// observations before the networks see them.
#[derive(Clone, Debug)]
pub struct ObsNorm {
    mean: DVector<f64>,
    m2: DVector<f64>,
    count: f64,
}

impl ObsNorm {
    pub fn new(dim: usize) -> Self {
        Self { mean: DVector::zeros(dim), m2: DVector::zeros(dim), count: 0.0 }
    }

    pub fn update(&mut self, obs: &[f64]) {
        self.count += 1.0;
        for (i, &x) in obs.iter().enumerate() {
            let d = x - self.mean[i];
            self.mean[i] += d / self.count;
            self.m2[i] += d * (x - self.mean[i]);
        }
    }

    pub fn normalize_into(&self, obs: &[f64], out: &mut [f64]) {
        if self.count < 2.0 {
            out.copy_from_slice(obs);
            return;
        }
        for i in 0..obs.len() {
            let var = self.m2[i] / self.count;
            out[i] = (obs[i] - self.mean[i]) / (var + 1e-8).sqrt();
        }
    }

    pub fn state(&self) -> (&DVector<f64>, &DVector<f64>, f64) {
        (&self.mean, &self.m2, self.count)
    }

    pub fn from_state(mean: DVector<f64>, m2: DVector<f64>, count: f64) -> Self {
        Self { mean, m2, count }
    }
}

/// An environment plus its live observation and episode accumulators.
pub struct EnvRunner {
    pub env: Env,
    obs: [f64; OBS_DIM],
    ep_return: f64,
    ep_len: usize,
}

impl EnvRunner {
    pub fn new(mut env: Env) -> Self {
        let obs = env.reset().0;
        Self { env, obs, ep_return: 0.0, ep_len: 0 }
    }

    pub fn obs(&self) -> &[f64; OBS_DIM] {
        &self.obs
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RolloutStats {
    /// Mean collected reward per transition.
    pub mean_step_reward: f64,
    /// Episodes that finished during the rollout.
    pub episodes: usize,
    pub mean_episode_return: f64,
    pub mean_episode_len: f64,
    pub terminations: usize,
    pub truncations: usize,
}

/// One rollout's transitions (columns), with GAE already applied.
pub struct RolloutBuffer {
    pub obs: DMatrix<f64>,
    pub actions: DMatrix<f64>,
    pub log_probs: DVector<f64>,
    pub values: DVector<f64>,
    pub rewards: DVector<f64>,
    pub dones: Vec<bool>,
    pub advantages: DVector<f64>,
    pub returns: DVector<f64>,
    pub stats: RolloutStats,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.dones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dones.is_empty()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RolloutConfig {
    pub per_env: usize,
    pub gamma: f64,
    pub lam: f64,
    pub reward_mode: RewardMode,
}

/// Collects `per_env` transitions from every runner. Environments step in
/// lockstep (network passes batched over environments); episodes that end
/// reset immediately, truncated ones folding gamma * V(s') into the final
/// reward so GAE can treat the cut like a termination.
pub fn collect_rollout(
    runners: &mut [EnvRunner],
    pv: &PolicyValue,
    mut norm: Option<&mut ObsNorm>,
    cfg: &RolloutConfig,
    rng: &mut impl Rng,
) -> RolloutBuffer {
    let n_envs = runners.len();
    let n = n_envs * cfg.per_env;
    assert!(n > 0, "rollout needs at least one env and one step");

    let mut obs_mat = DMatrix::zeros(OBS_DIM, n);
    let mut act_mat = DMatrix::zeros(ACTION_DIM, n);
    let mut log_probs = DVector::zeros(n);
    let mut values = DVector::zeros(n);
    let mut rewards = DVector::zeros(n);
    let mut dones = vec![false; n];
    let mut stats = RolloutStats::default();
    let mut ep_returns = Vec::new();
    let mut ep_lens = Vec::new();

    // Column e * per_env + t: env-major so every env stream is contiguous.
    let col = |e: usize, t: usize| e * cfg.per_env + t;

    let mut step_obs = DMatrix::zeros(OBS_DIM, n_envs);
    for t in 0..cfg.per_env {
        for (e, runner) in runners.iter().enumerate() {
            if let Some(norm) = norm.as_deref_mut() {
                norm.update(&runner.obs);
            }
            let dst = &mut step_obs.column_mut(e);
            match norm.as_deref() {
                Some(norm) => norm.normalize_into(&runner.obs, dst.as_mut_slice()),
                None => dst.as_mut_slice().copy_from_slice(&runner.obs),
            }
        }
        let means = pv.means(&step_obs);
        let vals = pv.values(&step_obs);
        let acts = pv.sample(&means, rng);
        let lps = pv.log_probs(&acts, &means);

        for (e, runner) in runners.iter_mut().enumerate() {
            let c = col(e, t);
            obs_mat.set_column(c, &step_obs.column(e));
            act_mat.set_column(c, &acts.column(e));
            log_probs[c] = lps[e];
            values[c] = vals[e];

            let mut action = Action::zeros();
            action.0.copy_from_slice(acts.column(e).as_slice());
            let res = runner.env.step(&action).expect("runner resets finished episodes");
            let mut r = cfg.reward_mode.extract(&res.reward);
            runner.ep_return += r;
            runner.ep_len += 1;

            if res.truncated {
                // Bootstrap the cut: the episode would have continued.
                let mut next = DMatrix::zeros(OBS_DIM, 1);
                match norm.as_deref() {
                    Some(norm) => {
                        norm.normalize_into(&res.obs.0, next.column_mut(0).as_mut_slice())
                    }
                    None => next.column_mut(0).as_mut_slice().copy_from_slice(&res.obs.0),
                }
                r += cfg.gamma * pv.values(&next)[0];
            }
            rewards[c] = r;
            dones[c] = res.done();

            if res.done() {
                stats.episodes += 1;
                stats.terminations += res.terminated as usize;
                stats.truncations += res.truncated as usize;
                ep_returns.push(runner.ep_return);
                ep_lens.push(runner.ep_len as f64);
                runner.ep_return = 0.0;
                runner.ep_len = 0;
                runner.obs = runner.env.reset().0;
            } else {
                runner.obs = res.obs.0;
            }
        }
    }

    // Tail bootstrap per env stream.
    let mut advantages = DVector::zeros(n);
    let mut returns = DVector::zeros(n);
    for (e, runner) in runners.iter().enumerate() {
        let mut tail = DMatrix::zeros(OBS_DIM, 1);
        match norm.as_deref() {
            Some(norm) => norm.normalize_into(&runner.obs, tail.column_mut(0).as_mut_slice()),
            None => tail.column_mut(0).as_mut_slice().copy_from_slice(&runner.obs),
        }
        let v_tail = pv.values(&tail)[0];

        let s = col(e, 0);
        let r: Vec<f64> = (0..cfg.per_env).map(|t| rewards[s + t]).collect();
        let mut v: Vec<f64> = (0..cfg.per_env).map(|t| values[s + t]).collect();
        v.push(v_tail);
        let d: Vec<bool> = (0..cfg.per_env).map(|t| dones[s + t]).collect();
        let (adv, ret) = gae_advantages(&r, &v, &d, cfg.gamma, cfg.lam);
        for t in 0..cfg.per_env {
            advantages[s + t] = adv[t];
            returns[s + t] = ret[t];
        }
    }

    stats.mean_step_reward = rewards.sum() / n as f64;
    if !ep_returns.is_empty() {
        stats.mean_episode_return = ep_returns.iter().sum::<f64>() / ep_returns.len() as f64;
        stats.mean_episode_len = ep_lens.iter().sum::<f64>() / ep_lens.len() as f64;
    }

    RolloutBuffer {
        obs: obs_mat,
        actions: act_mat,
        log_probs,
        values,
        rewards,
        dones,
        advantages,
        returns,
        stats,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EpisodeConfig, Scenario};
    use crate::gait::ActionBounds;
    use crate::robot::RobotModel;
    use crate::sim::SimConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn runner(seed: u64, max_phases: usize) -> EnvRunner {
        let episode = EpisodeConfig {
            scenario: Scenario::Rigid,
            max_phases,
            ..EpisodeConfig::default()
        };
        EnvRunner::new(Env::new(
            RobotModel::default(),
            SimConfig::default(),
            ActionBounds::default(),
            episode,
            seed,
        ))
    }

    #[test]
    fn rollout_fills_every_column_and_computes_gae() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pv = PolicyValue::new(OBS_DIM, ACTION_DIM, &mut rng);
        let mut runners = vec![runner(1, 400), runner(2, 400)];
        let cfg = RolloutConfig {
            per_env: 3,
            gamma: 0.95,
            lam: 0.95,
            reward_mode: RewardMode::StandStill,
        };
        let buf = collect_rollout(&mut runners, &pv, None, &cfg, &mut rng);
        assert_eq!(buf.len(), 6);
        assert_eq!(buf.obs.ncols(), 6);
        assert_eq!(buf.actions.nrows(), ACTION_DIM);
        assert!(buf.rewards.iter().all(|r| r.is_finite()));
        assert!(buf.advantages.iter().all(|a| a.is_finite()));
        for c in 0..6 {
            assert!(
                (buf.returns[c] - (buf.advantages[c] + buf.values[c])).abs() < 1e-12,
                "returns = advantages + values"
            );
        }
    }

    #[test]
    fn truncation_bootstraps_and_resets_the_env() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pv = PolicyValue::new(OBS_DIM, ACTION_DIM, &mut rng);
        // max_phases 2 forces a truncation inside a 3-step rollout.
        let mut runners = vec![runner(5, 2)];
        let cfg = RolloutConfig {
            per_env: 3,
            gamma: 0.95,
            lam: 0.95,
            reward_mode: RewardMode::StandStill,
        };
        let buf = collect_rollout(&mut runners, &pv, None, &cfg, &mut rng);
        assert!(buf.dones[1], "second phase hits the cap");
        assert_eq!(buf.stats.truncations + buf.stats.terminations, buf.stats.episodes);
        assert!(buf.stats.episodes >= 1);
        assert_eq!(runners[0].env.phase_count(), 1, "env was reset and stepped once more");
    }

    #[test]
    fn rollouts_are_deterministic_per_seed() {
        let collect = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pv = PolicyValue::new(OBS_DIM, ACTION_DIM, &mut rng);
            let mut runners = vec![runner(7, 400)];
            let cfg = RolloutConfig {
                per_env: 2,
                gamma: 0.95,
                lam: 0.95,
                reward_mode: RewardMode::Full,
            };
            let buf = collect_rollout(&mut runners, &pv, None, &cfg, &mut rng);
            (buf.rewards.as_slice().to_vec(), buf.actions.as_slice().to_vec())
        };
        assert_eq!(collect(11), collect(11));
    }

    #[test]
    fn obs_norm_converges_to_batch_statistics() {
        let mut norm = ObsNorm::new(2);
        let data = [[1.0, -2.0], [3.0, 0.0], [5.0, 2.0], [7.0, 4.0]];
        for d in &data {
            norm.update(d);
        }
        let mut out = [0.0; 2];
        norm.normalize_into(&[4.0, 1.0], &mut out);
        // Feature 0: mean 4, population var 5; feature 1: mean 1, var 5.
        assert!((out[0] - 0.0).abs() < 1e-9);
        assert!((out[1] - 0.0).abs() < 1e-9);
        norm.normalize_into(&[4.0 + 5f64.sqrt(), 1.0], &mut out);
        assert!((out[0] - 1.0).abs() < 1e-6);
    }
}
