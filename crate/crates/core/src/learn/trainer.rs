//! The training loop: rollouts, PPO updates, the two-stage terrain
//! curriculum, and deterministic policy evaluation.

use super::policy::PolicyValue;
use super::ppo::{ppo_update, LearnError, PpoConfig, PpoOptimizer, PpoStats};
use super::rollout::{collect_rollout, EnvRunner, ObsNorm, RewardMode, RolloutConfig, RolloutStats};
use crate::env::{Env, EpisodeConfig, PhaseRecord, Scenario, OBS_DIM};
use crate::gait::{Action, ActionBounds, ACTION_DIM};
use crate::robot::RobotModel;
use crate::sim::SimConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Second training stage: switch every environment to `second` after
/// `switch_at` updates.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Curriculum {
    pub second: Scenario,
    pub switch_at: usize,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// PPO updates to run.
    pub updates: usize,
    /// Parallel environment instances.
    pub num_envs: usize,
    /// Total transitions per update, split evenly across environments.
    pub horizon: usize,
    pub reward_mode: RewardMode,
    pub curriculum: Option<Curriculum>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            updates: 4000,
            num_envs: 16,
            horizon: 4096,
            reward_mode: RewardMode::Full,
            curriculum: None,
        }
    }
}

/// Everything a training run needs.
#[derive(Clone, Debug)]
pub struct TrainSetup {
    pub robot: RobotModel,
    pub sim: SimConfig,
    pub bounds: ActionBounds,
    pub episode: EpisodeConfig,
    pub ppo: PpoConfig,
    pub train: TrainConfig,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct UpdateLog {
    pub update: usize,
    pub scenario: Scenario,
    pub rollout: RolloutStats,
    pub ppo: PpoStats,
    pub log_std_mean: f64,
    pub wall_s: f64,
}

pub struct TrainOutcome {
    pub pv: PolicyValue,
    pub obs_norm: Option<ObsNorm>,
    pub logs: Vec<UpdateLog>,
    pub stopped_early: bool,
}

fn make_runners(
    n: usize,
    scenario: Scenario,
    setup: &TrainSetup,
    rng: &mut ChaCha8Rng,
) -> Vec<EnvRunner> {
    (0..n)
        .map(|_| {
            let episode = EpisodeConfig { scenario, ..setup.episode.clone() };
            EnvRunner::new(Env::new(
                setup.robot.clone(),
                setup.sim.clone(),
                setup.bounds.clone(),
                episode,
                rng.gen(),
            ))
        })
        .collect()
}

/// Runs PPO training. `on_update` sees every update's log and the current
/// parameters; returning `false` stops training early (the outcome notes
/// it).
pub fn train(
    setup: &TrainSetup,
    mut on_update: impl FnMut(&UpdateLog, &PolicyValue, Option<&ObsNorm>) -> bool,
) -> Result<TrainOutcome, LearnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let mut pv = PolicyValue::new(OBS_DIM, ACTION_DIM, &mut rng);
    let mut opt = PpoOptimizer::new(&pv, setup.ppo.adam);
    let mut norm = setup.ppo.normalize_obs.then(|| ObsNorm::new(OBS_DIM));

    let num_envs = setup.train.num_envs.max(1);
    let per_env = (setup.train.horizon / num_envs).max(1);
    let mut scenario = setup.episode.scenario;
    let mut runners = make_runners(num_envs, scenario, setup, &mut rng);

    let rollout_cfg = RolloutConfig {
        per_env,
        gamma: setup.ppo.gamma,
        lam: setup.ppo.lam,
        reward_mode: setup.train.reward_mode,
    };

    let mut logs = Vec::with_capacity(setup.train.updates);
    let mut stopped_early = false;
    for update in 1..=setup.train.updates {
        if let Some(c) = setup.train.curriculum {
            if update == c.switch_at + 1 && scenario != c.second {
                scenario = c.second;
                runners = make_runners(num_envs, scenario, setup, &mut rng);
            }
        }

        let t0 = Instant::now();
        let buf = collect_rollout(&mut runners, &pv, norm.as_mut(), &rollout_cfg, &mut rng);
        let ppo_stats: PpoStats = ppo_update(&mut pv, &mut opt, &buf, &setup.ppo, &mut rng)?;

        let log = UpdateLog {
            update,
            scenario,
            rollout: buf.stats,
            ppo: ppo_stats,
            log_std_mean: pv.log_std.mean(),
            wall_s: t0.elapsed().as_secs_f64(),
        };
        let keep_going = on_update(&log, &pv, norm.as_ref());
        logs.push(log);
        if !keep_going {
            stopped_early = true;
            break;
        }
    }

    Ok(TrainOutcome { pv, obs_norm: norm, logs, stopped_early })
}

/// One evaluated episode under the deterministic (mean-action) policy.
#[derive(Clone, Debug)]
pub struct EvalEpisode {
    /// Base position right after reset.
    pub spawn: [f64; 3],
    /// Largest planar displacement from the spawn point reached at any
    /// completed (non-terminated) phase boundary.
    pub distance_walked: f64,
    pub phases: usize,
    pub terminated: bool,
    pub total_reward: f64,
    pub records: Vec<PhaseRecord>,
}

/// Rolls one episode with mean actions, collecting per-phase records.
pub fn evaluate_episode(
    env: &mut Env,
    pv: &PolicyValue,
    obs_norm: Option<&ObsNorm>,
    keep_records: bool,
) -> EvalEpisode {
    let mut obs = env.reset().0;
    let spawn = env.state().base.pos;
    let mut out = EvalEpisode {
        spawn: [spawn.x, spawn.y, spawn.z],
        distance_walked: 0.0,
        phases: 0,
        terminated: false,
        total_reward: 0.0,
        records: Vec::new(),
    };

    let mut normed = [0.0; OBS_DIM];
    loop {
        match obs_norm {
            Some(n) => n.normalize_into(&obs, &mut normed),
            None => normed.copy_from_slice(&obs),
        }
        let mut action = Action::zeros();
        action.0.copy_from_slice(&pv.mean_action(&normed));

        let res = env.step(&action).expect("episode loop stops at done");
        out.phases += 1;
        out.total_reward += res.reward.total;
        if !res.terminated {
            let p = env.state().base.pos;
            let d = ((p.x - spawn.x).powi(2) + (p.y - spawn.y).powi(2)).sqrt();
            out.distance_walked = out.distance_walked.max(d);
        }
        if keep_records {
            out.records.push(res.record.clone());
        }
        if res.done() {
            out.terminated = res.terminated;
            break;
        }
        obs = res.obs.0;
    }
    out
}
