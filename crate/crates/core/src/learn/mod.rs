//! From-scratch PPO: batched MLPs with hand-written backprop, Adam, GAE,
//! the clipped-surrogate update, rollout collection, and the training
//! loop with its terrain curriculum.

pub mod adam;
pub mod checkpoint;
pub mod gae;
pub mod mlp;
pub mod policy;
pub mod ppo;
pub mod rollout;
pub mod trainer;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use gae::gae_advantages;
pub use mlp::{Mlp, MlpSpec};
pub use policy::PolicyValue;
pub use ppo::{ppo_update, LearnError, PpoConfig, PpoOptimizer, PpoStats};
pub use rollout::{
    collect_rollout, EnvRunner, ObsNorm, RewardMode, RolloutBuffer, RolloutConfig, RolloutStats,
};
pub use trainer::{evaluate_episode, train, Curriculum, EvalEpisode, TrainConfig, TrainOutcome, TrainSetup, UpdateLog};
