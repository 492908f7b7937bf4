//! Proximal policy optimization shared by every reward family.

mod config;
mod gae;
mod policy;
mod rollout;
mod update;

pub use config::PpoConfig;
pub use gae::{gae, gae_batch};
pub use policy::{clip_action, GaussianPolicy, ValueFn};
pub use rollout::{
    policy_input, rollout, EnvRewardSynth, EpisodeStats, FnRewardSynth, RewardSynth, RolloutBatch, VecEnv,
};
pub use update::{
    advantages_and_returns, normalize_advantages, ppo_update, surrogate_and_grad, value_loss_and_grad, PolicyGrads,
    PpoOptimizers, SurrogateTerms, UpdateStats,
};
