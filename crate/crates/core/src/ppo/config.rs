use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// PPO hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub num_envs: usize,
    /// Rollout length per environment between updates.
    pub horizon: usize,
    pub total_steps: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub lr: f64,
    pub entropy_coef: f64,
    pub policy_hidden: Vec<usize>,
    pub value_hidden: Vec<usize>,
    pub normalize_advantages: bool,
    /// Global gradient-norm clip per network; `None` disables clipping.
    pub max_grad_norm: Option<f64>,
    /// Multiplier applied to training rewards before advantage estimation.
    pub reward_scale: f64,
    pub init_log_std: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            num_envs: 64,
            horizon: 128,
            total_steps: 1_000_000,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            epochs: 4,
            minibatch_size: 512,
            lr: 3e-4,
            entropy_coef: 1e-2,
            policy_hidden: vec![32; 4],
            value_hidden: vec![256; 5],
            normalize_advantages: true,
            max_grad_norm: Some(0.5),
            reward_scale: 1.0,
            init_log_std: 0.0,
        }
    }
}

impl PpoConfig {
    pub fn batch_size(&self) -> usize {
        self.num_envs * self.horizon
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::config(format!("ppo.{key}"), msg));
        if self.num_envs == 0 {
            return bad("num_envs", "must be >= 1");
        }
        if self.horizon == 0 {
            return bad("horizon", "must be >= 1");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma", "must be in (0, 1]");
        }
        if !(self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            return bad("gae_lambda", "must be in (0, 1]");
        }
        if !(self.clip_eps >= 0.0) {
            return bad("clip_eps", "must be >= 0");
        }
        if self.minibatch_size == 0 {
            return bad("minibatch_size", "must be >= 1");
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return bad("lr", "must be finite and >= 0");
        }
        if !self.reward_scale.is_finite() {
            return bad("reward_scale", "must be finite");
        }
        Ok(())
    }
}
