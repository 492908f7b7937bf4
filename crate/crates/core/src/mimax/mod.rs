//! Mutual-information-maximizing reward synthesis: goal-conditioned RL with
//! a fixed posterior, and DIAYN-style discrete or continuous skills with a
//! learned one.

mod posterior;
mod prior;

use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use posterior::{log_sum_exp, train_posterior, HeadOutput, LearnedHead, PosteriorHead};
pub use prior::{sample_skill, Skill, SkillPrior};

use crate::envcore::FeatureExtractor;
use crate::error::{Error, Result};
use crate::ppo::RewardSynth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MimaxAlgorithm {
    #[serde(rename = "GCRL", alias = "gcrl")]
    Gcrl,
    #[serde(rename = "DIAYN", alias = "diayn")]
    Diayn,
    #[serde(rename = "cDIAYN", alias = "cdiayn")]
    Cdiayn,
    /// DIAYN with the posterior reading the whole observation.
    #[serde(rename = "DIAYN_FULL", alias = "diayn_full")]
    DiaynFull,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MimaxConfig {
    pub algorithm: MimaxAlgorithm,
    pub num_skills: usize,
    pub z_dim: usize,
    /// Standard deviation of the fixed goal-conditioned posterior.
    pub sigma: f64,
    /// `None` picks [`default_offset`].
    pub offset: Option<f64>,
    pub spectral_norm: bool,
    /// Observation indices forming `o(s)`; `None` means the whole observation.
    pub obs_indices: Option<Vec<usize>>,
    pub env_reward_multiplier: f64,
    pub posterior_hidden: Vec<usize>,
    pub posterior_lr: f64,
    /// Adam steps taken on each rollout batch.
    pub posterior_steps: usize,
    pub posterior_minibatch: usize,
}

impl Default for MimaxConfig {
    fn default() -> Self {
        MimaxConfig {
            algorithm: MimaxAlgorithm::Diayn,
            num_skills: 8,
            z_dim: 2,
            sigma: 0.25,
            offset: None,
            spectral_norm: true,
            obs_indices: None,
            env_reward_multiplier: 0.0,
            posterior_hidden: vec![32, 32],
            posterior_lr: 1e-3,
            posterior_steps: 1,
            posterior_minibatch: 512,
        }
    }
}

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Offset making the reward non-negative at the uninformative point: zero
/// for discrete skills, `(d/2) ln(2 pi sigma^2) + 2` for Gaussian posteriors
/// (`sigma = 1` for learned continuous heads).
pub fn default_offset(algorithm: MimaxAlgorithm, z_dim: usize, sigma: f64) -> f64 {
    match algorithm {
        MimaxAlgorithm::Diayn | MimaxAlgorithm::DiaynFull => 0.0,
        MimaxAlgorithm::Gcrl => 0.5 * z_dim as f64 * (LN_2PI + 2.0 * sigma.ln()) + 2.0,
        MimaxAlgorithm::Cdiayn => 0.5 * z_dim as f64 * LN_2PI + 2.0,
    }
}

impl MimaxConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::config(format!("mimax.{key}"), msg));
        if matches!(self.algorithm, MimaxAlgorithm::Diayn | MimaxAlgorithm::DiaynFull) && self.num_skills < 2 {
            return bad("num_skills", "must be >= 2");
        }
        if self.algorithm == MimaxAlgorithm::Cdiayn && self.z_dim == 0 {
            return bad("z_dim", "must be >= 1");
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return bad("sigma", "must be finite and > 0");
        }
        if let Some(o) = self.offset {
            if !(o >= 0.0) || !o.is_finite() {
                return bad("offset", "must be finite and >= 0");
            }
        }
        if !(self.env_reward_multiplier >= 0.0) || !self.env_reward_multiplier.is_finite() {
            return bad("env_reward_multiplier", "must be finite and >= 0");
        }
        if !(self.posterior_lr >= 0.0) {
            return bad("posterior_lr", "must be >= 0");
        }
        if self.posterior_minibatch == 0 {
            return bad("posterior_minibatch", "must be >= 1");
        }
        Ok(())
    }

    /// The feature extractor implied by the config for an observation of
    /// width `obs_dim`. DIAYN_FULL always reads the whole observation.
    pub fn feature_extractor(&self, obs_dim: usize) -> Result<FeatureExtractor> {
        let identity = FeatureExtractor::identity(obs_dim)?;
        let fx = match &self.obs_indices {
            None => identity.clone(),
            Some(ix) => FeatureExtractor::new(ix.clone())?,
        };
        fx.validate(obs_dim)?;
        if self.algorithm == MimaxAlgorithm::DiaynFull && fx != identity {
            return Err(Error::config(
                "mimax.obs_indices",
                "DIAYN_FULL uses the full observation",
            ));
        }
        Ok(fx)
    }
}

/// `log q(z | o) - log p(z) + offset`.
pub fn mimax_reward(head: &PosteriorHead, prior: &SkillPrior, features: &[f64], z: &Skill, offset: f64) -> Result<f64> {
    prior.check(z)?;
    Ok(head.log_q(features, z)? - prior.log_prob(z)? + offset)
}

/// A configured MI-max learner: prior, posterior and reward parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mimax {
    pub config: MimaxConfig,
    pub prior: SkillPrior,
    pub head: PosteriorHead,
    pub features: FeatureExtractor,
    pub offset: f64,
}

impl Mimax {
    pub fn new<R: Rng + ?Sized>(config: MimaxConfig, obs_dim: usize, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let features = config.feature_extractor(obs_dim)?;
        let fdim = features.dim();
        let (prior, head) = match config.algorithm {
            MimaxAlgorithm::Gcrl => (SkillPrior::gaussian(fdim)?, PosteriorHead::fixed(config.sigma)?),
            MimaxAlgorithm::Diayn | MimaxAlgorithm::DiaynFull => {
                let prior = SkillPrior::categorical(config.num_skills)?;
                let head = PosteriorHead::learned(
                    fdim,
                    HeadOutput::for_prior(&prior),
                    &config.posterior_hidden,
                    config.spectral_norm,
                    rng,
                )?;
                (prior, head)
            }
            MimaxAlgorithm::Cdiayn => {
                let prior = SkillPrior::gaussian(config.z_dim)?;
                let head = PosteriorHead::learned(
                    fdim,
                    HeadOutput::for_prior(&prior),
                    &config.posterior_hidden,
                    config.spectral_norm,
                    rng,
                )?;
                (prior, head)
            }
        };
        let offset = config
            .offset
            .unwrap_or_else(|| default_offset(config.algorithm, prior.encoding_dim(), config.sigma));
        Ok(Mimax {
            config,
            prior,
            head,
            features,
            offset,
        })
    }

    pub fn reward(&self, features: &[f64], z: &Skill) -> Result<f64> {
        mimax_reward(&self.head, &self.prior, features, z, self.offset)
    }

    /// MI reward plus the multiplied environment reward.
    pub fn synthesize(&self, env_reward: f64, features: &[f64], z: &Skill) -> Result<f64> {
        Ok(self.reward(features, z)? + self.config.env_reward_multiplier * env_reward)
    }

    /// Fits the posterior on a rollout's `(o(s'), z)` pairs; returns the mean
    /// loss over the steps taken (the current loss for a fixed head).
    pub fn train<R: Rng + ?Sized>(&mut self, features: ArrayView2<f64>, skills: &[Skill], rng: &mut R) -> Result<f64> {
        if !self.head.is_learned() {
            return self.head.loss(features, skills);
        }
        let n = features.nrows();
        let mb = self.config.posterior_minibatch.min(n);
        let mut total = 0.0;
        for _ in 0..self.config.posterior_steps {
            let loss = if mb == n {
                train_posterior(&mut self.head, features, skills, self.config.posterior_lr)?
            } else {
                let idx = sample(rng, n, mb).into_vec();
                let x = features.select(ndarray::Axis(0), &idx);
                let z: Vec<Skill> = idx.iter().map(|&i| skills[i].clone()).collect();
                train_posterior(&mut self.head, x.view(), &z, self.config.posterior_lr)?
            };
            total += loss;
        }
        Ok(total / self.config.posterior_steps.max(1) as f64)
    }
}

impl RewardSynth for Mimax {
    fn rewards(&self, features: ArrayView2<f64>, skills: &[Skill], env_rewards: &[f64]) -> Result<Vec<f64>> {
        let lq = self.head.log_q_batch(features, skills)?;
        let m = self.config.env_reward_multiplier;
        lq.iter()
            .zip(skills)
            .zip(env_rewards)
            .map(|((l, z), r)| Ok(l - self.prior.log_prob(z)? + self.offset + m * r))
            .collect()
    }
}
