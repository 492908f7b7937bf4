//! Divergence-minimizing reward synthesis: a binary discriminator between
//! policy and target feature samples, turned into rewards by the GAIL,
//! GAIL2 and AIRL transforms, or the analytic target density (MLE).

mod discriminator;
mod target;

use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use discriminator::{sigmoid, softplus, train_discriminator, BinaryDiscriminator, DiscriminatorLoss};
pub use target::{write_samples_csv, TargetDistribution, TargetSpace};

use crate::envcore::{Environment, FeatureExtractor};
use crate::error::{Error, Result};
use crate::mimax::Skill;
use crate::ppo::RewardSynth;

/// Logits are clamped to this magnitude before any transform.
pub const LOGIT_CLAMP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DminTransform {
    /// `log D`
    #[serde(rename = "GAIL", alias = "gail")]
    Gail,
    /// `-log(1 - D)`
    #[serde(rename = "GAIL2", alias = "gail2")]
    Gail2,
    /// `log D - log(1 - D)`, i.e. the logit itself
    #[serde(rename = "AIRL", alias = "airl")]
    Airl,
    /// `log rho_target`
    #[serde(rename = "MLE", alias = "mle")]
    Mle,
}

/// Reward for one state. `logit` is clamped to `[-10, 10]` first; MLE reads
/// only `target_log_density`.
pub fn dmin_reward(transform: DminTransform, logit: f64, target_log_density: Option<f64>, offset: f64) -> Result<f64> {
    let l = logit.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    let r = match transform {
        DminTransform::Gail => -softplus(-l),
        DminTransform::Gail2 => softplus(l),
        DminTransform::Airl => l,
        DminTransform::Mle => target_log_density
            .ok_or_else(|| Error::InvalidArgument("the MLE transform needs the target log-density".into()))?,
    };
    Ok(r + offset)
}

fn default_target() -> TargetDistribution {
    TargetDistribution::bimodal(TargetSpace::Pos)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DminConfig {
    pub transform: DminTransform,
    pub gradient_penalty_weight: f64,
    /// `None` picks the transform's default offset.
    pub offset: Option<f64>,
    pub target: TargetDistribution,
    /// Observation indices forming `o(s)`; `None` reads the first
    /// component's position or velocity, following `target.space`.
    pub obs_indices: Option<Vec<usize>>,
    pub disc_hidden: Vec<usize>,
    pub disc_lr: f64,
    /// Adam steps taken on each rollout batch.
    pub disc_steps: usize,
    pub disc_minibatch: usize,
}

impl Default for DminConfig {
    fn default() -> Self {
        DminConfig {
            transform: DminTransform::Gail,
            gradient_penalty_weight: 0.0,
            offset: None,
            target: default_target(),
            obs_indices: None,
            disc_hidden: vec![32, 32],
            disc_lr: 1e-3,
            disc_steps: 1,
            disc_minibatch: 512,
        }
    }
}

impl DminConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::config(format!("dmin.{key}"), msg));
        if !(self.gradient_penalty_weight >= 0.0) || !self.gradient_penalty_weight.is_finite() {
            return bad("gradient_penalty_weight", "must be finite and >= 0");
        }
        if let Some(o) = self.offset {
            if !o.is_finite() {
                return bad("offset", "must be finite");
            }
        }
        if !(self.disc_lr >= 0.0) {
            return bad("disc_lr", "must be >= 0");
        }
        if self.disc_minibatch == 0 {
            return bad("disc_minibatch", "must be >= 1");
        }
        Ok(())
    }

    pub fn feature_extractor(&self, env: &Environment) -> Result<FeatureExtractor> {
        let fx = match &self.obs_indices {
            Some(ix) => FeatureExtractor::new(ix.clone())?,
            None => {
                let first = env
                    .component_names()
                    .next()
                    .ok_or_else(|| Error::config("dmin.obs_indices", "environment has no components"))?;
                let part = match self.target.space() {
                    TargetSpace::Pos => "pos",
                    TargetSpace::Vel => "vel",
                };
                let range = env
                    .layout()
                    .range(&format!("{first}.{part}"))
                    .ok_or_else(|| Error::config("dmin.obs_indices", format!("no `{first}.{part}` in the layout")))?;
                FeatureExtractor::new(range.collect())?
            }
        };
        fx.validate(env.obs_dim())?;
        if fx.dim() != self.target.dim() {
            return Err(Error::config(
                "dmin.target.means",
                format!("target has dimension {} but o(s) has {}", self.target.dim(), fx.dim()),
            ));
        }
        Ok(fx)
    }
}

/// Offsets keeping rewards non-negative: 10 for GAIL and AIRL (the clamp
/// bounds them below by -10), 0 for GAIL2, and minus the smallest target
/// log-density over the grid `[-half_width, half_width]^d` for MLE.
pub fn default_offset(transform: DminTransform, target: &TargetDistribution, half_width: f64) -> Result<f64> {
    Ok(match transform {
        DminTransform::Gail | DminTransform::Airl => LOGIT_CLAMP,
        DminTransform::Gail2 => 0.0,
        DminTransform::Mle => -target.min_log_density_on_grid(half_width, 101)?,
    })
}

/// A configured D-min learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Dmin {
    pub config: DminConfig,
    pub discriminator: BinaryDiscriminator,
    pub features: FeatureExtractor,
    pub offset: f64,
}

impl Dmin {
    pub fn new<R: Rng + ?Sized>(config: DminConfig, env: &Environment, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let features = config.feature_extractor(env)?;
        let discriminator =
            BinaryDiscriminator::new(features.dim(), &config.disc_hidden, config.gradient_penalty_weight, rng)?;
        let half_width = match config.target.space() {
            TargetSpace::Pos => env.arena_half_width().unwrap_or(5.0),
            TargetSpace::Vel => 5.0,
        };
        let offset = match config.offset {
            Some(o) => o,
            None => default_offset(config.transform, &config.target, half_width)?,
        };
        Ok(Dmin {
            config,
            discriminator,
            features,
            offset,
        })
    }

    pub fn target(&self) -> &TargetDistribution {
        &self.config.target
    }

    pub fn reward(&self, features: &[f64]) -> Result<f64> {
        let (logit, density) = match self.config.transform {
            DminTransform::Mle => (0.0, Some(self.config.target.log_density(features)?)),
            _ => (self.discriminator.logit(features)?, None),
        };
        dmin_reward(self.config.transform, logit, density, self.offset)
    }

    /// Fits the discriminator on policy features against fresh target
    /// samples; returns the mean loss (zero for MLE, which has nothing to fit).
    pub fn train<R: Rng + ?Sized>(
        &mut self,
        policy_features: ArrayView2<f64>,
        rng: &mut R,
    ) -> Result<DiscriminatorLoss> {
        if self.config.transform == DminTransform::Mle {
            return Ok(DiscriminatorLoss::default());
        }
        let n = policy_features.nrows();
        if n == 0 {
            return Err(Error::InvalidArgument("discriminator batches must be non-empty".into()));
        }
        let mb = self.config.disc_minibatch.min(n);
        let mut mean = DiscriminatorLoss::default();
        for _ in 0..self.config.disc_steps {
            let target = self.config.target.sample(mb, rng)?;
            let loss = if mb == n {
                train_discriminator(
                    &mut self.discriminator,
                    policy_features,
                    target.view(),
                    self.config.disc_lr,
                    rng,
                )?
            } else {
                let idx = sample(rng, n, mb).into_vec();
                let p = policy_features.select(ndarray::Axis(0), &idx);
                train_discriminator(
                    &mut self.discriminator,
                    p.view(),
                    target.view(),
                    self.config.disc_lr,
                    rng,
                )?
            };
            mean.cross_entropy += loss.cross_entropy;
            mean.penalty += loss.penalty;
            mean.total += loss.total;
        }
        let k = self.config.disc_steps.max(1) as f64;
        mean.cross_entropy /= k;
        mean.penalty /= k;
        mean.total /= k;
        Ok(mean)
    }
}

impl RewardSynth for Dmin {
    fn rewards(&self, features: ArrayView2<f64>, _skills: &[Skill], _env_rewards: &[f64]) -> Result<Vec<f64>> {
        match self.config.transform {
            DminTransform::Mle => features
                .rows()
                .into_iter()
                .map(|r| {
                    dmin_reward(
                        DminTransform::Mle,
                        0.0,
                        Some(self.config.target.log_density(&r.to_vec())?),
                        self.offset,
                    )
                })
                .collect(),
            t => self
                .discriminator
                .logits(features)?
                .into_iter()
                .map(|l| dmin_reward(t, l, None, self.offset))
                .collect(),
        }
    }
}
