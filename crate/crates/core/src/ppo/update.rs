//! Clipped-surrogate policy and value updates.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::PpoConfig;
use super::gae::gae_batch;
use super::policy::{GaussianPolicy, ValueFn};
use super::rollout::RolloutBatch;
use crate::error::{Error, Result};
use crate::neural::{Adam, AdamConfig, MlpGrads};

/// Separate Adam states for the policy (mean network then log-std) and the
/// value network.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoOptimizers {
    pub policy: Adam,
    pub value: Adam,
}

impl PpoOptimizers {
    pub fn new(lr: f64) -> Self {
        PpoOptimizers {
            policy: Adam::new(AdamConfig::with_lr(lr)),
            value: Adam::new(AdamConfig::with_lr(lr)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Mean of `(rho - 1) - ln rho` over the last epoch.
    pub kl: f64,
    /// Fraction of samples with `|rho - 1| > eps` over the last epoch.
    pub clip_fraction: f64,
    pub policy_grad_norm: f64,
    pub value_grad_norm: f64,
    pub minibatches: usize,
}

/// Gradients of the policy loss `-(surrogate) - entropy_coef * H`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrads {
    pub mean: MlpGrads,
    pub log_std: Vec<f64>,
}

impl PolicyGrads {
    fn sq_norm(&self) -> f64 {
        self.mean.sq_norm() + self.log_std.iter().map(|g| g * g).sum::<f64>()
    }

    fn scale(&mut self, f: f64) {
        self.mean.scale(f);
        self.log_std.iter_mut().for_each(|g| *g *= f);
    }
}

/// Loss terms for one minibatch of the policy objective.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SurrogateTerms {
    /// `mean(min(rho * A, clip(rho, 1 - eps, 1 + eps) * A))`
    pub surrogate: f64,
    pub entropy: f64,
    pub loss: f64,
    pub kl: f64,
    pub clip_fraction: f64,
}

/// Evaluates the clipped surrogate and its exact gradient.
///
/// A sample's ratio gradient is dropped only when the clipped branch is
/// strictly smaller, so at `rho = 1` with `eps = 0` the result is the vanilla
/// policy gradient.
pub fn surrogate_and_grad(
    policy: &GaussianPolicy,
    inputs: ArrayView2<f64>,
    actions: ArrayView2<f64>,
    old_log_probs: &[f64],
    advantages: &[f64],
    clip_eps: f64,
    entropy_coef: f64,
) -> Result<(SurrogateTerms, PolicyGrads)> {
    let b = inputs.nrows();
    let d = policy.action_dim();
    if actions.nrows() != b || old_log_probs.len() != b || advantages.len() != b {
        return Err(Error::dims(
            b,
            actions.nrows().min(old_log_probs.len()).min(advantages.len()),
            "surrogate batch",
        ));
    }
    if actions.ncols() != d {
        return Err(Error::dims(d, actions.ncols(), "surrogate actions"));
    }
    if b == 0 {
        return Err(Error::InvalidArgument("empty minibatch".into()));
    }
    let (means, cache) = policy.mean.forward_cached(inputs)?;
    let ls = policy.log_std.as_slice().expect("contiguous");
    let inv_std: Vec<f64> = ls.iter().map(|l| (-l).exp()).collect();
    let inv_b = 1.0 / b as f64;

    let mut upstream = Array2::zeros((b, d));
    let mut ls_grad = vec![-entropy_coef; d];
    let mut surrogate = 0.0;
    let mut kl = 0.0;
    let mut clipped = 0usize;
    for i in 0..b {
        let mu = means.row(i);
        let a = actions.row(i);
        let mut logp = 0.0;
        for j in 0..d {
            let z = (a[j] - mu[j]) * inv_std[j];
            logp += -0.5 * z * z - ls[j] - 0.918_938_533_204_672_7;
        }
        let log_ratio = logp - old_log_probs[i];
        let rho = log_ratio.exp();
        let adv = advantages[i];
        let lo = 1.0 - clip_eps;
        let hi = 1.0 + clip_eps;
        let unclipped = rho * adv;
        let clipped_obj = rho.clamp(lo, hi) * adv;
        surrogate += unclipped.min(clipped_obj);
        kl += (rho - 1.0) - log_ratio;
        if (rho - 1.0).abs() > clip_eps {
            clipped += 1;
        }
        if clipped_obj < unclipped {
            continue;
        }
        // d(-rho * A / B) / d logp
        let coef = -rho * adv * inv_b;
        for j in 0..d {
            let z = (a[j] - mu[j]) * inv_std[j];
            upstream[[i, j]] = coef * z * inv_std[j];
            ls_grad[j] += coef * (z * z - 1.0);
        }
    }
    let (mean_grads, _) = policy.mean.backward(&cache, upstream.view())?;
    let entropy = policy.entropy();
    let surrogate = surrogate * inv_b;
    let terms = SurrogateTerms {
        surrogate,
        entropy,
        loss: -surrogate - entropy_coef * entropy,
        kl: kl * inv_b,
        clip_fraction: clipped as f64 * inv_b,
    };
    if !terms.loss.is_finite() {
        return Err(Error::NonFinite(format!(
            "policy loss (surrogate {surrogate}, entropy {entropy}, kl {})",
            terms.kl
        )));
    }
    Ok((
        terms,
        PolicyGrads {
            mean: mean_grads,
            log_std: ls_grad,
        },
    ))
}

/// Mean squared error to `returns` and its gradient.
pub fn value_loss_and_grad(value: &ValueFn, inputs: ArrayView2<f64>, returns: &[f64]) -> Result<(f64, MlpGrads)> {
    let b = inputs.nrows();
    if returns.len() != b {
        return Err(Error::dims(b, returns.len(), "value targets"));
    }
    let (pred, cache) = value.net.forward_cached(inputs)?;
    let inv_b = 1.0 / b.max(1) as f64;
    let mut upstream = Array2::zeros((b, 1));
    let mut loss = 0.0;
    for i in 0..b {
        let e = pred[[i, 0]] - returns[i];
        loss += e * e;
        upstream[[i, 0]] = 2.0 * e * inv_b;
    }
    let loss = loss * inv_b;
    if !loss.is_finite() {
        return Err(Error::NonFinite("value loss".into()));
    }
    let (g, _) = value.net.backward(&cache, upstream.view())?;
    Ok((loss, g))
}

/// Normalizes to mean 0 and standard deviation 1 (std floored at 1e-6).
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-6);
    adv.iter_mut().for_each(|a| *a = (*a - mean) / std);
}

/// Advantages and value targets for a rollout, after reward scaling and
/// optional normalization of the advantages.
pub fn advantages_and_returns(batch: &RolloutBatch, config: &PpoConfig) -> (Vec<f64>, Vec<f64>) {
    let rewards: Vec<f64> = batch.rewards.iter().map(|r| r * config.reward_scale).collect();
    let (mut adv, returns) = gae_batch(
        &rewards,
        &batch.values,
        &batch.dones,
        &batch.bootstrap_values,
        batch.num_envs,
        config.gamma,
        config.gae_lambda,
    );
    if config.normalize_advantages {
        normalize_advantages(&mut adv);
    }
    (adv, returns)
}

fn clip_factor(sq_norm: f64, max: Option<f64>) -> f64 {
    match max {
        Some(m) if sq_norm.sqrt() > m => m / sq_norm.sqrt(),
        _ => 1.0,
    }
}

/// Runs `epochs` passes of shuffled minibatch updates over one rollout.
///
/// On a non-finite loss or gradient the error is returned; parameters
/// updated by earlier minibatches are kept.
pub fn ppo_update<R: Rng + ?Sized>(
    policy: &mut GaussianPolicy,
    value: &mut ValueFn,
    optimizers: &mut PpoOptimizers,
    batch: &RolloutBatch,
    config: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty rollout batch".into()));
    }
    let (adv, returns) = advantages_and_returns(batch, config);
    let mb = config.minibatch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut stats = UpdateStats::default();
    for epoch in 0..config.epochs {
        order.shuffle(rng);
        let last_epoch = epoch + 1 == config.epochs;
        let (mut kl_sum, mut clip_sum, mut count) = (0.0, 0.0, 0usize);
        for chunk in order.chunks(mb) {
            let x = batch.inputs.select(Axis(0), chunk);
            let a = batch.actions.select(Axis(0), chunk);
            let old: Vec<f64> = chunk.iter().map(|&i| batch.log_probs[i]).collect();
            let ad: Vec<f64> = chunk.iter().map(|&i| adv[i]).collect();
            let ret: Vec<f64> = chunk.iter().map(|&i| returns[i]).collect();

            let (terms, mut pg) = surrogate_and_grad(
                policy,
                x.view(),
                a.view(),
                &old,
                &ad,
                config.clip_eps,
                config.entropy_coef,
            )?;
            let pg_sq = pg.sq_norm();
            if !pg_sq.is_finite() {
                return Err(Error::NonFinite("policy gradient".into()));
            }
            pg.scale(clip_factor(pg_sq, config.max_grad_norm));
            {
                let mut params = policy.mean.params_mut();
                params.push(policy.log_std.as_slice_mut().expect("contiguous"));
                let mut grads = pg.mean.slices();
                grads.push(&pg.log_std);
                optimizers.policy.step(&mut params, &grads)?;
            }
            policy.mean.refresh_spectral(1);

            let (vloss, mut vg) = value_loss_and_grad(value, x.view(), &ret)?;
            let vg_sq = vg.sq_norm();
            if !vg_sq.is_finite() {
                return Err(Error::NonFinite("value gradient".into()));
            }
            vg.scale(clip_factor(vg_sq, config.max_grad_norm));
            optimizers.value.step(&mut value.net.params_mut(), &vg.slices())?;
            value.net.refresh_spectral(1);

            if policy.log_std.iter().any(|l| !l.is_finite()) {
                return Err(Error::NonFinite("policy log_std".into()));
            }
            stats.policy_loss = terms.loss;
            stats.value_loss = vloss;
            stats.entropy = terms.entropy;
            stats.policy_grad_norm = pg_sq.sqrt();
            stats.value_grad_norm = vg_sq.sqrt();
            stats.minibatches += 1;
            if last_epoch {
                let w = chunk.len() as f64;
                kl_sum += terms.kl * w;
                clip_sum += terms.clip_fraction * w;
                count += chunk.len();
            }
        }
        if last_epoch && count > 0 {
            stats.kl = kl_sum / count as f64;
            stats.clip_fraction = clip_sum / count as f64;
        }
    }
    Ok(stats)
}
