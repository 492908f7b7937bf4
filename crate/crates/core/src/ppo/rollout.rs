//! Lockstep rollouts over a vector of environment instances.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::policy::{clip_action, GaussianPolicy, ValueFn};
use crate::envcore::{EnvState, Environment, FeatureExtractor};
use crate::error::{Error, Result};
use crate::mimax::{Skill, SkillPrior};

/// Maps `(o(s'), z, env_reward)` to the reward PPO trains on.
pub trait RewardSynth {
    fn rewards(&self, features: ArrayView2<f64>, skills: &[Skill], env_rewards: &[f64]) -> Result<Vec<f64>>;
}

/// Plain task RL: the environment reward, unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct EnvRewardSynth;

impl RewardSynth for EnvRewardSynth {
    fn rewards(&self, _features: ArrayView2<f64>, _skills: &[Skill], env_rewards: &[f64]) -> Result<Vec<f64>> {
        Ok(env_rewards.to_vec())
    }
}

/// Adapts a per-transition closure.
pub struct FnRewardSynth<F>(pub F);

impl<F> RewardSynth for FnRewardSynth<F>
where
    F: Fn(&[f64], &Skill, f64) -> f64,
{
    fn rewards(&self, features: ArrayView2<f64>, skills: &[Skill], env_rewards: &[f64]) -> Result<Vec<f64>> {
        Ok(features
            .rows()
            .into_iter()
            .zip(skills)
            .zip(env_rewards)
            .map(|((f, z), r)| (self.0)(f.to_vec().as_slice(), z, *r))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub reward: f64,
    pub score: f64,
    pub length: usize,
    pub skill: Skill,
}

/// Time-major `(horizon, num_envs)` transitions flattened to rows
/// `t * num_envs + e`.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    pub num_envs: usize,
    pub horizon: usize,
    /// Policy inputs: observation followed by the skill encoding.
    pub inputs: Array2<f64>,
    /// Raw observations of the state each step led to.
    pub next_observations: Array2<f64>,
    /// `o(s')` for the state each step led to.
    pub features: Array2<f64>,
    /// Unclipped sampled actions.
    pub actions: Array2<f64>,
    pub log_probs: Vec<f64>,
    /// Synthesized training rewards.
    pub rewards: Vec<f64>,
    pub env_rewards: Vec<f64>,
    pub scores: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub skills: Vec<Skill>,
    /// Value estimates of the states following the final step.
    pub bootstrap_values: Vec<f64>,
    pub episodes: Vec<EpisodeStats>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// `num_envs` independent copies of one environment, each with its own
/// state, current skill and running episode totals.
#[derive(Debug, Clone)]
pub struct VecEnv {
    env: Environment,
    features: FeatureExtractor,
    prior: Option<SkillPrior>,
    states: Vec<EnvState>,
    obs: Vec<Vec<f64>>,
    skills: Vec<Skill>,
    ep_reward: Vec<f64>,
    ep_score: Vec<f64>,
    ep_len: Vec<usize>,
}

impl VecEnv {
    pub fn new(
        env: Environment,
        features: FeatureExtractor,
        prior: Option<SkillPrior>,
        num_envs: usize,
        seed: u64,
    ) -> Result<Self> {
        if num_envs == 0 {
            return Err(Error::InvalidArgument("num_envs must be >= 1".into()));
        }
        features.validate(env.obs_dim())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = VecEnv {
            env,
            features,
            prior,
            states: Vec::with_capacity(num_envs),
            obs: Vec::with_capacity(num_envs),
            skills: Vec::with_capacity(num_envs),
            ep_reward: vec![0.0; num_envs],
            ep_score: vec![0.0; num_envs],
            ep_len: vec![0; num_envs],
        };
        for _ in 0..num_envs {
            let s = v.env.reset(rng.gen());
            v.obs.push(v.env.observe(&s));
            v.states.push(s);
            v.skills.push(v.draw_skill(&mut rng));
        }
        Ok(v)
    }

    fn draw_skill<R: Rng + ?Sized>(&self, rng: &mut R) -> Skill {
        match &self.prior {
            Some(p) => p.sample(rng),
            None => Skill::None,
        }
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn feature_extractor(&self) -> &FeatureExtractor {
        &self.features
    }

    pub fn prior(&self) -> Option<&SkillPrior> {
        self.prior.as_ref()
    }

    pub fn num_envs(&self) -> usize {
        self.states.len()
    }

    pub fn skill_dim(&self) -> usize {
        self.prior.map(|p| p.encoding_dim()).unwrap_or(0)
    }

    pub fn input_dim(&self) -> usize {
        self.env.obs_dim() + self.skill_dim()
    }

    pub fn skills(&self) -> &[Skill] {
        &self.skills
    }

    fn inputs(&self) -> Array2<f64> {
        let dim = self.input_dim();
        let mut flat = Vec::with_capacity(dim * self.num_envs());
        for (o, z) in self.obs.iter().zip(&self.skills) {
            flat.extend_from_slice(o);
            if let Some(p) = &self.prior {
                p.encode_into(z, &mut flat);
            }
        }
        Array2::from_shape_vec((self.num_envs(), dim), flat).expect("row sizes agree")
    }
}

/// Concatenates an observation and the policy encoding of a skill.
pub fn policy_input(obs: &[f64], skill: &Skill, prior: Option<&SkillPrior>) -> Vec<f64> {
    let mut v = obs.to_vec();
    if let Some(p) = prior {
        p.encode_into(skill, &mut v);
    }
    v
}

/// Collects `horizon` steps from every environment in lockstep. Finished
/// episodes are reset with a fresh seed and a freshly drawn skill.
pub fn rollout<R: Rng + ?Sized>(
    policy: &GaussianPolicy,
    value: &ValueFn,
    synth: &dyn RewardSynth,
    envs: &mut VecEnv,
    horizon: usize,
    rng: &mut R,
) -> Result<RolloutBatch> {
    let n = envs.num_envs();
    let in_dim = envs.input_dim();
    let obs_dim = envs.env.obs_dim();
    let act_dim = envs.env.action_dim();
    let f_dim = envs.features.dim();
    if policy.input_dim() != in_dim {
        return Err(Error::dims(in_dim, policy.input_dim(), "policy input"));
    }
    if policy.action_dim() != act_dim {
        return Err(Error::dims(act_dim, policy.action_dim(), "policy action"));
    }
    let rows = n * horizon;
    let mut inputs = Array2::zeros((rows, in_dim));
    let mut next_obs = Array2::zeros((rows, obs_dim));
    let mut features = Array2::zeros((rows, f_dim));
    let mut actions = Array2::zeros((rows, act_dim));
    let mut log_probs = Vec::with_capacity(rows);
    let mut rewards = Vec::with_capacity(rows);
    let mut env_rewards = Vec::with_capacity(rows);
    let mut scores = Vec::with_capacity(rows);
    let mut values = Vec::with_capacity(rows);
    let mut dones = Vec::with_capacity(rows);
    let mut skills = Vec::with_capacity(rows);
    let mut episodes = Vec::new();

    let mut step_features = Array2::zeros((n, f_dim));
    let mut step_env_rewards = vec![0.0; n];
    let mut clipped = vec![0.0; act_dim];
    for t in 0..horizon {
        let x = envs.inputs();
        let (a, lp) = policy.sample(x.view(), rng)?;
        let v = value.values(x.view())?;
        let base = t * n;
        inputs.slice_mut(ndarray::s![base..base + n, ..]).assign(&x);
        actions.slice_mut(ndarray::s![base..base + n, ..]).assign(&a);
        log_probs.extend_from_slice(&lp);
        values.extend_from_slice(&v);
        skills.extend_from_slice(&envs.skills);

        let mut step_dones = vec![false; n];
        for e in 0..n {
            for (c, raw) in clipped.iter_mut().zip(a.row(e)) {
                *c = clip_action(*raw);
            }
            let (next, res) = envs.env.step(&envs.states[e], &clipped)?;
            for (k, &idx) in envs.features.indices().iter().enumerate() {
                step_features[[e, k]] = res.observation[idx];
            }
            for (k, o) in res.observation.iter().enumerate() {
                next_obs[[base + e, k]] = *o;
            }
            step_env_rewards[e] = res.reward;
            scores.push(res.score);
            step_dones[e] = res.done;
            envs.ep_reward[e] += res.reward;
            envs.ep_score[e] += res.score;
            envs.ep_len[e] += 1;
            envs.states[e] = next;
            envs.obs[e] = res.observation;
        }
        let r = synth.rewards(step_features.view(), &envs.skills, &step_env_rewards)?;
        if r.len() != n {
            return Err(Error::dims(n, r.len(), "synthesized rewards"));
        }
        if let Some(bad) = r.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!(
                "synthesized reward for env {bad} at step {t}"
            )));
        }
        features
            .slice_mut(ndarray::s![base..base + n, ..])
            .assign(&step_features);
        rewards.extend_from_slice(&r);
        env_rewards.extend_from_slice(&step_env_rewards);
        dones.extend_from_slice(&step_dones);

        for e in 0..n {
            if step_dones[e] {
                episodes.push(EpisodeStats {
                    reward: envs.ep_reward[e],
                    score: envs.ep_score[e],
                    length: envs.ep_len[e],
                    skill: envs.skills[e].clone(),
                });
                envs.ep_reward[e] = 0.0;
                envs.ep_score[e] = 0.0;
                envs.ep_len[e] = 0;
                let s = envs.env.reset(rng.gen());
                envs.obs[e] = envs.env.observe(&s);
                envs.states[e] = s;
                envs.skills[e] = envs.draw_skill(rng);
            }
        }
    }
    let bootstrap_values = value.values(envs.inputs().view())?;
    Ok(RolloutBatch {
        num_envs: n,
        horizon,
        inputs,
        next_observations: next_obs,
        features,
        actions,
        log_probs,
        rewards,
        env_rewards,
        scores,
        values,
        dones,
        skills,
        bootstrap_values,
        episodes,
    })
}
