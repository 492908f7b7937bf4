use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Family};
use crate::dmin::Dmin;
use crate::envcore::{Environment, FeatureExtractor};
use crate::error::{Error, Result};
use crate::metrics::{
    collect_episodes, eval_intents, evaluate_all, Episode, EvalFamily, MetricReport, PolicyController,
};
use crate::mimax::{Mimax, PosteriorHead, Skill, SkillPrior};
use crate::neural::TensorArchive;
use crate::ppo::{
    ppo_update, rollout, EnvRewardSynth, GaussianPolicy, PpoOptimizers, RewardSynth, RolloutBatch, UpdateStats,
    ValueFn, VecEnv,
};

/// The reward model trained alongside the policy.
#[derive(Debug, Clone)]
pub enum Learner {
    Task,
    Mimax(Mimax),
    Dmin(Dmin),
}

impl Learner {
    fn synth(&self) -> &dyn RewardSynth {
        match self {
            Learner::Task => &EnvRewardSynth,
            Learner::Mimax(m) => m,
            Learner::Dmin(d) => d,
        }
    }

    pub fn prior(&self) -> Option<&SkillPrior> {
        match self {
            Learner::Mimax(m) => Some(&m.prior),
            _ => None,
        }
    }
}

/// One line of `stats.jsonl`. Episode totals average the episodes that
/// finished during the batch and are absent when none did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub step: usize,
    pub episode_reward: Option<f64>,
    pub episode_score: Option<f64>,
    pub losses: BTreeMap<String, f64>,
    pub kl: f64,
    pub clip_fraction: f64,
}

/// Policy, value function and reward model for a single seed.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: ExperimentConfig,
    seed: u64,
    env: Environment,
    features: FeatureExtractor,
    learner: Learner,
    policy: GaussianPolicy,
    value: ValueFn,
    optimizers: PpoOptimizers,
    envs: VecEnv,
    rng: ChaCha8Rng,
    steps: usize,
    batches: usize,
}

impl Trainer {
    pub fn new(config: &ExperimentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let config = config.for_seed(seed);
        let env = config.environment()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (learner, features) = match config.family {
            Family::Task => (Learner::Task, config.task_features(&env)?),
            Family::Mimax => {
                let m = Mimax::new(config.mimax.clone(), env.obs_dim(), &mut rng)?;
                let fx = m.features.clone();
                (Learner::Mimax(m), fx)
            }
            Family::Dmin => {
                let d = Dmin::new(config.dmin.clone(), &env, &mut rng)?;
                let fx = d.features.clone();
                (Learner::Dmin(d), fx)
            }
        };
        let prior = learner.prior().cloned();
        let envs = VecEnv::new(env.clone(), features.clone(), prior, config.ppo.num_envs, rng.gen())?;
        let p = &config.ppo;
        let policy = GaussianPolicy::new(
            envs.input_dim(),
            env.action_dim(),
            &p.policy_hidden,
            p.init_log_std,
            &mut rng,
        )?;
        let value = ValueFn::new(envs.input_dim(), &p.value_hidden, &mut rng)?;
        let optimizers = PpoOptimizers::new(p.lr);
        Ok(Trainer {
            config,
            seed,
            env,
            features,
            learner,
            policy,
            value,
            optimizers,
            envs,
            rng,
            steps: 0,
            batches: 0,
        })
    }

    /// Rebuilds a trainer from a checkpoint written by [`save_checkpoint`](Self::save_checkpoint).
    pub fn from_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        let archive = TensorArchive::load(path)?;
        let config: ExperimentConfig = match archive.meta.get("config") {
            Some(v) => serde_json::from_value(v.clone())?,
            None => return Err(Error::InvalidArgument("checkpoint has no embedded config".into())),
        };
        let seed = config.seeds[0];
        let mut t = Trainer::new(&config, seed)?;
        t.load_weights(&archive)?;
        Ok(t)
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn features(&self) -> &FeatureExtractor {
        &self.features
    }

    pub fn learner(&self) -> &Learner {
        &self.learner
    }

    pub fn learner_mut(&mut self) -> &mut Learner {
        &mut self.learner
    }

    pub fn policy(&self) -> &GaussianPolicy {
        &self.policy
    }

    pub fn policy_mut(&mut self) -> &mut GaussianPolicy {
        &mut self.policy
    }

    /// Control steps collected so far, one per `Environment::step` call.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Integrator substeps behind [`Trainer::steps`].
    pub fn physics_steps(&self) -> usize {
        self.steps * self.env.action_repeat()
    }

    pub fn batches(&self) -> usize {
        self.batches
    }

    /// Number of PPO batches needed to cover `ppo.total_steps`.
    pub fn total_batches(&self) -> usize {
        self.config.ppo.total_steps.div_ceil(self.config.ppo.batch_size())
    }

    pub fn fingerprint(&self) -> Result<String> {
        self.config.fingerprint(self.seed)
    }

    pub fn controller(&self) -> PolicyController<'_> {
        PolicyController {
            policy: &self.policy,
            prior: self.learner.prior(),
        }
    }

    /// Collects one rollout with rewards from the current reward model.
    pub fn collect(&mut self) -> Result<RolloutBatch> {
        let h = self.config.ppo.horizon;
        rollout(
            &self.policy,
            &self.value,
            self.learner.synth(),
            &mut self.envs,
            h,
            &mut self.rng,
        )
    }

    /// Rollout, reward-model fit, PPO update.
    pub fn train_batch(&mut self) -> Result<BatchStats> {
        let batch = self.collect()?;
        let mut losses = BTreeMap::new();
        match &mut self.learner {
            Learner::Task => {}
            Learner::Mimax(m) => {
                let l = m.train(batch.features.view(), &batch.skills, &mut self.rng)?;
                losses.insert("posterior".to_string(), l);
            }
            Learner::Dmin(d) => {
                let l = d.train(batch.features.view(), &mut self.rng)?;
                losses.insert("discriminator".to_string(), l.cross_entropy);
                losses.insert("gradient_penalty".to_string(), l.penalty);
            }
        }
        let u: UpdateStats = ppo_update(
            &mut self.policy,
            &mut self.value,
            &mut self.optimizers,
            &batch,
            &self.config.ppo,
            &mut self.rng,
        )?;
        losses.insert("policy".to_string(), u.policy_loss);
        losses.insert("value".to_string(), u.value_loss);
        losses.insert("entropy".to_string(), u.entropy);
        self.steps += batch.len();
        self.batches += 1;
        let n = batch.episodes.len();
        let (episode_reward, episode_score) = if n == 0 {
            (None, None)
        } else {
            let r = batch.episodes.iter().map(|e| e.reward).sum::<f64>() / n as f64;
            let s = batch.episodes.iter().map(|e| e.score).sum::<f64>() / n as f64;
            (Some(r), Some(s))
        };
        Ok(BatchStats {
            step: self.steps,
            episode_reward,
            episode_score,
            losses,
            kl: u.kl,
            clip_fraction: u.clip_fraction,
        })
    }

    /// Evaluates the deterministic policy with the configured fixed seeds.
    pub fn evaluate(&self) -> Result<MetricReport> {
        let family = match &self.learner {
            Learner::Task => EvalFamily::Task,
            Learner::Mimax(m) => EvalFamily::Mimax {
                prior: &m.prior,
                head: &m.head,
            },
            Learner::Dmin(d) => EvalFamily::Dmin { target: d.target() },
        };
        let mut report = evaluate_all(&self.env, &self.controller(), &self.features, family, &self.config.eval)?;
        report.step = self.steps as u64;
        report.fingerprint = self.fingerprint()?;
        Ok(report)
    }

    /// Deterministic episodes of the current policy: `episodes` per
    /// evaluation intent, grouped by intent.
    pub fn episodes(&self, episodes: usize) -> Result<Vec<Vec<Episode>>> {
        let s = &self.config.eval;
        let steps = s.steps.unwrap_or_else(|| self.env.horizon());
        let skills = match self.learner.prior() {
            Some(p) => eval_intents(p, s.intents, &mut ChaCha8Rng::seed_from_u64(s.seed ^ 0x5eed)),
            None => vec![Skill::None],
        };
        collect_episodes(&self.env, &self.controller(), &skills, episodes, steps, s.seed)
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut a = TensorArchive::new();
        self.policy.save("policy", &mut a);
        a.put_mlp("value", &self.value.net);
        match &self.learner {
            Learner::Task => {}
            Learner::Mimax(m) => m.head.save("posterior", &mut a)?,
            Learner::Dmin(d) => d.discriminator.save("discriminator", &mut a),
        }
        a.meta.insert("config".into(), self.config.to_value()?);
        a.meta.insert("step".into(), serde_json::json!(self.steps));
        a.save(path)
    }

    /// Replaces the networks with those in `archive`; shapes must match the
    /// ones implied by this trainer's config.
    pub fn load_weights(&mut self, archive: &TensorArchive) -> Result<()> {
        let policy = GaussianPolicy::load("policy", archive)?;
        if policy.input_dim() != self.policy.input_dim() {
            return Err(Error::dims(
                self.policy.input_dim(),
                policy.input_dim(),
                "checkpoint policy input",
            ));
        }
        if policy.action_dim() != self.policy.action_dim() {
            return Err(Error::dims(
                self.policy.action_dim(),
                policy.action_dim(),
                "checkpoint policy action",
            ));
        }
        let value = archive.get_mlp("value")?;
        if value.input_dim() != self.policy.input_dim() || value.output_dim() != 1 {
            return Err(Error::dims(
                self.policy.input_dim(),
                value.input_dim(),
                "checkpoint value input",
            ));
        }
        match &mut self.learner {
            Learner::Task => {}
            Learner::Mimax(m) => {
                let head = PosteriorHead::load("posterior", archive)?;
                if head.is_learned() != m.head.is_learned() {
                    return Err(Error::InvalidArgument(
                        "checkpoint posterior kind differs from config".into(),
                    ));
                }
                if let (PosteriorHead::Learned(new), PosteriorHead::Learned(old)) = (&head, &m.head) {
                    if new.net.input_dim() != old.net.input_dim() || new.net.output_dim() != old.net.output_dim() {
                        return Err(Error::dims(
                            old.net.output_dim(),
                            new.net.output_dim(),
                            "checkpoint posterior",
                        ));
                    }
                }
                m.head = head;
            }
            Learner::Dmin(d) => {
                let disc = crate::dmin::BinaryDiscriminator::load("discriminator", archive)?;
                if disc.feature_dim() != d.discriminator.feature_dim() {
                    return Err(Error::dims(
                        d.discriminator.feature_dim(),
                        disc.feature_dim(),
                        "checkpoint discriminator",
                    ));
                }
                d.discriminator = disc;
            }
        }
        self.policy = policy;
        self.value = ValueFn { net: value };
        if let Some(s) = archive.meta.get("step").and_then(|v| v.as_u64()) {
            self.steps = s as usize;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envcore::{ComponentDesc, EnvDescriptor, RewardFnDesc, StateComponent};

    fn small(family: Family) -> ExperimentConfig {
        let agent = ComponentDesc::new("point_mass").with_reward(
            "goal",
            RewardFnDesc::RootGoal {
                sdcomp: StateComponent::Pos,
                target_goal: vec![1.0, 0.0],
                scale: 1.0,
            },
        );
        let env = EnvDescriptor::new().component("agent1", agent).arena(3.0).horizon(20);
        let mut c = ExperimentConfig::new(env, family);
        c.ppo.num_envs = 4;
        c.ppo.horizon = 16;
        c.ppo.total_steps = 128;
        c.ppo.minibatch_size = 32;
        c.ppo.policy_hidden = vec![8];
        c.ppo.value_hidden = vec![8];
        c.mimax.obs_indices = Some(vec![0, 1]);
        c.mimax.num_skills = 4;
        c.mimax.posterior_hidden = vec![8];
        c.dmin.disc_hidden = vec![8];
        c.eval.intents = 4;
        c.eval.episodes = 2;
        c.eval.goals = 3;
        c
    }

    #[test]
    fn batch_counts_steps_for_each_family() {
        for fam in [Family::Task, Family::Mimax, Family::Dmin] {
            let mut t = Trainer::new(&small(fam), 1).unwrap();
            let s = t.train_batch().unwrap();
            assert_eq!(s.step, 64);
            assert!(s.kl.is_finite());
            let r = t.evaluate().unwrap();
            assert_eq!(r.step, 64);
            r.check_finite().unwrap();
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let run = || {
            let mut t = Trainer::new(&small(Family::Mimax), 7).unwrap();
            let a = t.train_batch().unwrap();
            let b = t.train_batch().unwrap();
            (a, b, t.evaluate().unwrap())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("checkpoint.json");
        for fam in [Family::Task, Family::Mimax, Family::Dmin] {
            let mut t = Trainer::new(&small(fam), 2).unwrap();
            t.train_batch().unwrap();
            t.save_checkpoint(&path).unwrap();
            let back = Trainer::from_checkpoint(&path).unwrap();
            assert_eq!(back.policy(), t.policy());
            assert_eq!(back.evaluate().unwrap(), t.evaluate().unwrap());
        }
    }

    #[test]
    fn incompatible_checkpoint_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("checkpoint.json");
        Trainer::new(&small(Family::Mimax), 0)
            .unwrap()
            .save_checkpoint(&path)
            .unwrap();
        let mut other = small(Family::Mimax);
        other.mimax.num_skills = 6;
        let mut t = Trainer::new(&other, 0).unwrap();
        let err = t.load_weights(&TensorArchive::load(&path).unwrap()).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }), "{err}");
    }
}
