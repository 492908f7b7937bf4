use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::histogram::HistogramSpec;
use super::mi::{mi_per_dimension_from_groups, particle_mi_from_groups, DimMi, MiEstimate};
use crate::envcore::{Environment, FeatureExtractor};
use crate::error::{Error, Result};
use crate::mimax::{PosteriorHead, Skill, SkillPrior};
use crate::ppo::{policy_input, GaussianPolicy};

/// Anything that picks an action from an observation and a skill.
pub trait Controller {
    fn act(&self, obs: &[f64], skill: &Skill) -> Result<Vec<f64>>;
}

/// A trained policy acting deterministically (its clipped mean).
#[derive(Debug, Clone, Copy)]
pub struct PolicyController<'a> {
    pub policy: &'a GaussianPolicy,
    pub prior: Option<&'a SkillPrior>,
}

impl Controller for PolicyController<'_> {
    fn act(&self, obs: &[f64], skill: &Skill) -> Result<Vec<f64>> {
        self.policy.act_deterministic(&policy_input(obs, skill, self.prior))
    }
}

/// Adapts a closure, e.g. a scripted controller.
pub struct FnController<F>(pub F);

impl<F: Fn(&[f64], &Skill) -> Vec<f64>> Controller for FnController<F> {
    fn act(&self, obs: &[f64], skill: &Skill) -> Result<Vec<f64>> {
        Ok((self.0)(obs, skill))
    }
}

/// Scripted proportional-derivative controller steering the observation
/// entries `pos` toward `target`: `a = kp (target - p) - kd v`, clipped.
#[derive(Debug, Clone, PartialEq)]
pub struct PdController {
    pub pos: Vec<usize>,
    pub vel: Vec<usize>,
    pub target: Vec<f64>,
    pub kp: f64,
    pub kd: f64,
}

impl PdController {
    /// Gains used by the reference controller of the goal-reaching tasks.
    pub fn new(pos: Vec<usize>, vel: Vec<usize>, target: Vec<f64>) -> Self {
        PdController {
            pos,
            vel,
            target,
            kp: 4.0,
            kd: 3.0,
        }
    }
}

impl Controller for PdController {
    fn act(&self, obs: &[f64], _skill: &Skill) -> Result<Vec<f64>> {
        if self.pos.len() != self.target.len() || self.vel.len() != self.target.len() {
            return Err(Error::dims(self.target.len(), self.pos.len(), "pd controller indices"));
        }
        let get = |i: usize| {
            obs.get(i).copied().ok_or(Error::IndexOutOfRange {
                index: i,
                len: obs.len(),
            })
        };
        let mut a = Vec::with_capacity(self.target.len());
        for k in 0..self.target.len() {
            let u = self.kp * (self.target[k] - get(self.pos[k])?) - self.kd * get(self.vel[k])?;
            a.push(u.clamp(-1.0, 1.0));
        }
        Ok(a)
    }
}

/// One evaluation episode. `observations[t]` is the observation after step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub skill: Skill,
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub scores: Vec<f64>,
}

impl Episode {
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn total_score(&self) -> f64 {
        self.scores.iter().sum()
    }

    /// `o(s_t)` for every step, one per row.
    pub fn features(&self, fx: &FeatureExtractor) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((self.observations.len(), fx.dim()));
        for (mut row, obs) in out.rows_mut().into_iter().zip(&self.observations) {
            for (x, &i) in row.iter_mut().zip(fx.indices()) {
                *x = *obs.get(i).ok_or(Error::IndexOutOfRange {
                    index: i,
                    len: obs.len(),
                })?;
            }
        }
        Ok(out)
    }
}

/// Runs one episode of at most `steps` steps (fewer if the environment ends first).
pub fn run_episode(
    env: &Environment,
    ctrl: &dyn Controller,
    skill: &Skill,
    steps: usize,
    seed: u64,
) -> Result<Episode> {
    let mut state = env.reset(seed);
    let mut obs = env.observe(&state);
    let mut ep = Episode {
        skill: skill.clone(),
        observations: Vec::with_capacity(steps),
        actions: Vec::with_capacity(steps),
        rewards: Vec::with_capacity(steps),
        scores: Vec::with_capacity(steps),
    };
    for _ in 0..steps {
        let action: Vec<f64> = ctrl.act(&obs, skill)?.into_iter().map(|a| a.clamp(-1.0, 1.0)).collect();
        let (next, res) = env.step(&state, &action)?;
        ep.actions.push(action);
        ep.rewards.push(res.reward);
        ep.scores.push(res.score);
        ep.observations.push(res.observation.clone());
        state = next;
        obs = res.observation;
        if res.done {
            break;
        }
    }
    Ok(ep)
}

/// `episodes` runs per skill, grouped by skill in input order. Reset seeds
/// come from a generator seeded with `seed`.
pub fn collect_episodes(
    env: &Environment,
    ctrl: &dyn Controller,
    skills: &[Skill],
    episodes: usize,
    steps: usize,
    seed: u64,
) -> Result<Vec<Vec<Episode>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    skills
        .iter()
        .map(|z| {
            (0..episodes)
                .map(|_| run_episode(env, ctrl, z, steps, rng.gen()))
                .collect()
        })
        .collect()
}

/// Intents for particle MI: every skill in turn for a categorical prior,
/// fresh draws for a Gaussian one.
pub fn eval_intents<R: Rng + ?Sized>(prior: &SkillPrior, n: usize, rng: &mut R) -> Vec<Skill> {
    match *prior {
        SkillPrior::Categorical { num_skills } => (0..n).map(|k| Skill::Discrete(k % num_skills)).collect(),
        SkillPrior::Gaussian { .. } => (0..n).map(|_| prior.sample(rng)).collect(),
    }
}

/// Stacks the features of each skill's episodes.
pub fn group_features(groups: &[Vec<Episode>], fx: &FeatureExtractor) -> Result<Vec<Array2<f64>>> {
    groups
        .iter()
        .map(|eps| {
            let parts = eps.iter().map(|e| e.features(fx)).collect::<Result<Vec<_>>>()?;
            let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
            ndarray::concatenate(ndarray::Axis(0), &views)
                .map_err(|_| Error::InvalidArgument("episode features differ in width".into()))
        })
        .collect()
}

/// Parameters shared by the rollout-based estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutPlan {
    pub intents: usize,
    pub episodes: usize,
    pub steps: usize,
    pub seed: u64,
}

/// Particle MI of a controller: `intents` skills, `episodes` episodes of
/// `steps` steps each.
pub fn particle_mi(
    env: &Environment,
    ctrl: &dyn Controller,
    prior: &SkillPrior,
    fx: &FeatureExtractor,
    plan: RolloutPlan,
    spec: &HistogramSpec,
) -> Result<MiEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed ^ 0x5eed);
    let skills = eval_intents(prior, plan.intents, &mut rng);
    let groups = collect_episodes(env, ctrl, &skills, plan.episodes, plan.steps, plan.seed)?;
    let feats = group_features(&groups, fx)?;
    let views: Vec<_> = feats.iter().map(|f| f.view()).collect();
    particle_mi_from_groups(&views, spec)
}

/// Per-dimension MI over observation columns `dims`, all from one shared set
/// of rollouts.
pub fn mi_per_dimension(
    env: &Environment,
    ctrl: &dyn Controller,
    prior: &SkillPrior,
    dims: &[usize],
    plan: RolloutPlan,
    bins: usize,
    range: (f64, f64),
) -> Result<Vec<DimMi>> {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed ^ 0x5eed);
    let skills = eval_intents(prior, plan.intents, &mut rng);
    let groups = collect_episodes(env, ctrl, &skills, plan.episodes, plan.steps, plan.seed)?;
    let feats = group_features(&groups, &FeatureExtractor::identity(env.obs_dim())?)?;
    let views: Vec<_> = feats.iter().map(|f| f.view()).collect();
    mi_per_dimension_from_groups(&views, dims, bins, range)
}

/// Sum of `-|goal - o|^2 / sigma^2` over the rows and the row count.
pub fn lgr_terms(goal: &[f64], features: ndarray::ArrayView2<f64>, sigma: f64) -> (f64, usize) {
    let inv = 1.0 / (sigma * sigma);
    let total = features
        .rows()
        .into_iter()
        .map(|o| -o.iter().zip(goal).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * inv)
        .sum();
    (total, features.nrows())
}

/// Goals drawn from a unit Gaussian in feature space.
pub fn sample_goals(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

/// Latent goal reaching: each goal is mapped to a skill by the posterior's
/// deterministic read, then `episodes` episodes are scored against it.
pub fn lgr(
    env: &Environment,
    ctrl: &dyn Controller,
    fx: &FeatureExtractor,
    goals: &[Vec<f64>],
    head: &PosteriorHead,
    sigma: f64,
    episodes: usize,
    steps: usize,
    seed: u64,
) -> Result<f64> {
    if goals.is_empty() {
        return Err(Error::InvalidArgument("LGR needs at least one goal".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument("LGR sigma must be > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut total, mut count) = (0.0, 0usize);
    for goal in goals {
        if goal.len() != fx.dim() {
            return Err(Error::dims(fx.dim(), goal.len(), "LGR goal"));
        }
        let z = head.infer(goal)?;
        for _ in 0..episodes {
            let ep = run_episode(env, ctrl, &z, steps, rng.gen())?;
            let (t, c) = lgr_terms(goal, ep.features(fx)?.view(), sigma);
            total += t;
            count += c;
        }
    }
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

/// Distance between each goal and the final `o(s)` of one episode aimed at it.
pub fn final_goal_distances(
    env: &Environment,
    ctrl: &dyn Controller,
    fx: &FeatureExtractor,
    goals: &[Vec<f64>],
    head: &PosteriorHead,
    steps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    goals
        .iter()
        .map(|goal| {
            let z = head.infer(goal)?;
            let ep = run_episode(env, ctrl, &z, steps, rng.gen())?;
            let f = ep.features(fx)?;
            let last = f.row(f.nrows().saturating_sub(1));
            Ok(last
                .iter()
                .zip(goal)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envcore::{compose, ComponentDesc, EnvDescriptor};
    use ndarray::array;

    fn env_with(horizon: usize) -> Environment {
        compose(
            &EnvDescriptor::new()
                .component("agent1", ComponentDesc::new("point_mass"))
                .arena(3.0)
                .horizon(horizon),
        )
        .unwrap()
    }

    fn env() -> Environment {
        env_with(50)
    }

    #[test]
    fn pd_controller_settles_on_target() {
        let ctrl = PdController::new(vec![0, 1], vec![2, 3], vec![2.0, -1.0]);
        let ep = run_episode(&env_with(200), &ctrl, &Skill::None, 200, 3).unwrap();
        let last = ep.observations.last().unwrap();
        assert!((last[0] - 2.0).abs() < 0.02 && (last[1] + 1.0).abs() < 0.02, "{last:?}");
        assert!(PdController::new(vec![0], vec![2, 3], vec![1.0])
            .act(&[0.0; 4], &Skill::None)
            .is_err());
    }

    #[test]
    fn lgr_identities() {
        let f = array![[1.0, 2.0], [1.0, 2.0]];
        assert_eq!(lgr_terms(&[1.0, 2.0], f.view(), 1.0), (0.0, 2));
        let f = array![[2.0, 3.0], [0.0, 1.0]];
        let (t, c) = lgr_terms(&[1.0, 2.0], f.view(), 1.0);
        assert_eq!(t / c as f64, -2.0);
    }

    #[test]
    fn lgr_is_translation_covariant() {
        let f = array![[0.3, -0.2], [1.1, 0.4], [2.0, 2.0]];
        let shifted = &f + &array![5.0, -3.0];
        let a = lgr_terms(&[0.5, 0.5], f.view(), 0.7).0;
        let b = lgr_terms(&[5.5, -2.5], shifted.view(), 0.7).0;
        assert!((a - b).abs() < 1e-12);
        assert!(a <= 0.0);
    }

    #[test]
    fn particle_mi_of_scripted_skills() {
        // skill k drives the mass toward one of 8 well-separated bins along x
        let ctrl = FnController(|obs: &[f64], z: &Skill| {
            let Skill::Discrete(k) = z else { unreachable!() };
            let target = -1.5 + 3.0 * (*k as f64 + 0.5) / 8.0;
            vec![
                (4.0 * (target - obs[0]) - 2.0 * obs[2]).clamp(-1.0, 1.0),
                -obs[1] - obs[3],
            ]
        });
        let fx = FeatureExtractor::new(vec![0]).unwrap();
        let spec = HistogramSpec::uniform(8, (-1.5, 1.5), 1).unwrap();
        let prior = SkillPrior::categorical(8).unwrap();
        let plan = RolloutPlan {
            intents: 8,
            episodes: 2,
            steps: 200,
            seed: 3,
        };
        let env = env_with(200);
        let m = particle_mi(&env, &ctrl, &prior, &fx, plan, &spec).unwrap();
        assert!(m.mi > 1.0 && m.mi <= 8f64.ln() + 1e-12, "{m:?}");
        let again = particle_mi(&env, &ctrl, &prior, &fx, plan, &spec).unwrap();
        assert_eq!(m, again);
        let idle = FnController(|_: &[f64], _: &Skill| vec![0.0, 0.0]);
        let many = RolloutPlan { episodes: 16, ..plan };
        let m0 = particle_mi(&env, &idle, &prior, &fx, many, &spec).unwrap();
        assert!(m0.mi < 0.1, "{m0:?}");
    }

    #[test]
    fn pinned_controller_has_near_zero_lgr_and_distance() {
        // drives o(s) to the goal z and holds it there
        let ctrl = FnController(|obs: &[f64], z: &Skill| {
            let Skill::Continuous(g) = z else { unreachable!() };
            (0..2)
                .map(|i| (6.0 * (g[i] - obs[i]) - 3.0 * obs[2 + i]).clamp(-1.0, 1.0))
                .collect()
        });
        let fx = FeatureExtractor::new(vec![0, 1]).unwrap();
        let head = PosteriorHead::fixed(0.25).unwrap();
        let goals = vec![vec![0.5, -0.5], vec![-1.0, 0.2]];
        let d = final_goal_distances(&env(), &ctrl, &fx, &goals, &head, 50, 1).unwrap();
        assert!(d.iter().all(|x| *x < 0.05), "{d:?}");
        let idle = FnController(|_: &[f64], _: &Skill| vec![0.0, 0.0]);
        let good = lgr(&env(), &ctrl, &fx, &goals, &head, 1.0, 2, 50, 1).unwrap();
        let bad = lgr(&env(), &idle, &fx, &goals, &head, 1.0, 2, 50, 1).unwrap();
        assert!(good <= 0.0 && bad < good);
        assert!(lgr(&env(), &ctrl, &fx, &[], &head, 1.0, 1, 5, 1).is_err());
    }

    #[test]
    fn episodes_stop_at_the_horizon() {
        let idle = FnController(|_: &[f64], _: &Skill| vec![0.0, 0.0]);
        let ep = run_episode(&env(), &idle, &Skill::None, 500, 0).unwrap();
        assert_eq!(ep.observations.len(), 50);
    }
}
