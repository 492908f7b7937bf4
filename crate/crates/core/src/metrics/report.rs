use std::collections::BTreeMap;

use ndarray::{concatenate, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::energy::energy_distance;
use super::histogram::{histogram_entropy, HistogramSpec};
use super::mi::particle_mi_from_groups;
use super::rollouts::{collect_episodes, eval_intents, group_features, lgr, sample_goals, Controller, Episode};
use crate::dmin::TargetDistribution;
use crate::envcore::{Environment, FeatureExtractor};
use crate::error::{Error, Result};
use crate::mimax::{PosteriorHead, Skill, SkillPrior};

pub const EPISODE_REWARD: &str = "episode_reward";
pub const EPISODE_SCORE: &str = "episode_score";
pub const MI: &str = "MI(s,z)";
pub const H_MARGINAL: &str = "H(s)";
pub const H_CONDITIONAL: &str = "H(s|z)";
/// The LGR value itself (never positive; closer to 0 is better).
pub const NEG_LGR: &str = "-LGR";
/// Energy distance negated, so that higher is better like the other columns.
pub const NEG_ENERGY_DISTANCE: &str = "-Energy Distance";
pub const EXCLUDED_FRACTION: &str = "excluded_fraction";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    /// Population standard deviation across seeds (0 for a single run).
    pub std: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub step: u64,
    pub fingerprint: String,
    pub metrics: BTreeMap<String, MetricValue>,
}

impl MetricReport {
    pub fn insert(&mut self, name: &str, value: f64) {
        // `+ 0.0` folds -0.0 into 0.0 so idle rewards don't print as "-0".
        self.metrics.insert(
            name.to_string(),
            MetricValue {
                value: value + 0.0,
                std: 0.0,
            },
        );
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).map(|m| m.value)
    }

    pub fn check_finite(&self) -> Result<()> {
        for (k, v) in &self.metrics {
            if !v.value.is_finite() || !v.std.is_finite() {
                return Err(Error::NonFinite(format!("metric `{k}`")));
            }
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Mean and std of every metric present in all `reports`.
    pub fn aggregate(reports: &[MetricReport]) -> Result<MetricReport> {
        let first = reports
            .first()
            .ok_or_else(|| Error::InvalidArgument("nothing to aggregate".into()))?;
        let mut out = MetricReport {
            step: reports.iter().map(|r| r.step).max().unwrap_or(0),
            fingerprint: first.fingerprint.clone(),
            metrics: BTreeMap::new(),
        };
        for name in first.metrics.keys() {
            let vals: Vec<f64> = reports.iter().filter_map(|r| r.get(name)).collect();
            if vals.len() != reports.len() {
                continue;
            }
            let (mean, std) = mean_std(&vals);
            out.metrics.insert(name.clone(), MetricValue { value: mean, std });
        }
        Ok(out)
    }
}

/// Mean and population standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub bins: usize,
    pub range: (f64, f64),
    pub intents: usize,
    pub episodes: usize,
    /// Episode length; `None` uses the environment horizon.
    pub steps: Option<usize>,
    pub goals: usize,
    pub sigma_lgr: f64,
    /// Cap on samples per side of the energy distance.
    pub energy_samples: usize,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            bins: 16,
            range: (-5.0, 5.0),
            intents: 8,
            episodes: 8,
            steps: None,
            goals: 10,
            sigma_lgr: 1.0,
            energy_samples: 2048,
            seed: 0,
        }
    }
}

impl EvalSettings {
    pub fn spec(&self, dims: usize) -> Result<HistogramSpec> {
        HistogramSpec::uniform(self.bins, self.range, dims)
    }
}

/// What the policy under evaluation was trained for.
#[derive(Debug, Clone, Copy)]
pub enum EvalFamily<'a> {
    Task,
    Mimax {
        prior: &'a SkillPrior,
        head: &'a PosteriorHead,
    },
    Dmin {
        target: &'a TargetDistribution,
    },
}

/// Every `stride`-th row so at most `cap` rows remain.
pub fn cap_rows(x: Array2<f64>, cap: usize) -> Array2<f64> {
    let n = x.nrows();
    if n <= cap || cap == 0 {
        return x;
    }
    let idx: Vec<usize> = (0..cap).map(|i| i * n / cap).collect();
    x.select(Axis(0), &idx)
}

fn stack(groups: &[Array2<f64>]) -> Result<Array2<f64>> {
    let views: Vec<_> = groups.iter().map(|g| g.view()).collect();
    concatenate(Axis(0), &views).map_err(|_| Error::InvalidArgument("feature groups differ in width".into()))
}

fn episode_stats(report: &mut MetricReport, groups: &[Vec<Episode>]) {
    let all: Vec<&Episode> = groups.iter().flatten().collect();
    if all.is_empty() {
        return;
    }
    let n = all.len() as f64;
    report.insert(EPISODE_REWARD, all.iter().map(|e| e.total_reward()).sum::<f64>() / n);
    report.insert(EPISODE_SCORE, all.iter().map(|e| e.total_score()).sum::<f64>() / n);
}

/// Metrics from already collected episodes, grouped by skill. MI needs at
/// least two groups; the energy distance needs a target.
pub fn evaluate_episodes(
    groups: &[Vec<Episode>],
    fx: &FeatureExtractor,
    target: Option<&TargetDistribution>,
    settings: &EvalSettings,
) -> Result<MetricReport> {
    let mut report = MetricReport::default();
    episode_stats(&mut report, groups);
    let feats = group_features(groups, fx)?;
    let spec = settings.spec(fx.dim())?;
    if feats.len() >= 2 {
        let views: Vec<_> = feats.iter().map(|f| f.view()).collect();
        let m = particle_mi_from_groups(&views, &spec)?;
        report.insert(MI, m.mi);
        report.insert(H_MARGINAL, m.h_marginal);
        report.insert(H_CONDITIONAL, m.h_conditional);
        report.insert(EXCLUDED_FRACTION, m.excluded_fraction);
    } else {
        let pooled = stack(&feats)?;
        let h = histogram_entropy(pooled.view(), &spec)?;
        report.insert(H_MARGINAL, h.entropy);
        report.insert(EXCLUDED_FRACTION, h.excluded_fraction);
    }
    if let Some(t) = target {
        let pooled = cap_rows(stack(&feats)?, settings.energy_samples);
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x7a12);
        let ts = t.sample(settings.energy_samples.max(1), &mut rng)?;
        report.insert(NEG_ENERGY_DISTANCE, -energy_distance(pooled.view(), ts.view())?);
    }
    report.check_finite()?;
    Ok(report)
}

/// Runs the evaluation protocol for `family` with fixed evaluation seeds.
pub fn evaluate_all(
    env: &Environment,
    ctrl: &dyn Controller,
    fx: &FeatureExtractor,
    family: EvalFamily<'_>,
    settings: &EvalSettings,
) -> Result<MetricReport> {
    let steps = settings.steps.unwrap_or_else(|| env.horizon());
    match family {
        EvalFamily::Task => {
            let groups = collect_episodes(env, ctrl, &[Skill::None], settings.episodes, steps, settings.seed)?;
            evaluate_episodes(&groups, fx, None, settings)
        }
        EvalFamily::Dmin { target } => {
            let groups = collect_episodes(env, ctrl, &[Skill::None], settings.episodes, steps, settings.seed)?;
            evaluate_episodes(&groups, fx, Some(target), settings)
        }
        EvalFamily::Mimax { prior, head } => {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x5eed);
            let skills = eval_intents(prior, settings.intents, &mut rng);
            let groups = collect_episodes(env, ctrl, &skills, settings.episodes, steps, settings.seed)?;
            let mut report = evaluate_episodes(&groups, fx, None, settings)?;
            let goals = sample_goals(fx.dim(), settings.goals, settings.seed ^ 0x90a1);
            let l = lgr(
                env,
                ctrl,
                fx,
                &goals,
                head,
                settings.sigma_lgr,
                1,
                steps,
                settings.seed ^ 0x1a6,
            )?;
            report.insert(NEG_LGR, l);
            report.check_finite()?;
            Ok(report)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envcore::{compose, ComponentDesc, EnvDescriptor};
    use crate::metrics::{FnController, PolicyController};
    use crate::ppo::GaussianPolicy;

    fn env() -> Environment {
        compose(
            &EnvDescriptor::new()
                .component("agent1", ComponentDesc::new("point_mass"))
                .arena(3.0)
                .horizon(40),
        )
        .unwrap()
    }

    #[test]
    fn untrained_policy_gives_full_finite_deterministic_report() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let prior = SkillPrior::categorical(8).unwrap();
        let pi = GaussianPolicy::new(4 + 8, 2, &[16], 0.0, &mut rng).unwrap();
        let ctrl = PolicyController {
            policy: &pi,
            prior: Some(&prior),
        };
        let head =
            PosteriorHead::learned(2, crate::mimax::HeadOutput::for_prior(&prior), &[8], true, &mut rng).unwrap();
        let fx = FeatureExtractor::new(vec![0, 1]).unwrap();
        let s = EvalSettings {
            episodes: 2,
            goals: 3,
            ..Default::default()
        };
        let a = evaluate_all(
            &env(),
            &ctrl,
            &fx,
            EvalFamily::Mimax {
                prior: &prior,
                head: &head,
            },
            &s,
        )
        .unwrap();
        for k in [EPISODE_REWARD, EPISODE_SCORE, MI, H_MARGINAL, H_CONDITIONAL, NEG_LGR] {
            assert!(a.get(k).is_some(), "missing {k}");
        }
        let b = evaluate_all(
            &env(),
            &ctrl,
            &fx,
            EvalFamily::Mimax {
                prior: &prior,
                head: &head,
            },
            &s,
        )
        .unwrap();
        assert_eq!(a, b);
        assert!(a.get(NEG_LGR).unwrap() <= 0.0);
    }

    #[test]
    fn dmin_report_has_energy_distance() {
        let target = TargetDistribution::bimodal(crate::dmin::TargetSpace::Pos);
        let idle = FnController(|_: &[f64], _: &Skill| vec![0.0, 0.0]);
        let fx = FeatureExtractor::new(vec![0, 1]).unwrap();
        let r = evaluate_all(
            &env(),
            &idle,
            &fx,
            EvalFamily::Dmin { target: &target },
            &EvalSettings::default(),
        )
        .unwrap();
        let ed = -r.get(NEG_ENERGY_DISTANCE).unwrap();
        assert!(ed > 0.5, "{ed}");
    }

    #[test]
    fn aggregate_mean_and_std() {
        let mut a = MetricReport::default();
        a.insert(MI, 1.0);
        a.insert(H_MARGINAL, 2.0);
        let mut b = MetricReport::default();
        b.insert(MI, 3.0);
        let agg = MetricReport::aggregate(&[a, b]).unwrap();
        assert_eq!(agg.metrics[MI], MetricValue { value: 2.0, std: 1.0 });
        assert!(!agg.metrics.contains_key(H_MARGINAL));
    }

    #[test]
    fn cap_rows_keeps_spread() {
        let x = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
        let c = cap_rows(x, 4);
        assert_eq!(c.column(0).to_vec(), vec![0.0, 2.0, 5.0, 7.0]);
    }
}
