use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A latent intent conditioning the policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Skill {
    Discrete(usize),
    Continuous(Vec<f64>),
    None,
}

impl Skill {
    /// Compact textual form used in trajectory files: the index for
    /// discrete skills, `;`-joined values for continuous ones.
    pub fn to_field(&self) -> String {
        match self {
            Skill::Discrete(k) => k.to_string(),
            Skill::Continuous(v) => v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(";"),
            Skill::None => String::new(),
        }
    }

    pub fn from_field(s: &str) -> Result<Skill> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Skill::None);
        }
        if !s.contains(';') && !s.contains('.') && !s.contains('e') {
            if let Ok(k) = s.parse::<usize>() {
                return Ok(Skill::Discrete(k));
            }
        }
        s.split(';')
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("bad skill field `{s}`")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Skill::Continuous)
    }
}

/// `p(z)`: uniform categorical over `num_skills`, or a zero-mean unit
/// isotropic Gaussian of dimension `dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SkillPrior {
    Categorical { num_skills: usize },
    Gaussian { dim: usize },
}

impl SkillPrior {
    pub fn categorical(num_skills: usize) -> Result<Self> {
        if num_skills < 2 {
            return Err(Error::InvalidArgument(
                "categorical prior needs at least 2 skills".into(),
            ));
        }
        Ok(SkillPrior::Categorical { num_skills })
    }

    pub fn gaussian(dim: usize) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidArgument("gaussian prior needs dim >= 1".into()));
        }
        Ok(SkillPrior::Gaussian { dim })
    }

    /// Width of the policy-input encoding: one-hot for categorical, the raw
    /// vector for Gaussian.
    pub fn encoding_dim(&self) -> usize {
        match *self {
            SkillPrior::Categorical { num_skills } => num_skills,
            SkillPrior::Gaussian { dim } => dim,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Skill {
        match *self {
            SkillPrior::Categorical { num_skills } => Skill::Discrete(rng.gen_range(0..num_skills)),
            SkillPrior::Gaussian { dim } => Skill::Continuous((0..dim).map(|_| rng.sample(StandardNormal)).collect()),
        }
    }

    pub fn check(&self, z: &Skill) -> Result<()> {
        match (*self, z) {
            (SkillPrior::Categorical { num_skills }, Skill::Discrete(k)) if *k < num_skills => Ok(()),
            (SkillPrior::Categorical { num_skills }, Skill::Discrete(k)) => Err(Error::IndexOutOfRange {
                index: *k,
                len: num_skills,
            }),
            (SkillPrior::Gaussian { dim }, Skill::Continuous(v)) if v.len() == dim => Ok(()),
            (SkillPrior::Gaussian { dim }, Skill::Continuous(v)) => Err(Error::dims(dim, v.len(), "skill vector")),
            _ => Err(Error::InvalidArgument(format!(
                "skill {z:?} is not in the support of {self:?}"
            ))),
        }
    }

    pub fn log_prob(&self, z: &Skill) -> Result<f64> {
        self.check(z)?;
        Ok(match (*self, z) {
            (SkillPrior::Categorical { num_skills }, _) => -(num_skills as f64).ln(),
            (SkillPrior::Gaussian { dim }, Skill::Continuous(v)) => {
                let sq: f64 = v.iter().map(|x| x * x).sum();
                -0.5 * sq - 0.5 * dim as f64 * (2.0 * std::f64::consts::PI).ln()
            }
            _ => unreachable!("checked above"),
        })
    }

    /// Appends the policy-input encoding of `z` to `out`.
    pub fn encode_into(&self, z: &Skill, out: &mut Vec<f64>) {
        match (*self, z) {
            (SkillPrior::Categorical { num_skills }, Skill::Discrete(k)) => {
                out.extend((0..num_skills).map(|i| if i == *k { 1.0 } else { 0.0 }));
            }
            (SkillPrior::Gaussian { .. }, Skill::Continuous(v)) => out.extend_from_slice(v),
            _ => out.extend(std::iter::repeat(0.0).take(self.encoding_dim())),
        }
    }
}

/// Draws a skill from `prior` (a convenience over [`SkillPrior::sample`]).
pub fn sample_skill<R: Rng + ?Sized>(prior: &SkillPrior, rng: &mut R) -> Skill {
    prior.sample(rng)
}
