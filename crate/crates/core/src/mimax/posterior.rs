//! Skill posteriors `q(z | o(s))`.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::prior::{Skill, SkillPrior};
use crate::error::{Error, Result};
use crate::neural::{Activation, Adam, AdamConfig, Mlp, TensorArchive};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// What a learned head predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeadOutput {
    /// Logits over `num_skills`.
    Categorical { num_skills: usize },
    /// Mean of a unit-variance Gaussian.
    Gaussian { dim: usize },
}

impl HeadOutput {
    pub fn for_prior(prior: &SkillPrior) -> Self {
        match *prior {
            SkillPrior::Categorical { num_skills } => HeadOutput::Categorical { num_skills },
            SkillPrior::Gaussian { dim } => HeadOutput::Gaussian { dim },
        }
    }

    fn width(&self) -> usize {
        match *self {
            HeadOutput::Categorical { num_skills } => num_skills,
            HeadOutput::Gaussian { dim } => dim,
        }
    }
}

/// Trainable posterior network with its optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedHead {
    pub net: Mlp,
    pub output: HeadOutput,
    pub optimizer: Adam,
    /// Power iterations after every optimizer step when spectral
    /// normalization is on; `0` recomputes the exact top singular triplet.
    pub spectral_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PosteriorHead {
    /// `q(z | o) = N(o, sigma^2 I)`: goal-conditioned RL.
    Fixed {
        sigma: f64,
    },
    Learned(LearnedHead),
}

impl PosteriorHead {
    pub fn fixed(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "posterior sigma must be > 0, got {sigma}"
            )));
        }
        Ok(PosteriorHead::Fixed { sigma })
    }

    pub fn learned<R: Rng + ?Sized>(
        feature_dim: usize,
        output: HeadOutput,
        hidden: &[usize],
        spectral_norm: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if let HeadOutput::Categorical { num_skills } = output {
            if num_skills < 2 {
                return Err(Error::InvalidArgument("categorical posterior needs >= 2 skills".into()));
            }
        }
        let mut sizes = vec![feature_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(output.width());
        let mut net = Mlp::new(&sizes, Activation::Swish, rng)?;
        let spectral_iters = 0;
        if spectral_norm {
            net.enable_spectral_norm(50);
        }
        Ok(PosteriorHead::Learned(LearnedHead {
            net,
            output,
            optimizer: Adam::new(AdamConfig::default()),
            spectral_iters,
        }))
    }

    pub fn is_learned(&self) -> bool {
        matches!(self, PosteriorHead::Learned(_))
    }

    pub fn spectral_norm(&self) -> bool {
        match self {
            PosteriorHead::Learned(h) => h.net.spectral_norm_enabled(),
            PosteriorHead::Fixed { .. } => false,
        }
    }

    /// `log q(z | o)` for every row.
    pub fn log_q_batch(&self, features: ArrayView2<f64>, skills: &[Skill]) -> Result<Vec<f64>> {
        if features.nrows() != skills.len() {
            return Err(Error::dims(features.nrows(), skills.len(), "posterior batch"));
        }
        match self {
            PosteriorHead::Fixed { sigma } => {
                let d = features.ncols();
                let norm = 0.5 * d as f64 * (LN_2PI + 2.0 * sigma.ln());
                let inv = 1.0 / (2.0 * sigma * sigma);
                features
                    .rows()
                    .into_iter()
                    .zip(skills)
                    .map(|(o, z)| {
                        let z = continuous(z, d)?;
                        let sq: f64 = o.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
                        Ok(-sq * inv - norm)
                    })
                    .collect()
            }
            PosteriorHead::Learned(h) => {
                let out = h.net.forward_batch(features)?;
                out.rows()
                    .into_iter()
                    .zip(skills)
                    .map(|(row, z)| h.output.log_q(row.as_slice().unwrap(), z))
                    .collect()
            }
        }
    }

    pub fn log_q(&self, features: &[f64], z: &Skill) -> Result<f64> {
        let view = ArrayView2::from_shape((1, features.len()), features).expect("contiguous");
        Ok(self.log_q_batch(view, std::slice::from_ref(z))?[0])
    }

    /// Deterministic read of the posterior: the goal itself for a fixed
    /// head, the mean for a Gaussian head, the argmax for a categorical one.
    pub fn infer(&self, features: &[f64]) -> Result<Skill> {
        match self {
            PosteriorHead::Fixed { .. } => Ok(Skill::Continuous(features.to_vec())),
            PosteriorHead::Learned(h) => {
                let out = h.net.forward(features)?;
                Ok(match h.output {
                    HeadOutput::Gaussian { .. } => Skill::Continuous(out),
                    HeadOutput::Categorical { .. } => {
                        let mut best = 0;
                        for (i, v) in out.iter().enumerate() {
                            if *v > out[best] {
                                best = i;
                            }
                        }
                        Skill::Discrete(best)
                    }
                })
            }
        }
    }

    /// Negative mean log-likelihood of `skills` given `features`.
    pub fn loss(&self, features: ArrayView2<f64>, skills: &[Skill]) -> Result<f64> {
        let lq = self.log_q_batch(features, skills)?;
        Ok(-lq.iter().sum::<f64>() / lq.len().max(1) as f64)
    }

    pub fn save(&self, prefix: &str, archive: &mut TensorArchive) -> Result<()> {
        match self {
            PosteriorHead::Fixed { sigma } => {
                archive.meta.insert(format!("{prefix}.sigma"), serde_json::json!(sigma));
            }
            PosteriorHead::Learned(h) => {
                archive.put_mlp(prefix, &h.net);
                archive
                    .meta
                    .insert(format!("{prefix}.output"), serde_json::to_value(h.output)?);
            }
        }
        Ok(())
    }

    pub fn load(prefix: &str, archive: &TensorArchive) -> Result<Self> {
        if let Some(s) = archive.meta.get(&format!("{prefix}.sigma")) {
            let sigma = s
                .as_f64()
                .ok_or_else(|| Error::InvalidArgument(format!("{prefix}.sigma is not a number")))?;
            return PosteriorHead::fixed(sigma);
        }
        let output: HeadOutput = serde_json::from_value(
            archive
                .meta
                .get(&format!("{prefix}.output"))
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("checkpoint has no posterior `{prefix}`")))?,
        )?;
        let net = archive.get_mlp(prefix)?;
        if net.output_dim() != output.width() {
            return Err(Error::dims(output.width(), net.output_dim(), "posterior output"));
        }
        Ok(PosteriorHead::Learned(LearnedHead {
            net,
            output,
            optimizer: Adam::new(AdamConfig::default()),
            spectral_iters: 0,
        }))
    }
}

fn continuous(z: &Skill, dim: usize) -> Result<&[f64]> {
    match z {
        Skill::Continuous(v) if v.len() == dim => Ok(v),
        Skill::Continuous(v) => Err(Error::dims(dim, v.len(), "skill vs posterior output")),
        other => Err(Error::InvalidArgument(format!(
            "expected a continuous skill, got {other:?}"
        ))),
    }
}

impl HeadOutput {
    fn log_q(&self, out: &[f64], z: &Skill) -> Result<f64> {
        match *self {
            HeadOutput::Categorical { num_skills } => {
                let k = match z {
                    Skill::Discrete(k) if *k < num_skills => *k,
                    Skill::Discrete(k) => {
                        return Err(Error::IndexOutOfRange {
                            index: *k,
                            len: num_skills,
                        })
                    }
                    other => {
                        return Err(Error::InvalidArgument(format!(
                            "expected a discrete skill, got {other:?}"
                        )))
                    }
                };
                Ok(out[k] - log_sum_exp(out))
            }
            HeadOutput::Gaussian { dim } => {
                let z = continuous(z, dim)?;
                let sq: f64 = out.iter().zip(z).map(|(m, v)| (m - v) * (m - v)).sum();
                Ok(-0.5 * sq - 0.5 * dim as f64 * LN_2PI)
            }
        }
    }

    /// d(-log q)/d(out)
    fn nll_grad(&self, out: &[f64], z: &Skill, into: &mut [f64]) {
        match (*self, z) {
            (HeadOutput::Categorical { .. }, Skill::Discrete(k)) => {
                let lse = log_sum_exp(out);
                for (i, (g, o)) in into.iter_mut().zip(out).enumerate() {
                    *g = (o - lse).exp() - if i == *k { 1.0 } else { 0.0 };
                }
            }
            (HeadOutput::Gaussian { .. }, Skill::Continuous(v)) => {
                for ((g, m), zi) in into.iter_mut().zip(out).zip(v) {
                    *g = m - zi;
                }
            }
            _ => unreachable!("skills are checked by log_q first"),
        }
    }
}

pub fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// One Adam step on `-mean log q(z | o)`; returns the loss before the step.
/// With spectral normalization on, the power iteration is advanced after
/// the step so every layer stays normalized.
pub fn train_posterior(head: &mut PosteriorHead, features: ArrayView2<f64>, skills: &[Skill], lr: f64) -> Result<f64> {
    let h = match head {
        PosteriorHead::Learned(h) => h,
        PosteriorHead::Fixed { .. } => {
            return Err(Error::InvalidArgument("a fixed posterior has nothing to train".into()));
        }
    };
    let b = features.nrows();
    if b == 0 || skills.len() != b {
        return Err(Error::dims(b.max(1), skills.len(), "posterior training batch"));
    }
    let (out, cache) = h.net.forward_cached(features)?;
    let mut upstream = Array2::zeros(out.raw_dim());
    let mut loss = 0.0;
    for ((row, z), mut g) in out.axis_iter(Axis(0)).zip(skills).zip(upstream.axis_iter_mut(Axis(0))) {
        let row = row.as_slice().expect("standard layout");
        loss -= h.output.log_q(row, z)?;
        h.output.nll_grad(row, z, g.as_slice_mut().expect("standard layout"));
    }
    let inv_b = 1.0 / b as f64;
    upstream *= inv_b;
    loss *= inv_b;
    if !loss.is_finite() {
        return Err(Error::NonFinite("posterior loss".into()));
    }
    let (grads, _) = h.net.backward(&cache, upstream.view())?;
    h.optimizer.config.lr = lr;
    h.optimizer.step(&mut h.net.params_mut(), &grads.slices())?;
    match h.spectral_iters {
        0 => h.net.refresh_spectral_exact(),
        n => h.net.refresh_spectral(n),
    }
    Ok(loss)
}
