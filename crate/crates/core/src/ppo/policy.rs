//! Gaussian policy and state-value networks.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::neural::{Activation, Mlp, TensorArchive};

const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_7;

/// `pi(a|s) = N(mu_theta(s), diag(exp(log_std))^2)`; actions are sampled and
/// then clipped to `[-1, 1]` before reaching the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub mean: Mlp,
    pub log_std: Array1<f64>,
}

impl GaussianPolicy {
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        init_log_std: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(action_dim);
        let mut mean = Mlp::new(&sizes, Activation::Swish, rng)?;
        mean.scale_output_layer(0.01);
        Ok(GaussianPolicy {
            mean,
            log_std: Array1::from_elem(action_dim, init_log_std),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.mean.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn means(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.mean.forward_batch(inputs)
    }

    /// Log-density of `action` under `N(mean, exp(log_std)^2)`.
    pub fn log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
        mean.iter()
            .zip(log_std)
            .zip(action)
            .map(|((m, ls), a)| {
                let z = (a - m) * (-ls).exp();
                -0.5 * z * z - ls - HALF_LOG_2PI
            })
            .sum()
    }

    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| ls + 0.5 + HALF_LOG_2PI).sum()
    }

    /// Samples one action per input row; returns raw (unclipped) actions and
    /// their log-probabilities.
    pub fn sample<R: Rng + ?Sized>(&self, inputs: ArrayView2<f64>, rng: &mut R) -> Result<(Array2<f64>, Vec<f64>)> {
        let means = self.means(inputs)?;
        let std: Vec<f64> = self.log_std.iter().map(|l| l.exp()).collect();
        let ls = self.log_std.as_slice().expect("contiguous");
        let mut actions = means.clone();
        let mut logp = Vec::with_capacity(means.nrows());
        for (mut row, mu) in actions.rows_mut().into_iter().zip(means.rows()) {
            for (a, s) in row.iter_mut().zip(&std) {
                let eps: f64 = rng.sample(StandardNormal);
                *a += s * eps;
            }
            logp.push(Self::log_prob(
                mu.as_slice().expect("standard layout"),
                ls,
                row.as_slice().expect("standard layout"),
            ));
        }
        Ok((actions, logp))
    }

    /// Mean action clipped to the valid range.
    pub fn act_deterministic(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .mean
            .forward(input)?
            .into_iter()
            .map(|a| a.clamp(-1.0, 1.0))
            .collect())
    }

    pub fn save(&self, prefix: &str, archive: &mut TensorArchive) {
        archive.put_mlp(&format!("{prefix}.mean"), &self.mean);
        archive.insert(
            format!("{prefix}.log_std"),
            vec![self.log_std.len()],
            self.log_std.to_vec(),
        );
    }

    pub fn load(prefix: &str, archive: &TensorArchive) -> Result<Self> {
        let mean = archive.get_mlp(&format!("{prefix}.mean"))?;
        let (_, ls) = archive.get(&format!("{prefix}.log_std"))?;
        if ls.len() != mean.output_dim() {
            return Err(crate::Error::dims(mean.output_dim(), ls.len(), "policy log_std"));
        }
        Ok(GaussianPolicy {
            mean,
            log_std: Array1::from(ls.to_vec()),
        })
    }
}

/// Scalar state-value network.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFn {
    pub net: Mlp,
}

impl ValueFn {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Ok(ValueFn {
            net: Mlp::new(&sizes, Activation::Swish, rng)?,
        })
    }

    pub fn values(&self, inputs: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok(self.net.forward_batch(inputs)?.into_raw_vec_and_offset().0)
    }
}

pub fn clip_action(a: f64) -> f64 {
    a.clamp(-1.0, 1.0)
}
