use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::neural::{Activation, Adam, AdamConfig, Mlp, MlpGrads, TensorArchive};

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Logit network separating target samples (label 1) from policy samples
/// (label 0).
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDiscriminator {
    pub net: Mlp,
    pub gradient_penalty_weight: f64,
    pub optimizer: Adam,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DiscriminatorLoss {
    /// `mean_target softplus(-l) + mean_policy softplus(l)`
    pub cross_entropy: f64,
    /// Weighted gradient penalty (0 when the weight is 0).
    pub penalty: f64,
    pub total: f64,
}

/// Step along `grad_x l` used for the penalty's parameter gradient.
const PENALTY_FD_STEP: f64 = 1e-4;

impl BinaryDiscriminator {
    pub fn new<R: Rng + ?Sized>(
        feature_dim: usize,
        hidden: &[usize],
        gradient_penalty_weight: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(gradient_penalty_weight >= 0.0) || !gradient_penalty_weight.is_finite() {
            return Err(Error::InvalidArgument(
                "gradient_penalty_weight must be finite and >= 0".into(),
            ));
        }
        let mut sizes = vec![feature_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Ok(BinaryDiscriminator {
            net: Mlp::new(&sizes, Activation::Swish, rng)?,
            gradient_penalty_weight,
            optimizer: Adam::new(AdamConfig::default()),
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Raw (unclamped) logits, one per row.
    pub fn logits(&self, features: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok(self.net.forward_batch(features)?.into_raw_vec_and_offset().0)
    }

    pub fn logit(&self, features: &[f64]) -> Result<f64> {
        Ok(self.net.forward(features)?[0])
    }

    /// Mixes row `i` of `policy` and `target` with coefficient `alphas[i]`
    /// (1 = target); uses the first `alphas.len()` rows of each.
    pub fn interpolates(policy: ArrayView2<f64>, target: ArrayView2<f64>, alphas: &[f64]) -> Array2<f64> {
        let mut out = Array2::zeros((alphas.len(), policy.ncols()));
        for (i, mut row) in out.rows_mut().into_iter().enumerate() {
            let a = alphas[i];
            for ((x, p), t) in row.iter_mut().zip(policy.row(i)).zip(target.row(i)) {
                *x = a * t + (1.0 - a) * p;
            }
        }
        out
    }

    /// `mean ||grad_x l(x)||^2` over the rows of `points`.
    pub fn gradient_penalty(&self, points: ArrayView2<f64>) -> Result<f64> {
        if points.nrows() == 0 {
            return Ok(0.0);
        }
        let (_, cache) = self.net.forward_cached(points)?;
        let ones = Array2::ones((points.nrows(), 1));
        let (_, g) = self.net.backward(&cache, ones.view())?;
        Ok(g.iter().map(|x| x * x).sum::<f64>() / points.nrows() as f64)
    }

    /// Loss and parameter gradients. `alphas` selects the penalty
    /// interpolates and is ignored when the penalty weight is 0.
    pub fn loss_and_grad(
        &self,
        policy: ArrayView2<f64>,
        target: ArrayView2<f64>,
        alphas: &[f64],
    ) -> Result<(DiscriminatorLoss, MlpGrads)> {
        let (np, nt) = (policy.nrows(), target.nrows());
        if np == 0 || nt == 0 {
            return Err(Error::InvalidArgument("discriminator batches must be non-empty".into()));
        }
        let d = self.feature_dim();
        if policy.ncols() != d || target.ncols() != d {
            return Err(Error::dims(
                d,
                if policy.ncols() != d {
                    policy.ncols()
                } else {
                    target.ncols()
                },
                "discriminator input",
            ));
        }
        let both = concatenate(Axis(0), &[target.view(), policy.view()]).expect("same width");
        let (out, cache) = self.net.forward_cached(both.view())?;
        let mut upstream = Array2::zeros((nt + np, 1));
        let (mut ce_t, mut ce_p) = (0.0, 0.0);
        for i in 0..nt {
            let l = out[[i, 0]];
            ce_t += softplus(-l);
            upstream[[i, 0]] = -sigmoid(-l) / nt as f64;
        }
        for i in 0..np {
            let l = out[[nt + i, 0]];
            ce_p += softplus(l);
            upstream[[nt + i, 0]] = sigmoid(l) / np as f64;
        }
        let cross_entropy = ce_t / nt as f64 + ce_p / np as f64;
        let (mut grads, _) = self.net.backward(&cache, upstream.view())?;

        let mut penalty = 0.0;
        let w = self.gradient_penalty_weight;
        if w > 0.0 {
            let m = alphas.len().min(np).min(nt);
            if m == 0 {
                return Err(Error::InvalidArgument(
                    "gradient penalty needs mixing coefficients".into(),
                ));
            }
            let xs = Self::interpolates(policy, target, &alphas[..m]);
            let (_, pc) = self.net.forward_cached(xs.view())?;
            let ones = Array2::ones((m, 1));
            let (_, g) = self.net.backward(&pc, ones.view())?;
            penalty = w * g.iter().map(|x| x * x).sum::<f64>() / m as f64;
            // d/dtheta ||g||^2 = 2 d/dtheta [g . grad_x l] with g held fixed, and
            // g . grad_x l(x) is the directional derivative of l along g,
            // taken here by central differences.
            let mut shifted = Array2::zeros((2 * m, d));
            let mut up = Array2::zeros((2 * m, 1));
            for i in 0..m {
                let gi = g.row(i);
                let norm = gi.dot(&gi).sqrt();
                if norm == 0.0 {
                    continue;
                }
                let h = PENALTY_FD_STEP / norm;
                let coef = 2.0 * w / m as f64 / (2.0 * h);
                for j in 0..d {
                    shifted[[i, j]] = xs[[i, j]] + h * gi[j];
                    shifted[[m + i, j]] = xs[[i, j]] - h * gi[j];
                }
                up[[i, 0]] = coef;
                up[[m + i, 0]] = -coef;
            }
            let (_, sc) = self.net.forward_cached(shifted.view())?;
            let (pg, _) = self.net.backward(&sc, up.view())?;
            grads.add_assign(&pg);
        }
        let total = cross_entropy + penalty;
        if !total.is_finite() {
            return Err(Error::NonFinite(format!(
                "discriminator loss (cross-entropy {cross_entropy}, penalty {penalty})"
            )));
        }
        Ok((
            DiscriminatorLoss {
                cross_entropy,
                penalty,
                total,
            },
            grads,
        ))
    }

    pub fn save(&self, prefix: &str, archive: &mut TensorArchive) {
        archive.put_mlp(prefix, &self.net);
        archive.meta.insert(
            format!("{prefix}.gradient_penalty_weight"),
            serde_json::json!(self.gradient_penalty_weight),
        );
    }

    pub fn load(prefix: &str, archive: &TensorArchive) -> Result<Self> {
        let net = archive.get_mlp(prefix)?;
        if net.output_dim() != 1 {
            return Err(Error::dims(1, net.output_dim(), "discriminator output"));
        }
        let w = archive
            .meta
            .get(&format!("{prefix}.gradient_penalty_weight"))
            .and_then(|v| v.as_f64())
            .unwrap_or(0.0);
        Ok(BinaryDiscriminator {
            net,
            gradient_penalty_weight: w,
            optimizer: Adam::new(AdamConfig::default()),
        })
    }
}

/// One Adam step on the discriminator loss; returns the loss before the step.
pub fn train_discriminator<R: Rng + ?Sized>(
    disc: &mut BinaryDiscriminator,
    policy: ArrayView2<f64>,
    target: ArrayView2<f64>,
    lr: f64,
    rng: &mut R,
) -> Result<DiscriminatorLoss> {
    let alphas: Vec<f64> = if disc.gradient_penalty_weight > 0.0 {
        (0..policy.nrows().min(target.nrows()))
            .map(|_| rng.gen::<f64>())
            .collect()
    } else {
        Vec::new()
    };
    let (loss, grads) = disc.loss_and_grad(policy, target, &alphas)?;
    disc.optimizer.config.lr = lr;
    disc.optimizer.step(&mut disc.net.params_mut(), &grads.slices())?;
    Ok(loss)
}
