use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mimax::log_sum_exp;

/// Which root state of the first component the target lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetSpace {
    Pos,
    Vel,
}

/// Mixture of isotropic Gaussians sharing one standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TargetSpec", into = "TargetSpec")]
pub struct TargetDistribution {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    std: f64,
    space: TargetSpace,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetSpec {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    std: f64,
    #[serde(default = "default_space")]
    space: TargetSpace,
}

fn default_space() -> TargetSpace {
    TargetSpace::Pos
}

impl TryFrom<TargetSpec> for TargetDistribution {
    type Error = Error;

    fn try_from(s: TargetSpec) -> Result<Self> {
        TargetDistribution::new(s.weights, s.means, s.std, s.space)
    }
}

impl From<TargetDistribution> for TargetSpec {
    fn from(t: TargetDistribution) -> Self {
        TargetSpec {
            weights: t.weights,
            means: t.means,
            std: t.std,
            space: t.space,
        }
    }
}

const LN_2PI: f64 = 1.837_877_066_409_345_3;

impl TargetDistribution {
    /// Weights are normalized to sum to one.
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, std: f64, space: TargetSpace) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::InvalidArgument("target needs at least one component".into()));
        }
        if weights.len() != means.len() {
            return Err(Error::dims(means.len(), weights.len(), "target weights"));
        }
        let dim = means[0].len();
        if dim == 0 || means.iter().any(|m| m.len() != dim) {
            return Err(Error::InvalidArgument(
                "target means must share one non-zero dimension".into(),
            ));
        }
        if means.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("target means".into()));
        }
        if !(std > 0.0) || !std.is_finite() {
            return Err(Error::InvalidArgument(format!("target std must be > 0, got {std}")));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || !(total > 0.0) {
            return Err(Error::InvalidArgument(
                "target weights must be non-negative with a positive sum".into(),
            ));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(TargetDistribution {
            weights,
            means,
            std,
            space,
        })
    }

    /// Two equal-weight modes at `(±2, 0)` in position space, or `(±1.5, 0)`
    /// in velocity space, with std 0.5.
    pub fn bimodal(space: TargetSpace) -> Self {
        let a = match space {
            TargetSpace::Pos => 2.0,
            TargetSpace::Vel => 1.5,
        };
        TargetDistribution::new(vec![0.5, 0.5], vec![vec![-a, 0.0], vec![a, 0.0]], 0.5, space).expect("valid")
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn std(&self) -> f64 {
        self.std
    }

    pub fn space(&self) -> TargetSpace {
        self.space
    }

    /// `n` i.i.d. draws, one per row.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Array2<f64>> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample count must be >= 1".into()));
        }
        let pick = WeightedIndex::new(&self.weights).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let d = self.dim();
        let mut out = Array2::zeros((n, d));
        for mut row in out.rows_mut() {
            let k = pick.sample(rng);
            for (x, m) in row.iter_mut().zip(&self.means[k]) {
                let e: f64 = rng.sample(StandardNormal);
                *x = m + self.std * e;
            }
        }
        Ok(out)
    }

    /// `log sum_k w_k N(x; mu_k, std^2 I)`, evaluated with log-sum-exp.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::dims(self.dim(), x.len(), "target density input"));
        }
        let d = self.dim() as f64;
        let norm = -0.5 * d * (LN_2PI + 2.0 * self.std.ln());
        let inv = 1.0 / (2.0 * self.std * self.std);
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.means)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, m)| {
                let sq: f64 = x.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum();
                w.ln() + norm - sq * inv
            })
            .collect();
        Ok(log_sum_exp(&terms))
    }

    /// Smallest log-density on a `steps`-per-axis grid over `[-half_width,
    /// half_width]^d` (only for `d <= 3`).
    pub fn min_log_density_on_grid(&self, half_width: f64, steps: usize) -> Result<f64> {
        let d = self.dim();
        if d > 3 || steps < 2 {
            return Err(Error::InvalidArgument(
                "grid search needs dim <= 3 and >= 2 steps".into(),
            ));
        }
        let axis: Vec<f64> = (0..steps)
            .map(|i| -half_width + 2.0 * half_width * i as f64 / (steps - 1) as f64)
            .collect();
        let mut best = f64::INFINITY;
        let mut idx = vec![0usize; d];
        let mut x = vec![0.0; d];
        loop {
            for (xi, &i) in x.iter_mut().zip(&idx) {
                *xi = axis[i];
            }
            best = best.min(self.log_density(&x)?);
            let mut k = 0;
            while k < d {
                idx[k] += 1;
                if idx[k] < steps {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == d {
                return Ok(best);
            }
        }
    }
}

/// Writes samples in the trajectory CSV layout (`episode,t,z,obs_0..`) so
/// the metrics tools can read them as a single episode.
pub fn write_samples_csv(path: impl AsRef<Path>, samples: &Array2<f64>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut header = vec!["episode".to_string(), "t".into(), "z".into()];
    header.extend((0..samples.ncols()).map(|i| format!("obs_{i}")));
    w.write_record(&header)?;
    for (t, row) in samples.rows().into_iter().enumerate() {
        let mut rec = vec!["0".to_string(), t.to_string(), String::new()];
        rec.extend(row.iter().map(|x| format!("{x:?}")));
        w.write_record(&rec)?;
    }
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))?;
    Ok(())
}
