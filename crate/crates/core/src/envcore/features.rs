use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Projection `o(s)` of an observation onto the dimensions of interest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureExtractor {
    obs_indices: Vec<usize>,
}

impl FeatureExtractor {
    pub fn new(obs_indices: Vec<usize>) -> Result<Self> {
        if obs_indices.is_empty() {
            return Err(Error::InvalidArgument("obs_indices must not be empty".into()));
        }
        Ok(FeatureExtractor { obs_indices })
    }

    /// Every index of an `obs_dim`-vector.
    pub fn identity(obs_dim: usize) -> Result<Self> {
        Self::new((0..obs_dim).collect())
    }

    /// Checks every index against an observation length.
    pub fn validate(&self, obs_dim: usize) -> Result<()> {
        match self.obs_indices.iter().find(|&&i| i >= obs_dim) {
            Some(&index) => Err(Error::IndexOutOfRange { index, len: obs_dim }),
            None => Ok(()),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.obs_indices
    }

    pub fn dim(&self) -> usize {
        self.obs_indices.len()
    }

    pub fn extract(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.validate(obs.len())?;
        Ok(self.obs_indices.iter().map(|&i| obs[i]).collect())
    }

    /// Row-wise [`extract`](Self::extract) over a batch of observations.
    pub fn extract_rows(&self, obs: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.validate(obs.ncols())?;
        Ok(obs.select(ndarray::Axis(1), &self.obs_indices))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_passthrough() {
        let fx = FeatureExtractor::identity(4).unwrap();
        assert_eq!(fx.extract(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn selects_in_order() {
        let fx = FeatureExtractor::new(vec![2, 3]).unwrap();
        assert_eq!(fx.extract(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        let fx = FeatureExtractor::new(vec![3, 0]).unwrap();
        assert_eq!(fx.extract(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![4.0, 1.0]);
        assert_eq!(fx.dim(), 2);
    }

    #[test]
    fn empty_and_out_of_range_rejected() {
        assert!(FeatureExtractor::new(vec![]).is_err());
        let fx = FeatureExtractor::new(vec![4]).unwrap();
        assert!(matches!(
            fx.extract(&[0.0; 4]),
            Err(Error::IndexOutOfRange { index: 4, len: 4 })
        ));
    }

    #[test]
    fn batch_extract() {
        let fx = FeatureExtractor::new(vec![1]).unwrap();
        let out = fx.extract_rows(array![[1.0, 2.0], [3.0, 4.0]].view()).unwrap();
        assert_eq!(out, array![[2.0], [4.0]]);
    }
}
