use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regular grid of `bins` cells per dimension over `ranges`.
///
/// Cells are half-open `[lo, hi)` except the last along each axis, which
/// also contains its upper edge. Samples outside a range are excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub bins: usize,
    pub ranges: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    /// Nats, over the included samples.
    pub entropy: f64,
    pub excluded_fraction: f64,
    pub included: usize,
}

impl HistogramSpec {
    pub fn new(bins: usize, ranges: Vec<(f64, f64)>) -> Result<Self> {
        let spec = HistogramSpec { bins, ranges };
        spec.validate()?;
        Ok(spec)
    }

    /// The same `(lo, hi)` range on each of `dims` axes.
    pub fn uniform(bins: usize, range: (f64, f64), dims: usize) -> Result<Self> {
        Self::new(bins, vec![range; dims])
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::InvalidArgument(format!(
                "histogram needs >= 2 bins, got {}",
                self.bins
            )));
        }
        if self.ranges.is_empty() {
            return Err(Error::InvalidArgument("histogram needs at least one dimension".into()));
        }
        for (i, (a, b)) in self.ranges.iter().enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::InvalidArgument(format!(
                    "histogram range {i} must satisfy a < b, got ({a}, {b})"
                )));
            }
        }
        if (self.bins as u64).checked_pow(self.ranges.len() as u32).is_none() {
            return Err(Error::InvalidArgument("histogram grid is too large".into()));
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.ranges.len()
    }

    /// Upper bound on the entropy: `dims * ln(bins)`.
    pub fn max_entropy(&self) -> f64 {
        self.dims() as f64 * (self.bins as f64).ln()
    }

    /// Bin of `x` along one axis, or `None` when out of range.
    pub fn bin_1d(&self, axis: usize, x: f64) -> Option<usize> {
        let (a, b) = self.ranges[axis];
        if !(x >= a && x <= b) {
            return None;
        }
        let k = ((x - a) / (b - a) * self.bins as f64).floor() as usize;
        Some(k.min(self.bins - 1))
    }

    /// Row-major cell index of a sample, or `None` when out of range.
    pub fn cell(&self, sample: &[f64]) -> Option<u64> {
        let mut idx = 0u64;
        for (axis, &x) in sample.iter().enumerate() {
            idx = idx * self.bins as u64 + self.bin_1d(axis, x)? as u64;
        }
        Some(idx)
    }
}

/// Plug-in entropy of the histogram of `samples` (one per row).
pub fn histogram_entropy(samples: ArrayView2<f64>, spec: &HistogramSpec) -> Result<EntropyEstimate> {
    spec.validate()?;
    if samples.nrows() == 0 {
        return Err(Error::InvalidArgument(
            "histogram_entropy needs at least one sample".into(),
        ));
    }
    if samples.ncols() != spec.dims() {
        return Err(Error::dims(spec.dims(), samples.ncols(), "histogram samples"));
    }
    let mut cells: Vec<u64> = samples
        .rows()
        .into_iter()
        .filter_map(|r| spec.cell(&r.to_vec()))
        .collect();
    let n = cells.len();
    if n == 0 {
        return Err(Error::AllSamplesExcluded);
    }
    cells.sort_unstable();
    // H = ln n - (1/n) sum_c c ln c
    let mut sum_clnc = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && cells[j] == cells[i] {
            j += 1;
        }
        let c = (j - i) as f64;
        sum_clnc += c * c.ln();
        i = j;
    }
    let nf = n as f64;
    let entropy = (nf.ln() - sum_clnc / nf).max(0.0);
    Ok(EntropyEstimate {
        entropy,
        excluded_fraction: (samples.nrows() - n) as f64 / samples.nrows() as f64,
        included: n,
    })
}
