use std::io::Write;
use std::path::Path;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::histogram::{histogram_entropy, HistogramSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    /// `max(0, H(o) - mean_n H(o | z_n))`, nats.
    pub mi: f64,
    pub h_marginal: f64,
    /// Mean of the per-intent conditional entropies.
    pub h_conditional: f64,
    /// Excluded fraction of the pooled samples.
    pub excluded_fraction: f64,
}

/// Particle MI from one feature matrix per intent.
pub fn particle_mi_from_groups(groups: &[ArrayView2<f64>], spec: &HistogramSpec) -> Result<MiEstimate> {
    if groups.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "particle MI needs >= 2 intents, got {}",
            groups.len()
        )));
    }
    let mut h_cond = 0.0;
    for g in groups {
        h_cond += histogram_entropy(*g, spec)?.entropy;
    }
    h_cond /= groups.len() as f64;
    let pooled =
        concatenate(Axis(0), groups).map_err(|_| Error::InvalidArgument("intent groups differ in width".into()))?;
    let marginal = histogram_entropy(pooled.view(), spec)?;
    Ok(MiEstimate {
        mi: (marginal.entropy - h_cond).max(0.0),
        h_marginal: marginal.entropy,
        h_conditional: h_cond,
        excluded_fraction: marginal.excluded_fraction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimMi {
    pub dim: usize,
    pub mi: f64,
    pub h: f64,
    pub h_cond: f64,
}

/// Independent 1D particle MI for each listed column of the shared groups.
pub fn mi_per_dimension_from_groups(
    groups: &[ArrayView2<f64>],
    dims: &[usize],
    bins: usize,
    range: (f64, f64),
) -> Result<Vec<DimMi>> {
    let spec = HistogramSpec::uniform(bins, range, 1)?;
    let width = groups.first().map(|g| g.ncols()).unwrap_or(0);
    dims.iter()
        .map(|&d| {
            if d >= width {
                return Err(Error::IndexOutOfRange { index: d, len: width });
            }
            let cols: Vec<Array2<f64>> = groups.iter().map(|g| g.select(Axis(1), &[d])).collect();
            let views: Vec<ArrayView2<f64>> = cols.iter().map(|c| c.view()).collect();
            let est = particle_mi_from_groups(&views, &spec)?;
            Ok(DimMi {
                dim: d,
                mi: est.mi,
                h: est.h_marginal,
                h_cond: est.h_conditional,
            })
        })
        .collect()
}

/// `dim,MI,H,H_cond` rows.
pub fn write_per_dimension_csv(path: impl AsRef<Path>, rows: &[DimMi]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["dim", "MI", "H", "H_cond"])?;
    for r in rows {
        w.write_record([
            r.dim.to_string(),
            format!("{:?}", r.mi),
            format!("{:?}", r.h),
            format!("{:?}", r.h_cond),
        ])?;
    }
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))?;
    Ok(())
}
