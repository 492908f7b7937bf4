//! Small differentiable function stack.

mod adam;
mod checkpoint;
mod mlp;
mod spectral;

pub use adam::{adam_step, Adam, AdamConfig, AdamState};
pub use checkpoint::{Manifest, TensorArchive, TensorEntry};
pub use mlp::{Activation, Dense, ForwardCache, Mlp, MlpGrads};
pub use spectral::{power_iteration, spectral_norm_estimate, spectral_normalize, top_singular_triplet};
