//! Reward-free behavior engineering for small 2D continuous-control worlds.
//!
//! * [`envcore`] composes point-mass environments from JSON descriptors.
//! * [`neural`] is a small MLP stack with manual backprop, Adam and spectral
//!   normalization.
//! * [`ppo`] is the clipped-surrogate optimizer every reward family shares.
//! * [`mimax`] synthesizes skill-discovery rewards (GCRL, DIAYN, cDIAYN).
//! * [`dmin`] synthesizes distribution-matching rewards (GAIL, AIRL, MLE).
//! * [`metrics`] holds the stationary evaluation metrics.
//! * [`experiment`] wires everything into config-driven runs and sweeps.

pub mod dmin;
pub mod envcore;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod mimax;
pub mod neural;
pub mod ppo;

pub use error::{Error, Result};
