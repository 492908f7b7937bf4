//! Compositional 2D continuous-control environments.

mod descriptor;
mod env;
mod features;

pub use descriptor::{
    edge_key, ComponentDesc, EdgeDesc, EnvDescriptor, GlobalDesc, NamedList, ObserverDesc, RewardFnDesc, StateComponent,
};
pub use env::{
    compose, reward_root_dist, reward_root_goal, ComponentKind, EnvState, Environment, Layout, LayoutEntry, Physics,
    StepResult,
};
pub use features::FeatureExtractor;
