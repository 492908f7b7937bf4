//! Stationary evaluation metrics: histogram entropies and particle mutual
//! information, energy distance, and latent goal reaching.

mod energy;
mod histogram;
mod mi;
mod report;
mod rollouts;
mod trajectory;

pub use energy::energy_distance;
pub use histogram::{histogram_entropy, EntropyEstimate, HistogramSpec};
pub use mi::{mi_per_dimension_from_groups, particle_mi_from_groups, write_per_dimension_csv, DimMi, MiEstimate};
pub use report::{
    cap_rows, evaluate_all, evaluate_episodes, mean_std, EvalFamily, EvalSettings, MetricReport, MetricValue,
    EPISODE_REWARD, EPISODE_SCORE, EXCLUDED_FRACTION, H_CONDITIONAL, H_MARGINAL, MI, NEG_ENERGY_DISTANCE, NEG_LGR,
};
pub use rollouts::{
    collect_episodes, eval_intents, final_goal_distances, group_features, lgr, lgr_terms, mi_per_dimension,
    particle_mi, run_episode, sample_goals, Controller, Episode, FnController, PdController, PolicyController,
    RolloutPlan,
};
pub use trajectory::{group_by_skill, read_trajectories, write_trajectories};
