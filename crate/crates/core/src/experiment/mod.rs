//! Config-driven training runs, sweeps and evaluation.

mod config;
mod run;
mod trainer;

pub use config::{
    parse_assignment, parse_override, read_config_value, set_dotted, ExperimentConfig, Family, SweepSpec, TaskConfig,
};
pub use run::{
    dump_trajectories, eval_checkpoint, eval_trajectories, read_metrics, run, run_seed, sweep, write_summary, Observer,
    Quiet, SeedRun, VariantResult, SUMMARY_METRICS,
};
pub use trainer::{BatchStats, Learner, Trainer};
