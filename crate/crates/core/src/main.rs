use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use skillkit::experiment::{
    dump_trajectories, eval_checkpoint, eval_trajectories, parse_assignment, run, sweep, BatchStats, ExperimentConfig,
    Observer, SweepSpec,
};
use skillkit::metrics::MetricReport;

#[derive(Parser)]
#[command(
    name = "skillkit",
    version,
    about = "Train, sweep and evaluate reward-free behaviors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of a config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dotted-key override, e.g. `--set ppo.lr=1e-3`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run the Cartesian product of a sweep spec and write summary.csv.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// Replaces the spec's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override applied to the base config.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Evaluate a checkpoint, or a trajectory file without simulating.
    Eval {
        #[arg(long, required_unless_present = "trajectories")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, conflicts_with = "checkpoint")]
        trajectories: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Write deterministic episodes of a checkpointed policy to CSV.
    DumpTraj {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Episodes per evaluation intent.
        #[arg(long, default_value_t = 8)]
        episodes: usize,
        /// Defaults to trajectories.csv next to the checkpoint.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Progress;

impl Observer for Progress {
    fn batch(&mut self, seed: u64, s: &BatchStats) {
        if let Some(score) = s.episode_score {
            eprintln!("seed {seed} step {:>8} score {score:>10.3} kl {:.4}", s.step, s.kl);
        }
    }

    fn eval(&mut self, seed: u64, r: &MetricReport) {
        let parts: Vec<String> = r.metrics.iter().map(|(k, v)| format!("{k}={:.4}", v.value)).collect();
        eprintln!("seed {seed} eval @{}: {}", r.step, parts.join(" "));
    }
}

fn overrides(set: &[String]) -> skillkit::Result<Vec<(String, String)>> {
    set.iter().map(|s| parse_assignment(s)).collect()
}

fn main_inner(cli: Cli) -> skillkit::Result<()> {
    match cli.command {
        Command::Train { config, seed, out, set } => {
            let mut cfg = ExperimentConfig::load(&config, &overrides(&set)?)?;
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            for r in run(&cfg, out.as_deref(), &mut Progress)? {
                println!("{}", r.dir.display());
            }
        }
        Command::Sweep { spec, out, set } => {
            let mut spec = SweepSpec::load(&spec, &overrides(&set)?)?;
            if let Some(o) = out {
                spec.output_dir = o;
            }
            let results = sweep(&spec, &mut Progress)?;
            for r in results.iter().filter_map(|r| r.outcome.as_ref().err()) {
                eprintln!("variant failed: {r}");
            }
            println!("{}", spec.output_dir.join("summary.csv").display());
        }
        Command::Eval {
            checkpoint,
            config,
            trajectories,
            set,
        } => {
            let cfg = ExperimentConfig::load(&config, &overrides(&set)?)?;
            let report = match (checkpoint, trajectories) {
                (_, Some(t)) => eval_trajectories(t, &cfg)?,
                (Some(c), None) => eval_checkpoint(c, &cfg)?,
                (None, None) => unreachable!("clap requires one of them"),
            };
            println!("{}", report.to_json_line()?);
        }
        Command::DumpTraj {
            checkpoint,
            episodes,
            out,
        } => {
            let out = out.unwrap_or_else(|| checkpoint.with_file_name("trajectories.csv"));
            let n = dump_trajectories(&checkpoint, episodes, &out)?;
            println!("{n} episodes -> {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
