use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::config::{ExperimentConfig, Family, SweepSpec};
use super::trainer::{BatchStats, Trainer};
use crate::error::{Error, Result};
use crate::metrics::{
    evaluate_episodes, group_by_skill, read_trajectories, write_trajectories, MetricReport, EPISODE_REWARD,
    EPISODE_SCORE, H_CONDITIONAL, H_MARGINAL, MI, NEG_ENERGY_DISTANCE, NEG_LGR,
};
use crate::neural::TensorArchive;

/// Receives progress while a run trains.
pub trait Observer {
    fn batch(&mut self, _seed: u64, _stats: &BatchStats) {}
    fn eval(&mut self, _seed: u64, _report: &MetricReport) {}
}

/// Ignores everything.
pub struct Quiet;

impl Observer for Quiet {}

/// Outcome of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub dir: PathBuf,
    pub final_report: MetricReport,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_line(w: &mut impl Write, path: &Path, line: &str) -> Result<()> {
    writeln!(w, "{line}").map_err(|e| Error::io(path, e))
}

/// Trains every seed of `config` under `out` (or the configured output
/// directory), one `seed_<n>` subdirectory each.
pub fn run(config: &ExperimentConfig, out: Option<&Path>, observer: &mut dyn Observer) -> Result<Vec<SeedRun>> {
    config.validate()?;
    let root = out.map(Path::to_path_buf).unwrap_or_else(|| config.output_dir.clone());
    config
        .seeds
        .iter()
        .map(|&seed| run_seed(config, seed, &root.join(format!("seed_{seed}")), observer))
        .collect()
}

/// One seed: writes `config.resolved.json`, `stats.jsonl`, `metrics.jsonl`,
/// `checkpoint.json`/`.bin` and `trajectories.csv` into `dir`.
pub fn run_seed(config: &ExperimentConfig, seed: u64, dir: &Path, observer: &mut dyn Observer) -> Result<SeedRun> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut trainer = Trainer::new(config, seed)?;
    let resolved = dir.join("config.resolved.json");
    std::fs::write(&resolved, trainer.config().to_json_pretty()?).map_err(|e| Error::io(&resolved, e))?;

    let stats_path = dir.join("stats.jsonl");
    let metrics_path = dir.join("metrics.jsonl");
    let mut stats = create(&stats_path)?;
    let mut metrics = create(&metrics_path)?;
    let total = trainer.total_batches();
    let every = config.eval_every;
    let mut last = None;
    for b in 1..=total {
        let s = trainer.train_batch()?;
        write_line(&mut stats, &stats_path, &serde_json::to_string(&s)?)?;
        observer.batch(seed, &s);
        if b == total || (every > 0 && b % every == 0) {
            let r = trainer.evaluate()?;
            write_line(&mut metrics, &metrics_path, &r.to_json_line()?)?;
            observer.eval(seed, &r);
            last = Some(r);
        }
    }
    let final_report = match last {
        Some(r) => r,
        None => {
            let r = trainer.evaluate()?;
            write_line(&mut metrics, &metrics_path, &r.to_json_line()?)?;
            observer.eval(seed, &r);
            r
        }
    };
    stats.flush().map_err(|e| Error::io(&stats_path, e))?;
    metrics.flush().map_err(|e| Error::io(&metrics_path, e))?;
    trainer.save_checkpoint(dir.join("checkpoint.json"))?;
    let episodes: Vec<_> = trainer.episodes(config.eval.episodes)?.into_iter().flatten().collect();
    write_trajectories(dir.join("trajectories.csv"), &episodes)?;
    Ok(SeedRun {
        seed,
        dir: dir.to_path_buf(),
        final_report,
    })
}

/// Reads every report of a `metrics.jsonl` file.
pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricReport>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Evaluates a checkpoint under `config`, whose shapes it must match.
pub fn eval_checkpoint(checkpoint: impl AsRef<Path>, config: &ExperimentConfig) -> Result<MetricReport> {
    let archive = TensorArchive::load(checkpoint)?;
    // The seed the checkpoint was trained with, so the fingerprint matches its run.
    let seed = archive
        .meta
        .get("config")
        .and_then(|c| c.get("seeds"))
        .and_then(|s| s.get(0))
        .and_then(|s| s.as_u64())
        .unwrap_or(config.seeds[0]);
    let mut t = Trainer::new(config, seed)?;
    t.load_weights(&archive)?;
    t.evaluate()
}

/// Metrics from a trajectory file alone; no environment is simulated.
/// Rows are grouped by their `z` column.
pub fn eval_trajectories(path: impl AsRef<Path>, config: &ExperimentConfig) -> Result<MetricReport> {
    let env = config.environment()?;
    let (fx, target) = match config.family {
        Family::Task => (config.task_features(&env)?, None),
        Family::Mimax => (config.mimax.feature_extractor(env.obs_dim())?, None),
        Family::Dmin => (config.dmin.feature_extractor(&env)?, Some(&config.dmin.target)),
    };
    let groups = group_by_skill(read_trajectories(path)?);
    let mut report = evaluate_episodes(&groups, &fx, target, &config.eval)?;
    report.fingerprint = config.fingerprint(config.seeds[0])?;
    Ok(report)
}

/// Writes `episodes` deterministic episodes per evaluation intent of a
/// checkpointed policy.
pub fn dump_trajectories(checkpoint: impl AsRef<Path>, episodes: usize, out: impl AsRef<Path>) -> Result<usize> {
    let t = Trainer::from_checkpoint(checkpoint)?;
    let eps: Vec<_> = t.episodes(episodes)?.into_iter().flatten().collect();
    write_trajectories(out, &eps)?;
    Ok(eps.len())
}

/// Metric columns of `summary.csv`, in order.
pub const SUMMARY_METRICS: [&str; 7] = [
    EPISODE_REWARD,
    EPISODE_SCORE,
    MI,
    H_MARGINAL,
    H_CONDITIONAL,
    NEG_LGR,
    NEG_ENERGY_DISTANCE,
];

/// One variant of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantResult {
    pub assignment: Vec<(String, Value)>,
    pub dir: PathBuf,
    /// Final reports of every seed, or the error that stopped the variant.
    pub outcome: std::result::Result<Vec<MetricReport>, String>,
}

impl VariantResult {
    pub fn aggregate(&self) -> Option<MetricReport> {
        self.outcome.as_ref().ok().and_then(|r| MetricReport::aggregate(r).ok())
    }
}

/// Runs every variant serially; a failing variant is recorded and the sweep
/// moves on. Writes `summary.csv` in the sweep directory.
pub fn sweep(spec: &SweepSpec, observer: &mut dyn Observer) -> Result<Vec<VariantResult>> {
    spec.validate()?;
    std::fs::create_dir_all(&spec.output_dir).map_err(|e| Error::io(&spec.output_dir, e))?;
    let mut results = Vec::new();
    for (i, assignment) in spec.variants().into_iter().enumerate() {
        let dir = spec.output_dir.join(format!("variant_{i}"));
        let outcome = spec
            .variant_config(&assignment)
            .and_then(|c| run(&c, Some(&dir), observer))
            .map(|runs| runs.into_iter().map(|r| r.final_report).collect())
            .map_err(|e| e.to_string());
        results.push(VariantResult {
            assignment,
            dir,
            outcome,
        });
    }
    write_summary(&spec.output_dir.join("summary.csv"), spec, &results)?;
    Ok(results)
}

/// `variant, <grid keys>, status, seeds`, then `<metric>` and `<metric> std`
/// for every metric in [`SUMMARY_METRICS`].
pub fn write_summary(path: &Path, spec: &SweepSpec, results: &[VariantResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidArgument(format!("{other:?}")),
    })?;
    let mut header = vec!["variant".to_string()];
    header.extend(spec.grid.keys().cloned());
    header.push("status".into());
    header.push("seeds".into());
    for m in SUMMARY_METRICS {
        header.push(m.to_string());
        header.push(format!("{m} std"));
    }
    w.write_record(&header)?;
    for (i, r) in results.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(r.assignment.iter().map(|(_, v)| v.to_string()));
        let agg = r.aggregate();
        match &r.outcome {
            Ok(reports) => {
                row.push("ok".into());
                row.push(reports.len().to_string());
            }
            Err(e) => {
                row.push(format!("error: {e}"));
                row.push("0".into());
            }
        }
        for m in SUMMARY_METRICS {
            match agg.as_ref().and_then(|a| a.metrics.get(m)) {
                Some(v) => {
                    row.push(v.value.to_string());
                    row.push(v.std.to_string());
                }
                None => {
                    row.push(String::new());
                    row.push(String::new());
                }
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envcore::{ComponentDesc, EnvDescriptor};
    use std::collections::BTreeMap;

    fn tiny() -> ExperimentConfig {
        let env = EnvDescriptor::new()
            .component("agent1", ComponentDesc::new("point_mass"))
            .arena(3.0)
            .horizon(10);
        let mut c = ExperimentConfig::new(env, Family::Mimax);
        c.ppo.num_envs = 2;
        c.ppo.horizon = 8;
        c.ppo.total_steps = 48;
        c.ppo.minibatch_size = 8;
        c.ppo.policy_hidden = vec![4];
        c.ppo.value_hidden = vec![4];
        c.mimax.obs_indices = Some(vec![0, 1]);
        c.mimax.num_skills = 2;
        c.mimax.posterior_hidden = vec![4];
        c.eval_every = 1;
        c.eval.intents = 2;
        c.eval.episodes = 1;
        c.eval.goals = 2;
        c
    }

    #[test]
    fn run_writes_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let runs = run(&tiny(), Some(dir.path()), &mut Quiet).unwrap();
        let d = &runs[0].dir;
        for f in [
            "config.resolved.json",
            "stats.jsonl",
            "metrics.jsonl",
            "checkpoint.json",
            "checkpoint.bin",
            "trajectories.csv",
        ] {
            assert!(d.join(f).exists(), "{f}");
        }
        let reports = read_metrics(d.join("metrics.jsonl")).unwrap();
        assert_eq!(reports.len(), 3);
        assert_eq!(reports.last().unwrap(), &runs[0].final_report);
        let resolved = ExperimentConfig::load(d.join("config.resolved.json"), &[]).unwrap();
        assert_eq!(resolved, tiny().for_seed(0));
    }

    #[test]
    fn eval_is_repeatable_and_matches_run() {
        let dir = tempfile::tempdir().unwrap();
        let runs = run(&tiny(), Some(dir.path()), &mut Quiet).unwrap();
        let ck = runs[0].dir.join("checkpoint.json");
        let a = eval_checkpoint(&ck, &tiny()).unwrap();
        assert_eq!(a, eval_checkpoint(&ck, &tiny()).unwrap());
        assert_eq!(a, runs[0].final_report);
    }

    #[test]
    fn trajectory_eval_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let runs = run(&tiny(), Some(dir.path()), &mut Quiet).unwrap();
        let out = dir.path().join("dump.csv");
        let n = dump_trajectories(runs[0].dir.join("checkpoint.json"), 1, &out).unwrap();
        assert_eq!(n, 2);
        let r = eval_trajectories(&out, &tiny()).unwrap();
        for m in [MI, H_MARGINAL, EPISODE_SCORE] {
            assert_eq!(r.get(m), runs[0].final_report.get(m), "{m}");
        }
    }

    #[test]
    fn sweep_records_failures_and_continues() {
        let dir = tempfile::tempdir().unwrap();
        let mut grid = BTreeMap::new();
        grid.insert(
            "ppo.lr".to_string(),
            vec![serde_json::json!(1e-3), serde_json::json!(-1.0)],
        );
        grid.insert(
            "mimax.offset".to_string(),
            vec![serde_json::json!(0.0), serde_json::json!(2.0)],
        );
        let spec = SweepSpec::new(tiny(), grid, dir.path().to_path_buf()).unwrap();
        let res = sweep(&spec, &mut Quiet).unwrap();
        assert_eq!(res.len(), 4);
        assert_eq!(res.iter().filter(|r| r.outcome.is_err()).count(), 2);
        let mut rd = csv::Reader::from_path(dir.path().join("summary.csv")).unwrap();
        assert!(rd.headers().unwrap().iter().any(|h| h == "MI(s,z)"));
        assert_eq!(rd.records().count(), 4);
    }
}
