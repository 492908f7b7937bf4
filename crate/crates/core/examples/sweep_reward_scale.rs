//! Sweep the push task's reward weights and read back summary.csv. The
//! score column keeps one fixed definition, so it compares across variants
//! even though the rewards being optimized differ.
//!
//! cargo run --release --example sweep_reward_scale [-- OUT_DIR]

use std::path::Path;

use skillkit::experiment::{sweep, Quiet, SweepSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/sweeps/push_reward_scale.json");
    let mut spec = SweepSpec::load(path, &[("seeds".into(), "[0]".into())])?;
    spec.output_dir = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("sweep_push"));

    let results = sweep(&spec, &mut Quiet)?;
    println!("{} variants", results.len());
    let summary = spec.output_dir.join("summary.csv");
    let mut rdr = csv::Reader::from_path(&summary)?;
    let header = rdr.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (mult, dist, reward, score) = (
        col("env.global.env_reward_multiplier"),
        col("env.edges.agent1__cap1.reward_fns.dist.scale"),
        col("episode_reward"),
        col("episode_score"),
    );
    println!(
        "{:>10} {:>10} {:>15} {:>14}",
        "multiplier", "dist", "episode_reward", "episode_score"
    );
    for row in rdr.records() {
        let row = row?;
        println!(
            "{:>10} {:>10} {:>15.2} {:>14.2}",
            &row[mult],
            &row[dist],
            row[reward].parse::<f64>()?,
            row[score].parse::<f64>()?
        );
    }
    Ok(())
}
