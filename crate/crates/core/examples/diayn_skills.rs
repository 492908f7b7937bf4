//! Discover 8 discrete skills on the point mass and report how well they
//! separate in position space.
//!
//! cargo run --release --example diayn_skills [-- SEED]

use std::path::Path;

use skillkit::experiment::{ExperimentConfig, Trainer};
use skillkit::metrics::{write_trajectories, MI};

fn main() -> skillkit::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/diayn_point.json");
    let config = ExperimentConfig::load(path, &[])?;
    let mut trainer = Trainer::new(&config, seed)?;

    for b in 1..=trainer.total_batches() {
        let s = trainer.train_batch()?;
        if b % 40 == 0 {
            println!("step {:>7}  posterior loss {:.3}", s.step, s.losses["posterior"]);
        }
    }

    let report = trainer.evaluate()?;
    println!(
        "MI(s,z) {:.3} nats (ceiling ln 8 = {:.3})",
        report.get(MI).unwrap(),
        8f64.ln()
    );
    let groups = trainer.episodes(1)?;
    for eps in &groups {
        let last = eps[0].observations.last().unwrap();
        println!(
            "skill {:<2} ends at ({:+.2}, {:+.2})",
            eps[0].skill.to_field(),
            last[0],
            last[1]
        );
    }
    let out = std::env::temp_dir().join("diayn_skills.csv");
    write_trajectories(&out, &groups.concat())?;
    println!("trajectories -> {}", out.display());
    Ok(())
}
