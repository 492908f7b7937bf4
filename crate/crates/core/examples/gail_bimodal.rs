//! Match a two-mode position target with GAIL and measure the energy
//! distance before and after training.
//!
//! cargo run --release --example gail_bimodal [-- SEED]

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skillkit::dmin::write_samples_csv;
use skillkit::experiment::{ExperimentConfig, Learner, Trainer};
use skillkit::metrics::{write_trajectories, NEG_ENERGY_DISTANCE};

fn main() -> skillkit::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/gail_bimodal.json");
    let config = ExperimentConfig::load(path, &[])?;
    let mut trainer = Trainer::new(&config, seed)?;
    let before = -trainer.evaluate()?.get(NEG_ENERGY_DISTANCE).unwrap();

    for b in 1..=trainer.total_batches() {
        let s = trainer.train_batch()?;
        if b % 40 == 0 {
            println!(
                "step {:>7}  discriminator loss {:.3}",
                s.step, s.losses["discriminator"]
            );
        }
    }
    let after = -trainer.evaluate()?.get(NEG_ENERGY_DISTANCE).unwrap();
    println!(
        "energy distance: untrained {before:.3}  trained {after:.3}  ratio {:.3}",
        after / before
    );

    let dir = std::env::temp_dir();
    write_trajectories(dir.join("gail_policy.csv"), &trainer.episodes(16)?.concat())?;
    if let Learner::Dmin(d) = trainer.learner() {
        let samples = d.target().sample(2000, &mut ChaCha8Rng::seed_from_u64(1))?;
        write_samples_csv(dir.join("gail_target.csv"), &samples)?;
    }
    println!("policy and target samples -> {}", dir.display());
    Ok(())
}
