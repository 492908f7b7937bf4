//! Continuous skills with and without spectral normalization on the
//! posterior, averaged over a few seeds.
//!
//! cargo run --release --example cdiayn_spectral_ablation [-- SEEDS]

use std::path::Path;

use skillkit::experiment::{ExperimentConfig, Trainer};
use skillkit::metrics::{mean_std, MI};

fn final_mi(config: &ExperimentConfig, seed: u64) -> skillkit::Result<f64> {
    let mut trainer = Trainer::new(config, seed)?;
    for _ in 0..trainer.total_batches() {
        trainer.train_batch()?;
    }
    Ok(trainer.evaluate()?.get(MI).unwrap())
}

fn main() -> skillkit::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/cdiayn_point.json");
    for sn in [true, false] {
        let config = ExperimentConfig::load(&path, &[("mimax.spectral_norm".into(), sn.to_string())])?;
        let mis = (0..seeds)
            .map(|s| final_mi(&config, s))
            .collect::<skillkit::Result<Vec<_>>>()?;
        let (m, sd) = mean_std(&mis);
        let each: Vec<String> = mis.iter().map(|x| format!("{x:.2}")).collect();
        println!("spectral_norm={sn:<5}  MI {m:.3} ± {sd:.3}  [{}]", each.join(" "));
    }
    Ok(())
}
