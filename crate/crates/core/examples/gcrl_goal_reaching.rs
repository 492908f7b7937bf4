//! Goal-conditioned point mass: train, then aim at held-out goals and compare
//! latent goal reaching against the untrained policy.
//!
//! cargo run --release --example gcrl_goal_reaching [-- SEED]

use std::path::Path;

use skillkit::experiment::{ExperimentConfig, Learner, Trainer};
use skillkit::metrics::{final_goal_distances, lgr, sample_goals};

fn main() -> skillkit::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/gcrl_point.json");
    let config = ExperimentConfig::load(path, &[])?;
    let untrained = Trainer::new(&config, seed)?;
    let mut trainer = Trainer::new(&config, seed)?;
    for _ in 0..trainer.total_batches() {
        trainer.train_batch()?;
    }

    let Learner::Mimax(m) = trainer.learner() else {
        unreachable!("gcrl config")
    };
    let (env, fx) = (trainer.env(), trainer.features());
    let goals = sample_goals(fx.dim(), 10, 12345);
    let dist = final_goal_distances(env, &trainer.controller(), fx, &goals, &m.head, env.horizon(), 7)?;
    let tol = 0.1 * env.arena_half_width().unwrap_or(3.0);
    for (g, d) in goals.iter().zip(&dist) {
        println!(
            "goal ({:+.2}, {:+.2})  final distance {d:.3}{}",
            g[0],
            g[1],
            if *d < tol { "" } else { "  miss" }
        );
    }
    let before = lgr(
        env,
        &untrained.controller(),
        fx,
        &goals,
        &m.head,
        1.0,
        1,
        env.horizon(),
        7,
    )?;
    let after = lgr(
        env,
        &trainer.controller(),
        fx,
        &goals,
        &m.head,
        1.0,
        1,
        env.horizon(),
        7,
    )?;
    println!(
        "LGR untrained {before:.3}  trained {after:.3}  ({:.1}x closer)",
        before / after
    );
    Ok(())
}
