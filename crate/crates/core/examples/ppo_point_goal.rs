//! PPO on the point-mass goal task, compared with a scripted PD controller.
//!
//! cargo run --release --example ppo_point_goal [-- SEED]

use std::path::Path;

use skillkit::envcore::Environment;
use skillkit::experiment::{ExperimentConfig, Trainer};
use skillkit::metrics::{collect_episodes, Controller, FnController, PdController};
use skillkit::mimax::Skill;

fn mean_return(env: &Environment, ctrl: &dyn Controller) -> skillkit::Result<f64> {
    let eps = collect_episodes(env, ctrl, &[Skill::None], 16, env.horizon(), 99)?;
    Ok(eps[0].iter().map(|e| e.total_reward()).sum::<f64>() / eps[0].len() as f64)
}

fn main() -> skillkit::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/ppo_point_goal.json");
    let config = ExperimentConfig::load(path, &[])?;
    let mut trainer = Trainer::new(&config, seed)?;

    for b in 1..=trainer.total_batches() {
        let s = trainer.train_batch()?;
        if b % 40 == 0 {
            println!(
                "step {:>7}  episode_score {:>9.2}",
                s.step,
                s.episode_score.unwrap_or(f64::NAN)
            );
        }
    }

    let env = trainer.env();
    let goal = vec![2.0, 1.0];
    let scripted = mean_return(env, &PdController::new(vec![0, 1], vec![2, 3], goal))?;
    let idle = mean_return(env, &FnController(|_: &[f64], _: &Skill| vec![0.0, 0.0]))?;
    let learned = mean_return(env, &trainer.controller())?;
    println!("return: idle {idle:.2}  scripted {scripted:.2}  ppo {learned:.2}");
    println!("normalized score {:.3}", (learned - idle) / (scripted - idle));
    Ok(())
}
