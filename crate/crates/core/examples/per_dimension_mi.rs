//! Per-dimension mutual information: skills that only move along x carry
//! information in the x position and velocity and none in y.
//!
//! cargo run --release --example per_dimension_mi

use skillkit::envcore::{compose, ComponentDesc, EnvDescriptor};
use skillkit::metrics::{mi_per_dimension, write_per_dimension_csv, FnController, RolloutPlan};
use skillkit::mimax::{Skill, SkillPrior};

fn main() -> skillkit::Result<()> {
    let env = compose(
        &EnvDescriptor::new()
            .component("agent1", ComponentDesc::new("point_mass"))
            .horizon(50)
            .action_repeat(4)
            .arena(3.0),
    )?;
    let prior = SkillPrior::categorical(4)?;
    let ctrl = FnController(|_: &[f64], z: &Skill| match z {
        Skill::Discrete(k) => vec![-1.0 + 2.0 * *k as f64 / 3.0, 0.0],
        _ => vec![0.0, 0.0],
    });
    let plan = RolloutPlan {
        intents: 4,
        episodes: 4,
        steps: env.horizon(),
        seed: 0,
    };
    let rows = mi_per_dimension(&env, &ctrl, &prior, &[0, 1, 2, 3], plan, 16, (-3.5, 3.5))?;
    let names = ["pos_x", "pos_y", "vel_x", "vel_y"];
    for r in &rows {
        println!("{:<6} MI {:.3}  H {:.3}  H|z {:.3}", names[r.dim], r.mi, r.h, r.h_cond);
    }
    let out = std::env::temp_dir().join("per_dimension_mi.csv");
    write_per_dimension_csv(&out, &rows)?;
    println!("-> {}", out.display());
    Ok(())
}
