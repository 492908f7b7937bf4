//! Score behavior stored in a trajectory file, without a policy: four
//! scripted skills are written to CSV, read back and evaluated.
//!
//! cargo run --release --example metrics_from_csv [-- PATH]

use skillkit::dmin::{TargetDistribution, TargetSpace};
use skillkit::envcore::{compose, ComponentDesc, EnvDescriptor, FeatureExtractor};
use skillkit::metrics::{
    collect_episodes, evaluate_episodes, group_by_skill, read_trajectories, write_trajectories, EvalSettings,
    FnController,
};
use skillkit::mimax::Skill;

fn main() -> skillkit::Result<()> {
    let path = match std::env::args().nth(1) {
        Some(p) => p.into(),
        None => {
            let env = compose(
                &EnvDescriptor::new()
                    .component("agent1", ComponentDesc::new("point_mass"))
                    .horizon(50)
                    .action_repeat(4)
                    .arena(3.0),
            )?;
            let dirs = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
            let ctrl = FnController(move |_: &[f64], z: &Skill| match z {
                Skill::Discrete(k) => dirs[*k].to_vec(),
                _ => vec![0.0, 0.0],
            });
            let skills: Vec<Skill> = (0..4).map(Skill::Discrete).collect();
            let groups = collect_episodes(&env, &ctrl, &skills, 4, env.horizon(), 0)?;
            let p = std::env::temp_dir().join("scripted_skills.csv");
            write_trajectories(&p, &groups.concat())?;
            println!("wrote {}", p.display());
            p
        }
    };

    let episodes = read_trajectories(&path)?;
    println!("{} episodes read", episodes.len());
    let groups = group_by_skill(episodes);
    let settings = EvalSettings {
        range: (-3.5, 3.5),
        bins: 14,
        ..Default::default()
    };
    let target = TargetDistribution::bimodal(TargetSpace::Pos);
    let report = evaluate_episodes(&groups, &FeatureExtractor::new(vec![0, 1])?, Some(&target), &settings)?;
    for (name, v) in &report.metrics {
        println!("{name:<18} {:>9.4}", v.value);
    }
    Ok(())
}
