//! Compose an agent-pushes-box world from the builder API, inspect its
//! observation layout and drive it with a naive scripted pusher.
//!
//! cargo run --release --example compose_ant_push

use skillkit::envcore::{
    compose, ComponentDesc, EdgeDesc, EnvDescriptor, NamedList, ObserverDesc, RewardFnDesc, StateComponent,
};

fn main() -> skillkit::Result<()> {
    let mut edge_rewards = NamedList::new();
    edge_rewards.insert("dist", RewardFnDesc::RootDist { scale: 0.5 });
    let desc = EnvDescriptor::new()
        .component(
            "agent1",
            ComponentDesc::new("point_mass").with_param("num_legs", 6.into()),
        )
        .component(
            "cap1",
            ComponentDesc::new("singleton")
                .with_param("size", 0.5.into())
                .at(1.0, 0.0)
                .with_reward(
                    "goal",
                    RewardFnDesc::RootGoal {
                        sdcomp: StateComponent::Pos,
                        target_goal: vec![2.5, 0.0, 0.0],
                        scale: 1.0,
                    },
                ),
        )
        .edge(
            "agent1__cap1",
            EdgeDesc {
                extra_observers: vec![ObserverDesc {
                    observer_type: "root_vec".into(),
                }],
                reward_fns: edge_rewards,
                ..Default::default()
            },
        )
        .horizon(50)
        .action_repeat(4)
        .arena(3.0);
    println!("{}", desc.to_json_string()?);

    let env = compose(&desc)?;
    for e in &env.layout().entries {
        println!("obs[{}..{}] {}", e.start, e.end, e.name);
    }
    println!("reward channels {:?}", env.layout().reward_channels);

    // Creep towards a point just short of the goal. The contact spring and
    // the light drag still carry the box past it: pushing is a real task.
    let agent = env.layout().range("agent1.pos").unwrap().start;
    let target = [2.5 - 0.55, 0.0];
    let mut state = env.reset(0);
    let mut score = 0.0;
    for t in 0..env.horizon() {
        let obs = env.observe(&state);
        let action: Vec<f64> = (0..2)
            .map(|k| (0.5 * (target[k] - obs[agent + k]) - 2.0 * obs[agent + 2 + k]).clamp(-1.0, 1.0))
            .collect();
        let (next, r) = env.step(&state, &action)?;
        score += r.score;
        if t % 10 == 0 {
            println!(
                "t {t:>2} agent {:?} box {:?} reward {:.3} terms {:?}",
                next.positions[0], next.positions[1], r.reward, r.reward_terms
            );
        }
        state = next;
    }
    println!("episode score {score:.2}");
    Ok(())
}
