use approx::relative_eq;
use proptest::prelude::*;
use skillkit::envcore::{compose, edge_key, ComponentDesc, EnvDescriptor, EnvState, RewardFnDesc, StateComponent};

fn point(arena: Option<f64>) -> EnvDescriptor {
    let d = EnvDescriptor::new().component(
        "agent1",
        ComponentDesc::new("point_mass").with_reward(
            "goal",
            RewardFnDesc::RootGoal {
                sdcomp: StateComponent::Pos,
                target_goal: vec![1.0, -1.0],
                scale: 1.0,
            },
        ),
    );
    match arena {
        Some(w) => d.arena(w),
        None => d,
    }
}

fn state(p: [f64; 2], v: [f64; 2]) -> EnvState {
    EnvState {
        positions: vec![p],
        velocities: vec![v],
        step_index: 0,
        rng_state: 0,
    }
}

proptest! {
    #[test]
    fn step_is_semi_implicit_euler(px in -2.0..2.0f64, py in -2.0..2.0f64, vx in -1.0..1.0f64, vy in -1.0..1.0f64,
                                    ax in -3.0..3.0f64, ay in -3.0..3.0f64) {
        let env = compose(&point(None)).unwrap();
        let (next, _) = env.step(&state([px, py], [vx, vy]), &[ax, ay]).unwrap();
        let dt = env.dt();
        for (k, (p, v, a)) in [(px, vx, ax), (py, vy, ay)].into_iter().enumerate() {
            let v_new = v + dt * (a.clamp(-1.0, 1.0) - 0.1 * v);
            prop_assert!((next.velocities[0][k] - v_new).abs() < 1e-12);
            prop_assert!((next.positions[0][k] - (p + dt * v_new)).abs() < 1e-12);
        }
    }

    #[test]
    fn actions_beyond_the_limit_act_like_the_limit(ax in 1.0..50.0f64, sign in prop::bool::ANY) {
        let env = compose(&point(None)).unwrap();
        let s = if sign { 1.0 } else { -1.0 };
        let (a, _) = env.step(&state([0.0; 2], [0.0; 2]), &[s * ax, 0.0]).unwrap();
        let (b, _) = env.step(&state([0.0; 2], [0.0; 2]), &[s, 0.0]).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn arena_contains_every_trajectory(actions in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..200)) {
        let env = compose(&point(Some(1.5)).action_repeat(3)).unwrap();
        let mut s = env.reset(3);
        for (ax, ay) in actions {
            s = env.step(&s, &[ax, ay]).unwrap().0;
            prop_assert!(s.positions[0].iter().all(|p| p.abs() <= 1.5));
        }
    }

    #[test]
    fn reward_scaling_leaves_score_alone(px in -3.0..3.0f64, py in -3.0..3.0f64, f in -5.0..5.0f64) {
        let base = compose(&point(None)).unwrap();
        let mut d = point(None);
        d.scale_rewards(f);
        let scaled = compose(&d).unwrap();
        let s = state([px, py], [0.0; 2]);
        prop_assert!(relative_eq!(scaled.reward(&s), f * base.reward(&s), epsilon = 1e-9, max_relative = 1e-9));
        prop_assert_eq!(scaled.score(&s), base.score(&s));
    }

    #[test]
    fn edge_keys_are_sorted_and_symmetric(a in "[a-z][a-z0-9]{0,6}", b in "[a-z][a-z0-9]{0,6}") {
        let k = edge_key(&a, &b);
        prop_assert_eq!(&k, &edge_key(&b, &a));
        let (x, y) = k.split_once("__").unwrap();
        prop_assert!(x <= y);
    }

    #[test]
    fn reset_is_a_function_of_the_seed(seed in any::<u64>()) {
        let env = compose(&point(Some(3.0))).unwrap();
        prop_assert_eq!(env.reset(seed), env.reset(seed));
    }
}

#[test]
fn descriptor_round_trips_through_json() {
    let d = point(Some(3.0)).horizon(40).action_repeat(2);
    let back = EnvDescriptor::from_json_str(&d.to_json_string().unwrap()).unwrap();
    assert_eq!(back, d);
}

#[test]
fn shipped_descriptors_compose() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/descriptors");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let env = compose(&EnvDescriptor::from_path(&path).unwrap());
        assert!(env.is_ok(), "{}: {:?}", path.display(), env.err());
    }
}
