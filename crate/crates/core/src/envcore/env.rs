//! Composed environments: fixed observation layout and a pure step function.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::descriptor::{edge_key, EnvDescriptor, RewardFnDesc, StateComponent};
use crate::error::{Error, Result};

/// Point-mass dynamics constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Physics {
    pub mass: f64,
    pub drag: f64,
    pub force_limit: f64,
    pub contact_stiffness: f64,
    pub contact_radius: f64,
    pub reset_noise: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Physics {
            mass: 1.0,
            drag: 0.1,
            force_limit: 1.0,
            contact_stiffness: 50.0,
            contact_radius: 0.5,
            reset_noise: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    PointMass,
    Singleton,
}

impl ComponentKind {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "point_mass" => Ok(ComponentKind::PointMass),
            "singleton" => Ok(ComponentKind::Singleton),
            other => Err(Error::UnknownComponentKind(other.to_string())),
        }
    }
}

#[derive(Debug, Clone)]
struct ComponentSpec {
    name: String,
    kind: ComponentKind,
    init_pos: [f64; 2],
    radius: f64,
}

#[derive(Debug, Clone, Copy)]
enum TermKind {
    RootGoal {
        component: usize,
        target: [f64; 2],
        sdcomp: StateComponent,
    },
    RootDist {
        a: usize,
        b: usize,
    },
}

#[derive(Debug, Clone)]
struct Term {
    name: String,
    kind: TermKind,
    scale: f64,
}

impl Term {
    fn eval(&self, state: &EnvState) -> f64 {
        match self.kind {
            TermKind::RootGoal {
                component,
                target,
                sdcomp,
            } => reward_root_goal(state, component, target, sdcomp),
            TermKind::RootDist { a, b } => reward_root_dist(state, a, b),
        }
    }
}

/// One named slice of the observation vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub name: String,
    pub start: usize,
    pub end: usize,
}

/// Observation index table plus action and reward channel metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub entries: Vec<LayoutEntry>,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub reward_channels: Vec<String>,
    pub score_channels: Vec<String>,
}

impl Layout {
    pub fn range(&self, name: &str) -> Option<std::ops::Range<usize>> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.start..e.end)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Per-component root state plus episode bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
    pub step_index: usize,
    pub rng_state: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub score: f64,
    pub done: bool,
    /// Unscaled value of every reward channel, in layout order.
    pub reward_terms: Vec<f64>,
}

/// A composed environment. Immutable; all state lives in [`EnvState`].
#[derive(Debug, Clone)]
pub struct Environment {
    descriptor: EnvDescriptor,
    components: Vec<ComponentSpec>,
    agents: Vec<usize>,
    root_vecs: Vec<(usize, usize)>,
    rewards: Vec<Term>,
    scores: Vec<Term>,
    layout: Layout,
    physics: Physics,
}

fn to_plane(v: &[f64], context: &str) -> Result<[f64; 2]> {
    match v.len() {
        0 => Ok([0.0, 0.0]),
        2 | 3 => {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(context.to_string()));
            }
            Ok([v[0], v[1]])
        }
        n => Err(Error::InvalidDescriptor(format!(
            "{context}: expected a 2- or 3-vector, got {n} entries"
        ))),
    }
}

fn compile_term(name: String, desc: &RewardFnDesc, owner: Owner, context: &str) -> Result<Term> {
    let kind = match (desc, owner) {
        (
            RewardFnDesc::RootGoal {
                sdcomp, target_goal, ..
            },
            Owner::Component(c),
        ) => TermKind::RootGoal {
            component: c,
            target: to_plane(target_goal, context)?,
            sdcomp: *sdcomp,
        },
        (RewardFnDesc::RootDist { .. }, Owner::Edge(a, b)) => TermKind::RootDist { a, b },
        (RewardFnDesc::RootGoal { .. }, Owner::Edge(..)) => {
            return Err(Error::InvalidDescriptor(format!(
                "{context}: root_goal must be attached to a component"
            )))
        }
        (RewardFnDesc::RootDist { .. }, Owner::Component(_)) => {
            return Err(Error::InvalidDescriptor(format!(
                "{context}: root_dist must be attached to an edge"
            )))
        }
    };
    if !desc.scale().is_finite() {
        return Err(Error::NonFinite(format!("{context}.scale")));
    }
    Ok(Term {
        name,
        kind,
        scale: desc.scale(),
    })
}

#[derive(Clone, Copy)]
enum Owner {
    Component(usize),
    Edge(usize, usize),
}

/// Builds an [`Environment`] from a descriptor.
///
/// Observation layout: every component in name order contributes
/// `[pos_x, pos_y, vel_x, vel_y]`, followed by the extra observers of every
/// edge in key order (`root_vec` is `pos_b - pos_a` for edge `a__b`).
pub fn compose(descriptor: &EnvDescriptor) -> Result<Environment> {
    let g = &descriptor.global;
    if g.horizon < 1 {
        return Err(Error::InvalidDescriptor("global.horizon must be >= 1".into()));
    }
    if g.action_repeat < 1 {
        return Err(Error::InvalidDescriptor("global.action_repeat must be >= 1".into()));
    }
    if !(g.dt > 0.0 && g.dt.is_finite()) {
        return Err(Error::InvalidDescriptor("global.dt must be > 0".into()));
    }
    if !g.env_reward_multiplier.is_finite() {
        return Err(Error::NonFinite("global.env_reward_multiplier".into()));
    }
    if let Some(w) = g.arena_half_width {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidDescriptor("global.arena_half_width must be > 0".into()));
        }
    }
    if descriptor.components.is_empty() {
        return Err(Error::InvalidDescriptor("no components".into()));
    }

    let mut named: Vec<(&str, &super::descriptor::ComponentDesc)> = descriptor.components.iter().collect();
    named.sort_by(|a, b| a.0.cmp(b.0));
    for w in named.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::DuplicateComponent(w[0].0.to_string()));
        }
    }
    let physics = Physics::default();
    let mut components = Vec::with_capacity(named.len());
    for (name, c) in &named {
        if name.contains("__") {
            return Err(Error::InvalidDescriptor(format!(
                "component name `{name}` may not contain `__`"
            )));
        }
        let kind = ComponentKind::parse(&c.component)?;
        let radius = match c.component_params.get("size") {
            Some(v) => v
                .as_f64()
                .filter(|r| *r > 0.0)
                .ok_or_else(|| Error::InvalidDescriptor(format!("components.{name}.component_params.size")))?,
            None => physics.contact_radius,
        };
        components.push(ComponentSpec {
            name: name.to_string(),
            kind,
            init_pos: to_plane(&c.pos, &format!("components.{name}.pos"))?,
            radius,
        });
    }
    let index_of = |name: &str| components.iter().position(|c| c.name == name);

    let mut entries = Vec::new();
    let mut offset = 0;
    for c in &components {
        entries.push(LayoutEntry {
            name: format!("{}.pos", c.name),
            start: offset,
            end: offset + 2,
        });
        entries.push(LayoutEntry {
            name: format!("{}.vel", c.name),
            start: offset + 2,
            end: offset + 4,
        });
        offset += 4;
    }

    let mut rewards = Vec::new();
    let mut scores = Vec::new();
    for (name, c) in &named {
        let idx = index_of(name).expect("component indexed above");
        for (rname, r) in c.reward_fns.iter() {
            let ctx = format!("components.{name}.reward_fns.{rname}");
            rewards.push(compile_term(format!("{name}.{rname}"), r, Owner::Component(idx), &ctx)?);
        }
        for (rname, r) in c.score_fns.iter() {
            let ctx = format!("components.{name}.score_fns.{rname}");
            scores.push(compile_term(format!("{name}.{rname}"), r, Owner::Component(idx), &ctx)?);
        }
    }

    let mut edges: Vec<(&str, &super::descriptor::EdgeDesc)> = descriptor.edges.iter().collect();
    edges.sort_by(|a, b| a.0.cmp(b.0));
    for w in edges.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::InvalidDescriptor(format!("duplicate edge `{}`", w[0].0)));
        }
    }
    let mut root_vecs = Vec::new();
    for (key, e) in &edges {
        let (a, b) = key
            .split_once("__")
            .ok_or_else(|| Error::UnsortedEdgeKey(key.to_string()))?;
        let ia = index_of(a).ok_or_else(|| Error::DanglingReference {
            name: a.to_string(),
            context: format!("edge `{key}`"),
        })?;
        let ib = index_of(b).ok_or_else(|| Error::DanglingReference {
            name: b.to_string(),
            context: format!("edge `{key}`"),
        })?;
        if a == b || edge_key(a, b) != *key {
            return Err(Error::UnsortedEdgeKey(key.to_string()));
        }
        for obs in &e.extra_observers {
            match obs.observer_type.as_str() {
                "root_vec" => {
                    entries.push(LayoutEntry {
                        name: format!("{key}.root_vec"),
                        start: offset,
                        end: offset + 2,
                    });
                    offset += 2;
                    root_vecs.push((ia, ib));
                }
                other => {
                    return Err(Error::InvalidDescriptor(format!(
                        "edges.{key}: unknown observer_type `{other}`"
                    )))
                }
            }
        }
        for (rname, r) in e.reward_fns.iter() {
            let ctx = format!("edges.{key}.reward_fns.{rname}");
            rewards.push(compile_term(format!("{key}.{rname}"), r, Owner::Edge(ia, ib), &ctx)?);
        }
        for (rname, r) in e.score_fns.iter() {
            let ctx = format!("edges.{key}.score_fns.{rname}");
            scores.push(compile_term(format!("{key}.{rname}"), r, Owner::Edge(ia, ib), &ctx)?);
        }
    }

    // Without explicit score terms the score is the unscaled reward sum, so
    // reward-weight sweeps never change it.
    if scores.is_empty() {
        scores = rewards
            .iter()
            .map(|t| Term {
                scale: 1.0,
                ..t.clone()
            })
            .collect();
    }

    let agents: Vec<usize> = components
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind == ComponentKind::PointMass)
        .map(|(i, _)| i)
        .collect();
    let layout = Layout {
        entries,
        obs_dim: offset,
        action_dim: 2 * agents.len(),
        reward_channels: rewards.iter().map(|t| t.name.clone()).collect(),
        score_channels: scores.iter().map(|t| t.name.clone()).collect(),
    };
    Ok(Environment {
        descriptor: descriptor.clone(),
        components,
        agents,
        root_vecs,
        rewards,
        scores,
        layout,
        physics,
    })
}

/// `-|x - target|` where `x` is the component's position or velocity.
pub fn reward_root_goal(state: &EnvState, component: usize, target: [f64; 2], sdcomp: StateComponent) -> f64 {
    let x = match sdcomp {
        StateComponent::Pos => state.positions[component],
        StateComponent::Vel => state.velocities[component],
    };
    -norm2([x[0] - target[0], x[1] - target[1]])
}

/// `-|pos_a - pos_b|`.
pub fn reward_root_dist(state: &EnvState, a: usize, b: usize) -> f64 {
    let (pa, pb) = (state.positions[a], state.positions[b]);
    -norm2([pa[0] - pb[0], pa[1] - pb[1]])
}

#[inline]
fn norm2(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

impl Environment {
    pub fn descriptor(&self) -> &EnvDescriptor {
        &self.descriptor
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn physics(&self) -> &Physics {
        &self.physics
    }

    pub fn obs_dim(&self) -> usize {
        self.layout.obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.layout.action_dim
    }

    pub fn horizon(&self) -> usize {
        self.descriptor.global.horizon
    }

    pub fn dt(&self) -> f64 {
        self.descriptor.global.dt
    }

    /// Physics substeps per call to [`Environment::step`].
    pub fn action_repeat(&self) -> usize {
        self.descriptor.global.action_repeat
    }

    pub fn arena_half_width(&self) -> Option<f64> {
        self.descriptor.global.arena_half_width
    }

    pub fn component_names(&self) -> impl Iterator<Item = &str> {
        self.components.iter().map(|c| c.name.as_str())
    }

    pub fn component_index(&self, name: &str) -> Option<usize> {
        self.components.iter().position(|c| c.name == name)
    }

    pub fn component_kind(&self, index: usize) -> ComponentKind {
        self.components[index].kind
    }

    /// Deterministic initial state: descriptor positions plus uniform noise
    /// in `[-0.1, 0.1]` per coordinate, zero velocity.
    pub fn reset(&self, seed: u64) -> EnvState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = self.physics.reset_noise;
        let positions = self
            .components
            .iter()
            .map(|c| {
                [
                    c.init_pos[0] + rng.gen_range(-noise..=noise),
                    c.init_pos[1] + rng.gen_range(-noise..=noise),
                ]
            })
            .collect();
        EnvState {
            positions,
            velocities: vec![[0.0; 2]; self.components.len()],
            step_index: 0,
            rng_state: rng.gen(),
        }
    }

    pub fn observe(&self, state: &EnvState) -> Vec<f64> {
        let mut obs = Vec::with_capacity(self.layout.obs_dim);
        self.observe_into(state, &mut obs);
        obs
    }

    pub fn observe_into(&self, state: &EnvState, obs: &mut Vec<f64>) {
        obs.clear();
        for (p, v) in state.positions.iter().zip(&state.velocities) {
            obs.extend_from_slice(p);
            obs.extend_from_slice(v);
        }
        for &(a, b) in &self.root_vecs {
            let (pa, pb) = (state.positions[a], state.positions[b]);
            obs.push(pb[0] - pa[0]);
            obs.push(pb[1] - pa[1]);
        }
    }

    /// Unscaled value of every reward channel at `state`.
    pub fn reward_terms(&self, state: &EnvState) -> Vec<f64> {
        self.rewards.iter().map(|t| t.eval(state)).collect()
    }

    pub fn reward(&self, state: &EnvState) -> f64 {
        let sum: f64 = self.rewards.iter().map(|t| t.scale * t.eval(state)).sum();
        self.descriptor.global.env_reward_multiplier * sum
    }

    pub fn score(&self, state: &EnvState) -> f64 {
        self.scores.iter().map(|t| t.scale * t.eval(state)).sum()
    }

    /// One semi-implicit Euler substep with the action force held fixed.
    fn integrate(&self, prev: &EnvState, action: &[f64]) -> EnvState {
        let ph = &self.physics;
        let n = self.components.len();
        let mut forces = vec![[0.0f64; 2]; n];
        for (k, &i) in self.agents.iter().enumerate() {
            forces[i] = [
                action[2 * k].clamp(-ph.force_limit, ph.force_limit),
                action[2 * k + 1].clamp(-ph.force_limit, ph.force_limit),
            ];
        }
        for (s, spec) in self.components.iter().enumerate() {
            if spec.kind != ComponentKind::Singleton {
                continue;
            }
            for &a in &self.agents {
                let d = [
                    prev.positions[s][0] - prev.positions[a][0],
                    prev.positions[s][1] - prev.positions[a][1],
                ];
                let dist = norm2(d);
                if dist < spec.radius {
                    let n_hat = if dist > 0.0 {
                        [d[0] / dist, d[1] / dist]
                    } else {
                        [1.0, 0.0]
                    };
                    let push = ph.contact_stiffness * (spec.radius - dist);
                    forces[s][0] += push * n_hat[0];
                    forces[s][1] += push * n_hat[1];
                }
            }
        }

        let dt = self.dt();
        let mut next = prev.clone();
        for i in 0..n {
            for ax in 0..2 {
                let v = prev.velocities[i][ax];
                let v_new = v + dt * (forces[i][ax] / ph.mass - ph.drag * v);
                let mut p_new = prev.positions[i][ax] + dt * v_new;
                let mut v_out = v_new;
                if let Some(w) = self.arena_half_width() {
                    if p_new > w {
                        p_new = w;
                        v_out = v_out.min(0.0);
                    } else if p_new < -w {
                        p_new = -w;
                        v_out = v_out.max(0.0);
                    }
                }
                next.positions[i][ax] = p_new;
                next.velocities[i][ax] = v_out;
            }
        }
        next
    }

    /// Advances one step with semi-implicit Euler integration.
    ///
    /// `action` holds a 2D force per point mass in component-name order; each
    /// axis is clipped to `[-1, 1]` N and held for `global.action_repeat`
    /// substeps of `dt`. Rewards and score are evaluated on the resulting state.
    pub fn step(&self, state: &EnvState, action: &[f64]) -> Result<(EnvState, StepResult)> {
        if action.len() != self.layout.action_dim {
            return Err(Error::dims(self.layout.action_dim, action.len(), "action"));
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("action".into()));
        }
        let mut next = state.clone();
        for _ in 0..self.descriptor.global.action_repeat {
            next = self.integrate(&next, action);
        }
        next.step_index = state.step_index + 1;

        let reward_terms = self.reward_terms(&next);
        let reward = self.descriptor.global.env_reward_multiplier
            * self
                .rewards
                .iter()
                .zip(&reward_terms)
                .map(|(t, r)| t.scale * r)
                .sum::<f64>();
        let result = StepResult {
            observation: self.observe(&next),
            reward,
            score: self.score(&next),
            done: next.step_index >= self.horizon(),
            reward_terms,
        };
        Ok((next, result))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envcore::descriptor::{ComponentDesc, EdgeDesc, ObserverDesc};

    fn single() -> Environment {
        compose(&EnvDescriptor::new().component("agent1", ComponentDesc::new("point_mass"))).unwrap()
    }

    fn ant_push() -> EnvDescriptor {
        EnvDescriptor::new()
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
                            sdcomp: StateComponent::Vel,
                            target_goal: vec![4.0, 0.0, 0.0],
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
                    reward_fns: {
                        let mut r = crate::envcore::NamedList::new();
                        r.insert("dist", RewardFnDesc::RootDist { scale: 1.0 });
                        r
                    },
                    ..Default::default()
                },
            )
    }

    fn zero_state(env: &Environment) -> EnvState {
        let n = env.components.len();
        EnvState {
            positions: vec![[0.0; 2]; n],
            velocities: vec![[0.0; 2]; n],
            step_index: 0,
            rng_state: 0,
        }
    }

    #[test]
    fn single_point_mass_layout() {
        let env = single();
        assert_eq!(env.obs_dim(), 4);
        assert_eq!(env.action_dim(), 2);
        assert_eq!(env.layout().range("agent1.pos"), Some(0..2));
        assert_eq!(env.layout().range("agent1.vel"), Some(2..4));
    }

    #[test]
    fn ant_push_layout() {
        let env = compose(&ant_push()).unwrap();
        assert_eq!(env.obs_dim(), 10);
        assert_eq!(env.action_dim(), 2);
        assert_eq!(env.layout().reward_channels, vec!["cap1.goal", "agent1__cap1.dist"]);
        assert_eq!(env.layout().range("agent1__cap1.root_vec"), Some(8..10));
        let json = env.layout().to_json().unwrap();
        let back: Layout = serde_json::from_str(&json).unwrap();
        assert_eq!(&back, env.layout());
    }

    #[test]
    fn unsorted_edge_key_rejected() {
        let mut d = ant_push();
        d.edges.0[0].0 = "cap1__agent1".into();
        assert!(matches!(compose(&d), Err(Error::UnsortedEdgeKey(_))));
    }

    #[test]
    fn dangling_edge_rejected() {
        let mut d = ant_push();
        d.edges.0[0].0 = "agent1__zzz".into();
        assert!(matches!(compose(&d), Err(Error::DanglingReference { .. })));
    }

    #[test]
    fn unknown_kind_and_duplicates_rejected() {
        let d = EnvDescriptor::new().component("a", ComponentDesc::new("pro_ant"));
        assert!(matches!(compose(&d), Err(Error::UnknownComponentKind(_))));
        let d = EnvDescriptor::new()
            .component("a", ComponentDesc::new("point_mass"))
            .component("a", ComponentDesc::new("point_mass"));
        assert!(matches!(compose(&d), Err(Error::DuplicateComponent(_))));
    }

    #[test]
    fn misplaced_reward_rejected() {
        let d = EnvDescriptor::new().component(
            "a",
            ComponentDesc::new("point_mass").with_reward("d", RewardFnDesc::RootDist { scale: 1.0 }),
        );
        assert!(matches!(compose(&d), Err(Error::InvalidDescriptor(_))));
    }

    #[test]
    fn bad_globals_rejected() {
        let d = EnvDescriptor::new()
            .component("a", ComponentDesc::new("point_mass"))
            .horizon(0);
        assert!(compose(&d).is_err());
        let mut d = EnvDescriptor::new().component("a", ComponentDesc::new("point_mass"));
        d.global.dt = 0.0;
        assert!(compose(&d).is_err());
    }

    #[test]
    fn reset_is_deterministic_and_bounded() {
        let env = compose(&ant_push()).unwrap();
        assert_eq!(env.reset(7), env.reset(7));
        let (a, b) = (env.reset(0), env.reset(1));
        assert_ne!(a.positions, b.positions);
        assert_eq!(a.velocities, b.velocities);
        assert_eq!(a.step_index, 0);
        for seed in 0..200 {
            let s = env.reset(seed);
            for (p, init) in s.positions.iter().zip([[0.0, 0.0], [1.0, 0.0]]) {
                assert!((p[0] - init[0]).abs() <= 0.1 && (p[1] - init[1]).abs() <= 0.1);
            }
            assert!(s.velocities.iter().all(|v| *v == [0.0, 0.0]));
        }
    }

    #[test]
    fn zero_action_at_rest_stays_put() {
        let env = single();
        let mut s = zero_state(&env);
        s.positions[0] = [0.3, -0.2];
        let (next, _) = env.step(&s, &[0.0, 0.0]).unwrap();
        assert_eq!(next.positions, s.positions);
        assert_eq!(next.velocities, s.velocities);
    }

    #[test]
    fn euler_update_from_rest() {
        let env = single();
        let (next, res) = env.step(&zero_state(&env), &[1.0, 0.0]).unwrap();
        // v' = 0 + 0.05 * (1/1 - 0.1*0) = 0.05 ; p' = 0 + 0.05 * 0.05 = 0.0025
        assert!((next.velocities[0][0] - 0.05).abs() < 1e-15);
        assert!((next.positions[0][0] - 0.0025).abs() < 1e-15);
        assert_eq!(next.positions[0][1], 0.0);
        assert_eq!(
            res.observation,
            vec![next.positions[0][0], 0.0, next.velocities[0][0], 0.0]
        );
    }

    #[test]
    fn action_force_is_clipped() {
        let env = single();
        let (a, _) = env.step(&zero_state(&env), &[5.0, -7.0]).unwrap();
        let (b, _) = env.step(&zero_state(&env), &[1.0, -1.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn action_repeat_matches_repeated_substeps() {
        let base = EnvDescriptor::new().component("a", ComponentDesc::new("point_mass"));
        let fine = compose(&base).unwrap();
        let coarse = compose(&base.clone().action_repeat(3)).unwrap();
        let s0 = zero_state(&fine);
        let mut s = s0.clone();
        for _ in 0..3 {
            s = fine.step(&s, &[0.7, -0.4]).unwrap().0;
        }
        let (c, r) = coarse.step(&s0, &[0.7, -0.4]).unwrap();
        assert_eq!(c.step_index, 1);
        assert_eq!(c.positions, s.positions);
        assert_eq!(c.velocities, s.velocities);
        assert_eq!(r.observation, fine.observe(&s));
        assert!(compose(&base.action_repeat(0)).is_err());
    }

    #[test]
    fn done_at_horizon() {
        let env = compose(
            &EnvDescriptor::new()
                .component("a", ComponentDesc::new("point_mass"))
                .horizon(5),
        )
        .unwrap();
        let mut s = env.reset(0);
        for t in 0..5 {
            let (next, res) = env.step(&s, &[0.0, 0.0]).unwrap();
            assert_eq!(res.done, t == 4);
            s = next;
        }
    }

    #[test]
    fn bad_actions_rejected() {
        let env = single();
        let s = zero_state(&env);
        assert!(matches!(env.step(&s, &[0.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(env.step(&s, &[f64::NAN, 0.0]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn root_goal_and_dist_values() {
        let mut s = EnvState {
            positions: vec![[0.0, 0.0], [3.0, 4.0]],
            velocities: vec![[4.0, 0.0], [0.0, 0.0]],
            step_index: 0,
            rng_state: 0,
        };
        assert_eq!(reward_root_goal(&s, 0, [4.0, 0.0], StateComponent::Vel), 0.0);
        assert_eq!(reward_root_goal(&s, 1, [4.0, 0.0], StateComponent::Vel), -4.0);
        s.positions[0] = [1.0, 1.0];
        assert_eq!(reward_root_goal(&s, 0, [1.0, 2.0], StateComponent::Pos), -1.0);
        s.positions[0] = [0.0, 0.0];
        assert_eq!(reward_root_dist(&s, 0, 1), -5.0);
        assert_eq!(reward_root_dist(&s, 1, 0), -5.0);
        assert_eq!(reward_root_dist(&s, 1, 1), 0.0);
    }

    #[test]
    fn singleton_is_pushed_by_nearby_agent() {
        let env = compose(&ant_push()).unwrap();
        let mut s = zero_state(&env);
        s.positions = vec![[0.0, 0.0], [0.3, 0.0]];
        let (next, _) = env.step(&s, &[0.0, 0.0]).unwrap();
        // k (r - d) = 50 * 0.2 = 10 N along +x
        assert!((next.velocities[1][0] - 0.05 * 10.0).abs() < 1e-12);
        assert_eq!(next.velocities[0], [0.0, 0.0]);
        s.positions = vec![[0.0, 0.0], [0.6, 0.0]];
        let (next, _) = env.step(&s, &[0.0, 0.0]).unwrap();
        assert_eq!(next.velocities[1], [0.0, 0.0]);
    }

    #[test]
    fn arena_walls_stop_motion() {
        let env = compose(
            &EnvDescriptor::new()
                .component("a", ComponentDesc::new("point_mass"))
                .arena(1.0),
        )
        .unwrap();
        let mut s = zero_state(&env);
        s.positions[0] = [0.999, 0.0];
        s.velocities[0] = [2.0, 0.0];
        let (next, _) = env.step(&s, &[1.0, 0.0]).unwrap();
        assert_eq!(next.positions[0][0], 1.0);
        assert_eq!(next.velocities[0][0], 0.0);
    }

    #[test]
    fn reward_scaling_leaves_score_unchanged() {
        let base = compose(&ant_push()).unwrap();
        let mut scaled_desc = ant_push();
        scaled_desc.scale_rewards(3.0);
        let scaled = compose(&scaled_desc).unwrap();
        let mut s = base.reset(3);
        for t in 0..20 {
            let a = [(t as f64 * 0.3).sin(), (t as f64 * 0.7).cos()];
            let (n1, r1) = base.step(&s, &a).unwrap();
            let (n2, r2) = scaled.step(&s, &a).unwrap();
            assert_eq!(n1, n2);
            assert!((r2.reward - 3.0 * r1.reward).abs() < 1e-12);
            assert_eq!(r1.score, r2.score);
            s = n1;
        }
    }
}
