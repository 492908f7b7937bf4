//! Declarative environment descriptors.
//!
//! The JSON layout mirrors the composer schema: a map of named components,
//! a map of edges keyed by the two sorted component names joined with `__`,
//! and a `global` block with episode and physics settings.

use std::fmt;
use std::marker::PhantomData;
use std::path::Path;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Ordered `name -> value` list that (de)serializes as a JSON object but keeps
/// repeated keys, so that duplicate names can be rejected at compose time
/// instead of being silently overwritten by the parser.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedList<T>(pub Vec<(String, T)>);

impl<T> Default for NamedList<T> {
    fn default() -> Self {
        NamedList(Vec::new())
    }
}

impl<T> NamedList<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: T) {
        self.0.push((name.into(), value));
    }

    pub fn get(&self, name: &str) -> Option<&T> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut T> {
        self.0.iter_mut().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &T)> {
        self.0.iter().map(|(n, v)| (n.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<T: Serialize> Serialize for NamedList<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for NamedList<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct ListVisitor<T>(PhantomData<T>);

        impl<'de, T: Deserialize<'de>> Visitor<'de> for ListVisitor<T> {
            type Value = NamedList<T>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of named entries")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> std::result::Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, T>()? {
                    out.push((k, v));
                }
                Ok(NamedList(out))
            }
        }

        deserializer.deserialize_map(ListVisitor(PhantomData))
    }
}

/// Which half of a component's root state a reward reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateComponent {
    Pos,
    Vel,
}

fn unit_scale() -> f64 {
    1.0
}

/// A reward (or score) term attached to a component or an edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reward_type", rename_all = "snake_case")]
pub enum RewardFnDesc {
    /// `-|x - target_goal|` where `x` is the owning component's position or velocity.
    RootGoal {
        sdcomp: StateComponent,
        target_goal: Vec<f64>,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
    /// `-|pos_a - pos_b|` between the two components of an edge.
    RootDist {
        #[serde(default = "unit_scale")]
        scale: f64,
    },
}

impl RewardFnDesc {
    pub fn scale(&self) -> f64 {
        match self {
            RewardFnDesc::RootGoal { scale, .. } | RewardFnDesc::RootDist { scale } => *scale,
        }
    }

    pub fn set_scale(&mut self, value: f64) {
        match self {
            RewardFnDesc::RootGoal { scale, .. } | RewardFnDesc::RootDist { scale } => *scale = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverDesc {
    pub observer_type: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDesc {
    pub component: String,
    #[serde(default)]
    pub component_params: serde_json::Map<String, serde_json::Value>,
    /// Initial position. Three-element positions are accepted and the
    /// vertical coordinate is dropped.
    #[serde(default)]
    pub pos: Vec<f64>,
    #[serde(default)]
    pub reward_fns: NamedList<RewardFnDesc>,
    #[serde(default, skip_serializing_if = "NamedList::is_empty")]
    pub score_fns: NamedList<RewardFnDesc>,
}

impl ComponentDesc {
    pub fn new(kind: &str) -> Self {
        ComponentDesc {
            component: kind.to_string(),
            component_params: Default::default(),
            pos: Vec::new(),
            reward_fns: NamedList::new(),
            score_fns: NamedList::new(),
        }
    }

    pub fn at(mut self, x: f64, y: f64) -> Self {
        self.pos = vec![x, y];
        self
    }

    pub fn with_reward(mut self, name: &str, f: RewardFnDesc) -> Self {
        self.reward_fns.insert(name, f);
        self
    }

    pub fn with_param(mut self, key: &str, value: serde_json::Value) -> Self {
        self.component_params.insert(key.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EdgeDesc {
    #[serde(default)]
    pub extra_observers: Vec<ObserverDesc>,
    #[serde(default)]
    pub reward_fns: NamedList<RewardFnDesc>,
    #[serde(default, skip_serializing_if = "NamedList::is_empty")]
    pub score_fns: NamedList<RewardFnDesc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlobalDesc {
    pub horizon: usize,
    pub dt: f64,
    pub env_reward_multiplier: f64,
    /// Square arena `[-w, w]^2`; `None` leaves the plane unbounded.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arena_half_width: Option<f64>,
    /// Physics substeps per control step; the action is held across them.
    pub action_repeat: usize,
}

impl Default for GlobalDesc {
    fn default() -> Self {
        GlobalDesc {
            horizon: 100,
            dt: 0.05,
            env_reward_multiplier: 1.0,
            arena_half_width: None,
            action_repeat: 1,
        }
    }
}

/// Root of an environment description.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvDescriptor {
    pub components: NamedList<ComponentDesc>,
    #[serde(default)]
    pub edges: NamedList<EdgeDesc>,
    #[serde(default)]
    pub global: GlobalDesc,
}

/// Canonical edge key for two component names.
pub fn edge_key(a: &str, b: &str) -> String {
    if a <= b {
        format!("{a}__{b}")
    } else {
        format!("{b}__{a}")
    }
}

impl EnvDescriptor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn component(mut self, name: &str, desc: ComponentDesc) -> Self {
        self.components.insert(name, desc);
        self
    }

    pub fn edge(mut self, key: &str, desc: EdgeDesc) -> Self {
        self.edges.insert(key, desc);
        self
    }

    pub fn horizon(mut self, horizon: usize) -> Self {
        self.global.horizon = horizon;
        self
    }

    pub fn action_repeat(mut self, k: usize) -> Self {
        self.global.action_repeat = k;
        self
    }

    pub fn arena(mut self, half_width: f64) -> Self {
        self.global.arena_half_width = Some(half_width);
        self
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Multiplies the scale of every reward term (not score terms) by `factor`.
    pub fn scale_rewards(&mut self, factor: f64) {
        for (_, c) in self.components.0.iter_mut() {
            for (_, r) in c.reward_fns.0.iter_mut() {
                r.set_scale(r.scale() * factor);
            }
        }
        for (_, e) in self.edges.0.iter_mut() {
            for (_, r) in e.reward_fns.0.iter_mut() {
                r.set_scale(r.scale() * factor);
            }
        }
    }
}
