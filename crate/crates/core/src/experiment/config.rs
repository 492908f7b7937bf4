use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::dmin::DminConfig;
use crate::envcore::{compose, EnvDescriptor, Environment, FeatureExtractor};
use crate::error::{Error, Result};
use crate::metrics::EvalSettings;
use crate::mimax::MimaxConfig;
use crate::ppo::PpoConfig;

/// Which reward the policy is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// The environment's own reward.
    #[default]
    Task,
    Mimax,
    Dmin,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    /// Features used for the state-entropy metric; `None` takes the first
    /// component's position.
    pub obs_indices: Option<Vec<usize>>,
}

/// A complete, self-contained experiment. On load the `env` entry may be a
/// path to a descriptor file (relative to the config file); it is inlined so
/// the resolved config reproduces a run on its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvDescriptor,
    #[serde(default)]
    pub family: Family,
    #[serde(default)]
    pub task: TaskConfig,
    #[serde(default)]
    pub mimax: MimaxConfig,
    #[serde(default)]
    pub dmin: DminConfig,
    #[serde(default)]
    pub ppo: PpoConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Evaluate every this many PPO batches; 0 evaluates only at the end.
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    #[serde(default)]
    pub eval: EvalSettings,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_eval_every() -> usize {
    10
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/experiment")
}

impl ExperimentConfig {
    /// A config with every other field at its default.
    pub fn new(env: EnvDescriptor, family: Family) -> Self {
        ExperimentConfig {
            env,
            family,
            task: TaskConfig::default(),
            mimax: MimaxConfig::default(),
            dmin: DminConfig::default(),
            ppo: PpoConfig::default(),
            seeds: default_seeds(),
            eval_every: default_eval_every(),
            eval: EvalSettings::default(),
            output_dir: default_output_dir(),
        }
    }

    /// Reads a config file, inlines its descriptor and applies `key=value`
    /// overrides.
    pub fn load(path: impl AsRef<Path>, overrides: &[(String, String)]) -> Result<Self> {
        let value = read_config_value(path.as_ref())?;
        Self::from_value(value, overrides)
    }

    pub fn from_value(value: Value, overrides: &[(String, String)]) -> Result<Self> {
        let mut value = Self::deserialize_value(value)?.to_value()?;
        for (k, v) in overrides {
            set_dotted(&mut value, k, parse_override(v))?;
        }
        let config = Self::deserialize_value(value)?;
        config.validate()?;
        Ok(config)
    }

    fn deserialize_value(value: Value) -> Result<Self> {
        serde_path_to_error::deserialize(value).map_err(|e| {
            let key = e.path().to_string();
            Error::config(key, e.into_inner().to_string())
        })
    }

    pub fn to_value(&self) -> Result<Value> {
        Ok(serde_json::to_value(self)?)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "must list at least one seed"));
        }
        self.ppo.validate()?;
        let env = self.environment()?;
        match self.family {
            Family::Task => {
                self.task_features(&env)?;
            }
            Family::Mimax => {
                self.mimax.validate()?;
                self.mimax.feature_extractor(env.obs_dim())?;
            }
            Family::Dmin => {
                self.dmin.validate()?;
                self.dmin.feature_extractor(&env)?;
            }
        }
        self.eval.spec(1)?;
        Ok(())
    }

    pub fn environment(&self) -> Result<Environment> {
        compose(&self.env)
    }

    pub fn task_features(&self, env: &Environment) -> Result<FeatureExtractor> {
        let fx = match &self.task.obs_indices {
            Some(ix) => FeatureExtractor::new(ix.clone())?,
            None => {
                let first = env
                    .component_names()
                    .next()
                    .ok_or_else(|| Error::config("task.obs_indices", "environment has no components"))?;
                let range = env
                    .layout()
                    .range(&format!("{first}.pos"))
                    .ok_or_else(|| Error::config("task.obs_indices", format!("no `{first}.pos` in the layout")))?;
                FeatureExtractor::new(range.collect())?
            }
        };
        fx.validate(env.obs_dim())?;
        Ok(fx)
    }

    /// The config of a single-seed run.
    pub fn for_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seeds = vec![seed];
        c
    }

    /// Hex digest identifying the run: the config with `seeds = [seed]` and
    /// the output directory blanked, so relocating a run keeps its identity.
    pub fn fingerprint(&self, seed: u64) -> Result<String> {
        let mut c = self.for_seed(seed);
        c.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&c)?;
        let digest = Sha256::digest(&bytes);
        Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
    }
}

/// Parses a config file and replaces a string `env` entry with the contents
/// of the descriptor it names.
pub fn read_config_value(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut value: Value = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or(Path::new(""));
    inline_env(&mut value, base)?;
    Ok(value)
}

pub(crate) fn inline_env(value: &mut Value, base: &Path) -> Result<()> {
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::config("", "config must be a JSON object"))?;
    if let Some(Value::String(p)) = obj.get("env") {
        let desc_path = base.join(p);
        let desc = EnvDescriptor::from_path(&desc_path)?;
        obj.insert("env".into(), serde_json::to_value(desc)?);
    }
    Ok(())
}

/// `--set` values are JSON when they parse as JSON and strings otherwise.
pub fn parse_override(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Splits `key=value`.
pub fn parse_assignment(s: &str) -> Result<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) if !k.is_empty() => Ok((k.trim().to_string(), v.to_string())),
        _ => Err(Error::InvalidArgument(format!("expected key=value, got `{s}`"))),
    }
}

fn lookup_mut<'a>(root: &'a mut Value, key: &str) -> Result<&'a mut Value> {
    let mut cur = root;
    for part in key.split('.') {
        cur = match cur {
            Value::Object(m) => m.get_mut(part),
            Value::Array(a) => part.parse::<usize>().ok().and_then(move |i| a.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| Error::config(key, "does not resolve in the config"))?;
    }
    Ok(cur)
}

/// Replaces the entry at a dotted path; every segment must already exist.
pub fn set_dotted(root: &mut Value, key: &str, value: Value) -> Result<()> {
    *lookup_mut(root, key)? = value;
    Ok(())
}

/// A grid of overrides over a base config.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: ExperimentConfig,
    pub grid: BTreeMap<String, Vec<Value>>,
    pub output_dir: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    base: Value,
    #[serde(default)]
    grid: BTreeMap<String, Vec<Value>>,
    output_dir: Option<PathBuf>,
}

impl SweepSpec {
    pub fn new(base: ExperimentConfig, grid: BTreeMap<String, Vec<Value>>, output_dir: PathBuf) -> Result<Self> {
        let spec = SweepSpec { base, grid, output_dir };
        spec.validate()?;
        Ok(spec)
    }

    /// Reads a spec whose `base` is either an inline config or a path to one.
    pub fn load(path: impl AsRef<Path>, overrides: &[(String, String)]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: SweepFile = serde_path_to_error::deserialize(&mut serde_json::Deserializer::from_str(&text))
            .map_err(|e| Error::config(e.path().to_string(), e.into_inner().to_string()))?;
        let dir = path.parent().unwrap_or(Path::new(""));
        let base_value = match file.base {
            Value::String(p) => read_config_value(&dir.join(p))?,
            mut v => {
                inline_env(&mut v, dir)?;
                v
            }
        };
        let base = ExperimentConfig::from_value(base_value, overrides)?;
        let output_dir = file.output_dir.unwrap_or_else(|| base.output_dir.clone());
        Self::new(base, file.grid, output_dir)
    }

    pub fn validate(&self) -> Result<()> {
        let mut value = self.base.to_value()?;
        for (k, vals) in &self.grid {
            lookup_mut(&mut value, k)?;
            if vals.is_empty() {
                return Err(Error::config(k.clone(), "sweep value list is empty"));
            }
        }
        Ok(())
    }

    /// Every combination of grid values, the last key varying fastest.
    pub fn variants(&self) -> Vec<Vec<(String, Value)>> {
        let mut out = vec![Vec::new()];
        for (k, vals) in &self.grid {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    vals.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push((k.clone(), v.clone()));
                        p
                    })
                })
                .collect();
        }
        out
    }

    /// The config of one variant.
    pub fn variant_config(&self, assignment: &[(String, Value)]) -> Result<ExperimentConfig> {
        let mut value = self.base.to_value()?;
        for (k, v) in assignment {
            set_dotted(&mut value, k, v.clone())?;
        }
        ExperimentConfig::from_value(value, &[])
    }
}
