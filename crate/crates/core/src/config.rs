//! JSON run configuration with dotted-key overrides.
//!
//! A config file only needs the keys it changes; everything else takes the
//! defaults defined in code. Unknown keys are rejected with their dotted path.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::agents::{AgentConfig, ALGORITHMS};
use crate::dynamics::HydroParams;
use crate::env::{EnvConfig, EnvSpec};
use crate::error::{DockError, Result};
use crate::reward::RewardConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub total_timesteps: usize,
    pub checkpoint_interval: usize,
    pub eval_runs: usize,
    pub eval_episodes: usize,
    /// Master seed for evaluation spawns, shared by every algorithm.
    pub eval_seed: u64,
    /// Trailing window for smoothed learning curves.
    pub smoothing_window: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            total_timesteps: 100_000,
            checkpoint_interval: 10_000,
            eval_runs: 2,
            eval_episodes: 5,
            eval_seed: 2020,
            smoothing_window: 20,
        }
    }
}

impl HarnessConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        for (name, value) in [
            ("checkpoint_interval", self.checkpoint_interval),
            ("eval_runs", self.eval_runs),
            ("eval_episodes", self.eval_episodes),
            ("smoothing_window", self.smoothing_window),
        ] {
            if value == 0 {
                return Err(DockError::config(format!("{prefix}.{name}"), "must be >= 1"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// One of `td3`, `sac`, `ppo`.
    pub algo: String,
    pub dynamics: HydroParams,
    pub env: EnvConfig,
    pub reward: RewardConfig,
    pub agent: AgentConfig,
    pub harness: HarnessConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            algo: "td3".to_string(),
            dynamics: HydroParams::default(),
            env: EnvConfig::default(),
            reward: RewardConfig::default(),
            agent: AgentConfig::default(),
            harness: HarnessConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !ALGORITHMS.contains(&self.algo.as_str()) {
            return Err(DockError::config(
                "algo",
                format!("unknown algorithm {:?}, expected one of {ALGORITHMS:?}", self.algo),
            ));
        }
        self.dynamics.validate("dynamics")?;
        self.env.validate("env")?;
        self.reward.validate("reward")?;
        self.agent.validate("agent")?;
        self.harness.validate("harness")
    }

    pub fn env_spec(&self) -> EnvSpec {
        EnvSpec {
            env: self.env.clone(),
            dynamics: self.dynamics.clone(),
            reward: self.reward.clone(),
        }
    }

    /// Master seed for training streams.
    pub fn seed(&self) -> u64 {
        self.env.seed
    }

    /// Resolve a JSON document plus `key=value` overrides (applied left to
    /// right) against the defaults, then validate.
    pub fn resolve(json: &str, overrides: &[String]) -> Result<RunConfig> {
        let user: Value = serde_json::from_str(json)
            .map_err(|e| DockError::format("config", format!("invalid JSON: {e}")))?;
        let mut tree = serde_json::to_value(RunConfig::default()).expect("defaults serialise");
        merge(&mut tree, &user, "")?;
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let cfg: RunConfig = serde_json::from_value(tree)
            .map_err(|e| DockError::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| DockError::io(path, e))?;
        RunConfig::resolve(&text, overrides)
    }

    /// Apply overrides to an already-resolved config.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<RunConfig> {
        RunConfig::resolve(&self.to_json(), overrides)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn kind_matches(default: &Value, new: &Value) -> bool {
    match (default, new) {
        (Value::Null, _) => true,
        (_, Value::Null) => false,
        (Value::Bool(_), Value::Bool(_)) => true,
        (Value::Number(_), Value::Number(_)) => true,
        (Value::String(_), Value::String(_)) => true,
        (Value::Array(_), Value::Array(_)) => true,
        (Value::Object(_), Value::Object(_)) => true,
        _ => false,
    }
}

fn merge(base: &mut Value, user: &Value, prefix: &str) -> Result<()> {
    match (base, user) {
        (Value::Object(base_map), Value::Object(user_map)) => {
            for (k, v) in user_map {
                let path = join(prefix, k);
                match base_map.get_mut(k) {
                    None => return Err(DockError::config(path, "unknown key")),
                    Some(slot) => {
                        if slot.is_object() && v.is_object() {
                            merge(slot, v, &path)?;
                        } else {
                            set_leaf(slot, v.clone(), &path)?;
                        }
                    }
                }
            }
            Ok(())
        }
        (_, _) => Err(DockError::config(
            if prefix.is_empty() { "config" } else { prefix },
            "expected a JSON object",
        )),
    }
}

fn default_at(path: &str) -> Value {
    let mut node = serde_json::to_value(RunConfig::default()).expect("defaults serialise");
    for part in path.split('.') {
        node = match node.get(part) {
            Some(v) => v.clone(),
            None => return Value::Null,
        };
    }
    node
}

fn set_leaf(slot: &mut Value, value: Value, path: &str) -> Result<()> {
    // optional fields default to null and accept null back
    let optional = default_at(path).is_null();
    if !(kind_matches(slot, &value) || optional) {
        return Err(DockError::config(
            path,
            format!("expected a value like {slot}, got {value}"),
        ));
    }
    *slot = value;
    Ok(())
}

fn apply_override(tree: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| {
        DockError::config(assignment, "override must have the form key=value")
    })?;
    let key = key.trim();
    if key.is_empty() {
        return Err(DockError::config(assignment, "empty key"));
    }
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let path = parts[..=i].join(".");
        let map: &mut Map<String, Value> = node
            .as_object_mut()
            .ok_or_else(|| DockError::config(&path, "not a section"))?;
        let slot = map
            .get_mut(*part)
            .ok_or_else(|| DockError::config(key, "unknown key"))?;
        if i + 1 == parts.len() {
            if slot.is_object() {
                let mut fresh = slot.clone();
                merge(&mut fresh, &value, key)?;
                *slot = fresh;
            } else {
                set_leaf(slot, value.clone(), key)?;
            }
            return Ok(());
        }
        node = slot;
    }
    unreachable!("split always yields at least one part")
}
