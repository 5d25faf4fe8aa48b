use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::fsm::ControlParams;
use crate::kinematics::RobotModel;
use crate::sim::{InitMode, SimConfig};
use crate::terrain::TerrainSpec;

/// Everything needed to run a batch of trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub robot: RobotModel,
    pub terrain: TerrainSpec,
    pub control: ControlParams,
    pub sim: SimConfig,
    pub init: InitMode,
    pub n_trials: usize,
    pub base_seed: u64,
    /// Simulated time per trial, s.
    pub duration: f64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            robot: RobotModel::default(),
            terrain: TerrainSpec::Flat,
            control: ControlParams::default(),
            sim: SimConfig::default(),
            init: InitMode::default(),
            n_trials: 20,
            base_seed: 0,
            duration: 30.0,
            out_dir: PathBuf::from("polyped_out"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials < 1 {
            return Err(Error::config("n_trials", "must be ≥ 1"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::config("duration", "must be > 0"));
        }
        self.robot.validate()?;
        self.terrain.validate()?;
        self.control.validate()?;
        self.sim.validate()?;
        Ok(())
    }

    /// Seed of trial `i`.
    pub fn trial_seed(&self, i: usize) -> u64 {
        self.base_seed.wrapping_add(i as u64)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Parses and validates a JSON config. Omitted fields take their defaults;
/// keys that match no field are all reported together.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let value: Value = serde_json::from_str(text)?;
    let unknown = unknown_keys(&value)?;
    if !unknown.is_empty() {
        return Err(Error::UnknownKeys(unknown));
    }
    let config: ExperimentConfig = serde_json::from_value(value)?;
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

fn unknown_keys(value: &Value) -> Result<Vec<String>> {
    let reference = serde_json::to_value(ExperimentConfig::default())?;
    let mut out = Vec::new();
    let Value::Object(map) = value else {
        return Err(Error::config("<root>", "must be a JSON object"));
    };
    for (key, v) in map {
        match reference.get(key) {
            None => out.push(key.clone()),
            Some(_) if key == "terrain" => {
                if let Some(r) = terrain_reference(v) {
                    collect_unknown(v, &r, key, &mut out);
                }
            }
            Some(r) => collect_unknown(v, r, key, &mut out),
        }
    }
    Ok(out)
}

/// Fully defaulted terrain of the kind named in `v`, if the kind is valid.
fn terrain_reference(v: &Value) -> Option<Value> {
    let kind = v.get("kind")?.clone();
    let spec: TerrainSpec = serde_json::from_value(serde_json::json!({ "kind": kind })).ok()?;
    serde_json::to_value(spec).ok()
}

fn collect_unknown(v: &Value, reference: &Value, path: &str, out: &mut Vec<String>) {
    let (Value::Object(map), Value::Object(known)) = (v, reference) else {
        return;
    };
    let known: BTreeSet<&String> = known.keys().collect();
    for (key, child) in map {
        let child_path = format!("{path}.{key}");
        if known.contains(key) {
            collect_unknown(child, &reference[key], &child_path, out);
        } else {
            out.push(child_path);
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub duration: Option<f64>,
    pub segments: Option<usize>,
    pub terrain: Option<TerrainSpec>,
    pub trials: Option<usize>,
    pub floating: bool,
}

impl Overrides {
    /// Applies the overrides and revalidates.
    pub fn apply(&self, mut config: ExperimentConfig) -> Result<ExperimentConfig> {
        if let Some(out) = &self.out_dir {
            config.out_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            config.base_seed = seed;
        }
        if let Some(d) = self.duration {
            config.duration = d;
        }
        if let Some(n) = self.segments {
            config.robot.n_segments = n;
        }
        if let Some(t) = &self.terrain {
            config.terrain = t.clone();
        }
        if let Some(n) = self.trials {
            config.n_trials = n;
        }
        if self.floating {
            config.terrain = TerrainSpec::Floating;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Terrain of the given kind with default parameters.
pub fn terrain_by_name(name: &str) -> Result<TerrainSpec> {
    serde_json::from_value(serde_json::json!({ "kind": name })).map_err(|_| {
        Error::config(
            "terrain",
            format!("unknown kind `{name}` (floating, flat, rough, hill, stairs)"),
        )
    })
}
