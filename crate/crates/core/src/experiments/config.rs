use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, EstimatorKind};
use crate::gcrl::GcrlConfig;
use crate::mdp::{GridworldSpec, MdpSpec};

/// Knobs for the offline-reasoning studies (stitching and shortcut
/// discovery): scripted dataset size, critic/actor training length, and
/// the long/short mixing rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReasoningConfig {
    pub transitions: usize,
    pub iterations: usize,
    pub p_short: f64,
    /// Stitching evaluation pairs; empty means the same-edge corner
    /// pairs, filtered against trajectory co-occurrence.
    pub eval_pairs: Vec<(usize, usize)>,
    /// Greedy-rollout budget for the held-out stitching pairs.
    pub stitch_horizon: usize,
    /// Greedy-rollout budget for the skewed start/goal pair; sized past
    /// the long detour so a policy committed to it still registers.
    pub shortcut_horizon: usize,
}

impl Default for ReasoningConfig {
    fn default() -> Self {
        Self {
            transitions: 20_000,
            iterations: 50_000,
            p_short: 0.05,
            eval_pairs: Vec::new(),
            stitch_horizon: 10,
            shortcut_horizon: 18,
        }
    }
}

/// Knobs for the representation-interpolation study.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterpConfig {
    pub anchor_count: usize,
    pub alphas: Vec<f64>,
    pub train_iterations: usize,
    /// Interpolation endpoints as state indices; `None` picks the
    /// top-left and bottom-right corners.
    pub start: Option<usize>,
    pub goal: Option<usize>,
}

impl Default for InterpConfig {
    fn default() -> Self {
        Self {
            anchor_count: 16,
            alphas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            train_iterations: 4_000,
            start: None,
            goal: None,
        }
    }
}

/// One configuration drives every harness; each reads the fields it
/// needs and ignores the rest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Identifier prefixed onto the experiment column of every metric row.
    pub experiment: String,
    pub mdp: MdpSpec,
    pub gamma: f64,
    pub methods: Vec<String>,
    pub seeds: Vec<u64>,
    pub estimator: EstimatorConfig,
    /// Step size of the tabular successor-representation update, kept
    /// apart from the representation learning rate.
    pub sr_learning_rate: f64,
    pub dataset_transitions: usize,
    pub episode_len: usize,
    pub steps: usize,
    pub eval_interval: usize,
    /// Dataset sizes for the sample-efficiency sweep, strictly increasing.
    pub dataset_sizes: Vec<usize>,
    pub gcrl: GcrlConfig,
    pub gcrl_online: bool,
    pub gcrl_iterations: usize,
    pub reasoning: ReasoningConfig,
    pub interp: InterpConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: "occlab".into(),
            mdp: MdpSpec::Gridworld(GridworldSpec::open(5, 5)),
            gamma: 0.9,
            methods: EstimatorKind::ALL.iter().map(|k| k.id().to_string()).collect(),
            seeds: vec![0, 1, 2],
            estimator: EstimatorConfig {
                repr_dim: 25,
                ..EstimatorConfig::default()
            },
            sr_learning_rate: 0.003,
            dataset_transitions: 100_000,
            episode_len: 25,
            steps: 50_000,
            eval_interval: 1_000,
            dataset_sizes: vec![1_000, 10_000, 100_000],
            gcrl: GcrlConfig::default(),
            gcrl_online: false,
            gcrl_iterations: 10_000,
            reasoning: ReasoningConfig::default(),
            interp: InterpConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.experiment.is_empty() {
            return Err(Error::InvalidConfig("experiment id is empty".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!(
                "gamma must lie in [0, 1), got {}",
                self.gamma
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("at least one seed is required".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods selected".into()));
        }
        for id in &self.methods {
            id.parse::<EstimatorKind>()?;
        }
        if self.dataset_transitions == 0 || self.episode_len == 0 {
            return Err(Error::InvalidConfig(
                "dataset_transitions and episode_len must be positive".into(),
            ));
        }
        if self.eval_interval == 0 {
            return Err(Error::InvalidConfig("eval_interval must be positive".into()));
        }
        if self.dataset_sizes.is_empty() {
            return Err(Error::InvalidConfig("dataset_sizes is empty".into()));
        }
        for window in self.dataset_sizes.windows(2) {
            if window[1] <= window[0] {
                return Err(Error::InvalidConfig(format!(
                    "dataset_sizes must be strictly increasing, got {} then {}",
                    window[0], window[1]
                )));
            }
        }
        if *self.dataset_sizes.first().expect("nonempty") == 0 {
            return Err(Error::InvalidConfig("dataset sizes must be positive".into()));
        }
        if *self.dataset_sizes.last().expect("nonempty") > 10_000_000 {
            return Err(Error::InvalidConfig(
                "dataset sizes beyond 1e7 are not supported".into(),
            ));
        }
        self.estimator.validate()?;
        self.gcrl.validate()?;
        if self.gcrl_iterations == 0 {
            return Err(Error::InvalidConfig("gcrl_iterations must be positive".into()));
        }
        if self.reasoning.transitions == 0 || self.reasoning.iterations == 0 {
            return Err(Error::InvalidConfig(
                "reasoning transitions and iterations must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.reasoning.p_short) {
            return Err(Error::InvalidConfig(format!(
                "p_short must lie in [0, 1], got {}",
                self.reasoning.p_short
            )));
        }
        if self.interp.anchor_count == 0 || self.interp.train_iterations == 0 {
            return Err(Error::InvalidConfig(
                "interp anchor_count and train_iterations must be positive".into(),
            ));
        }
        if self.interp.alphas.is_empty() {
            return Err(Error::InvalidConfig("interp alphas is empty".into()));
        }
        for &alpha in &self.interp.alphas {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::InvalidConfig(format!(
                    "interpolation alpha {alpha} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Splits a `key=value` argument, keeping everything after the first `=`
/// as the value.
pub fn parse_override(arg: &str) -> Result<(String, String)> {
    match arg.split_once('=') {
        Some((key, value)) if !key.trim().is_empty() => {
            Ok((key.trim().to_string(), value.to_string()))
        }
        _ => Err(Error::InvalidConfig(format!(
            "override `{arg}` is not of the form key=value"
        ))),
    }
}

fn parse_override_value(raw: &str) -> serde_json::Value {
    serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()))
}

fn apply_override_path(
    value: &mut serde_json::Value,
    key: &str,
    parts: &[&str],
    depth: usize,
    raw: &str,
) -> Result<()> {
    let part = parts[depth];
    let object = value.as_object_mut().ok_or_else(|| {
        Error::InvalidConfig(format!(
            "override `{key}`: `{}` is not a configuration section",
            parts[..depth].join(".")
        ))
    })?;
    if !object.contains_key(part) {
        return Err(Error::InvalidConfig(format!(
            "override `{key}`: unknown field `{part}`"
        )));
    }
    if depth + 1 == parts.len() {
        object.insert(part.to_string(), parse_override_value(raw));
        Ok(())
    } else {
        let child = object.get_mut(part).expect("checked above");
        apply_override_path(child, key, parts, depth + 1, raw)
    }
}

/// Applies dotted `key=value` overrides onto a JSON configuration tree.
/// Every path segment must already exist, so typos are rejected by name.
pub fn apply_overrides(
    root: &mut serde_json::Value,
    overrides: &[(String, String)],
) -> Result<()> {
    for (key, raw) in overrides {
        let parts: Vec<&str> = key.split('.').collect();
        apply_override_path(root, key, &parts, 0, raw)?;
    }
    Ok(())
}

/// Loads a configuration file (or the defaults), applies dotted
/// overrides, and validates the result. Unknown fields in the file or
/// the overrides are rejected with the offending key named.
pub fn load_experiment_config(
    path: Option<&Path>,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig> {
    let base: ExperimentConfig = match path {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => ExperimentConfig::default(),
    };
    let mut value = serde_json::to_value(&base)?;
    apply_overrides(&mut value, overrides)?;
    let config: ExperimentConfig = serde_json::from_value(value)?;
    config.validate()?;
    Ok(config)
}
