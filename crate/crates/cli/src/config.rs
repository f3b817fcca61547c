//! TOML experiment configuration.
//!
//! A file may name a `preset` and then override individual keys in the
//! `[scenario]`, `[comm]`, `[straggler]` and `[train]` tables. Without a
//! preset, the four problem-shape keys are required.

use std::fs;
use std::path::{Path, PathBuf};

use mahc_core::scenario::{AlphaRule, OptimizerKind, PenaltyBoundary, ScenarioConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("unknown preset `{0}` (known: scenario1, scenario2, scenario3, desk)")]
    UnknownPreset(String),
    #[error("missing required keys: {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("{key}: {msg}")]
    Invalid { key: String, msg: String },
    #[error("invalid configuration: {0}")]
    Validation(#[from] mahc_core::Error),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    preset: Option<String>,
    #[serde(default)]
    scenario: RawScenario,
    #[serde(default)]
    comm: RawComm,
    #[serde(default)]
    straggler: RawStraggler,
    #[serde(default)]
    train: RawTrain,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawAlpha {
    Rule(String),
    Fixed(f64),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    #[serde(alias = "N")]
    workers: Option<usize>,
    #[serde(alias = "p")]
    rows: Option<usize>,
    #[serde(alias = "m")]
    cols: Option<usize>,
    #[serde(alias = "K")]
    tasks: Option<usize>,
    position_range: Option<[f64; 2]>,
    velocity_range: Option<[f64; 2]>,
    beta_range: Option<[f64; 2]>,
    alpha: Option<RawAlpha>,
    master_moves: Option<bool>,
    batch_size: Option<usize>,
    baseline_batch_size: Option<usize>,
    verify: Option<bool>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComm {
    bandwidth_hz: Option<f64>,
    noise_power_w: Option<f64>,
    sd_offset_dbm: Option<f64>,
    path_loss_slope_db: Option<f64>,
    noise_std_db: Option<f64>,
    bits_per_element: Option<f64>,
    min_distance_m: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStraggler {
    enabled: Option<bool>,
    slowdown_factor: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrain {
    gamma: Option<f64>,
    actor_lr: Option<f64>,
    critic_lr: Option<f64>,
    tau: Option<f64>,
    penalty: Option<f64>,
    penalty_boundary: Option<String>,
    reward_scale: Option<f64>,
    batch_size: Option<usize>,
    replay_capacity: Option<usize>,
    episodes_per_iteration: Option<usize>,
    max_iterations: Option<usize>,
    updates_per_iteration: Option<usize>,
    noise_start: Option<f64>,
    noise_end: Option<f64>,
    optimizer: Option<String>,
    hidden_width: Option<usize>,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let scenario = ScenarioConfig::preset(name)
            .ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))?;
        Ok(ExperimentConfig {
            scenario,
            train: TrainConfig::default(),
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scenario.validate()?;
        self.train.validate()?;
        Ok(())
    }

    /// Short SHA-256 of the resolved configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let s = raw.scenario;

    let mut scenario = match &raw.preset {
        Some(name) => {
            ScenarioConfig::preset(name).ok_or_else(|| ConfigError::UnknownPreset(name.clone()))?
        }
        None => {
            let missing: Vec<String> = [
                ("scenario.workers", s.workers.is_none()),
                ("scenario.rows", s.rows.is_none()),
                ("scenario.cols", s.cols.is_none()),
                ("scenario.tasks", s.tasks.is_none()),
            ]
            .into_iter()
            .filter(|(_, m)| *m)
            .map(|(k, _)| k.to_string())
            .collect();
            if !missing.is_empty() {
                return Err(ConfigError::Missing(missing));
            }
            ScenarioConfig::with_shape(
                "custom",
                s.workers.unwrap(),
                s.rows.unwrap(),
                s.cols.unwrap(),
                s.tasks.unwrap(),
            )
        }
    };

    set(&mut scenario.name, s.name);
    set(&mut scenario.workers, s.workers);
    set(&mut scenario.rows, s.rows);
    set(&mut scenario.cols, s.cols);
    set(&mut scenario.tasks, s.tasks);
    set(&mut scenario.position_range, s.position_range);
    set(&mut scenario.velocity_range, s.velocity_range);
    set(&mut scenario.beta_range, s.beta_range);
    set(&mut scenario.master_moves, s.master_moves);
    set(&mut scenario.batch_size, s.batch_size);
    set(&mut scenario.verify, s.verify);
    set(&mut scenario.seed, s.seed);
    if s.baseline_batch_size.is_some() {
        scenario.baseline_batch_size = s.baseline_batch_size;
    }
    match s.alpha {
        None => {}
        Some(RawAlpha::Fixed(a)) => scenario.alpha_rule = AlphaRule::Fixed(a),
        Some(RawAlpha::Rule(r)) if r == "inverse-beta" => {
            scenario.alpha_rule = AlphaRule::InverseBeta
        }
        Some(RawAlpha::Rule(r)) => {
            return Err(ConfigError::Invalid {
                key: "scenario.alpha".into(),
                msg: format!("expected \"inverse-beta\" or a number, got \"{r}\""),
            })
        }
    }

    let c = raw.comm;
    let comm = &mut scenario.comm;
    set(&mut comm.bandwidth_hz, c.bandwidth_hz);
    set(&mut comm.noise_power_w, c.noise_power_w);
    set(&mut comm.sd_offset_dbm, c.sd_offset_dbm);
    set(&mut comm.path_loss_slope_db, c.path_loss_slope_db);
    set(&mut comm.noise_std_db, c.noise_std_db);
    set(&mut comm.bits_per_element, c.bits_per_element);
    set(&mut comm.min_distance_m, c.min_distance_m);

    set(&mut scenario.straggler.enabled, raw.straggler.enabled);
    set(
        &mut scenario.straggler.slowdown_factor,
        raw.straggler.slowdown_factor,
    );

    let t = raw.train;
    let mut train = TrainConfig::default();
    set(&mut train.gamma, t.gamma);
    set(&mut train.actor_lr, t.actor_lr);
    set(&mut train.critic_lr, t.critic_lr);
    set(&mut train.tau, t.tau);
    set(&mut train.reward.penalty, t.penalty);
    set(&mut train.reward_scale, t.reward_scale);
    set(&mut train.batch_size, t.batch_size);
    set(&mut train.replay_capacity, t.replay_capacity);
    set(&mut train.episodes_per_iteration, t.episodes_per_iteration);
    set(&mut train.max_iterations, t.max_iterations);
    set(&mut train.updates_per_iteration, t.updates_per_iteration);
    set(&mut train.noise_start, t.noise_start);
    set(&mut train.noise_end, t.noise_end);
    set(&mut train.hidden_width, t.hidden_width);
    if let Some(b) = t.penalty_boundary {
        train.reward.boundary = match b.as_str() {
            "strict" => PenaltyBoundary::Strict,
            "inclusive" => PenaltyBoundary::Inclusive,
            other => {
                return Err(ConfigError::Invalid {
                    key: "train.penalty_boundary".into(),
                    msg: format!("expected \"strict\" or \"inclusive\", got \"{other}\""),
                })
            }
        };
    }
    if let Some(o) = t.optimizer {
        train.optimizer = match o.as_str() {
            "adam" => OptimizerKind::Adam,
            "sgd" => OptimizerKind::Sgd,
            other => {
                return Err(ConfigError::Invalid {
                    key: "train.optimizer".into(),
                    msg: format!("expected \"adam\" or \"sgd\", got \"{other}\""),
                })
            }
        };
    }

    let cfg = ExperimentConfig { scenario, train };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_expands() {
        let cfg = parse_config("preset = \"scenario1\"").unwrap();
        assert_eq!(cfg.scenario.workers, 3);
        assert_eq!(cfg.scenario.rows, 6000);
        assert_eq!(cfg.scenario.cols, 10_000);
        assert_eq!(cfg.train, TrainConfig::default());
    }

    #[test]
    fn empty_file_lists_required_keys() {
        let err = parse_config("").unwrap_err();
        let msg = err.to_string();
        for key in [
            "scenario.workers",
            "scenario.rows",
            "scenario.cols",
            "scenario.tasks",
        ] {
            assert!(msg.contains(key), "{msg}");
        }
    }

    #[test]
    fn explicit_keys_override_preset() {
        let cfg = parse_config("preset = \"scenario1\"\n[scenario]\np = 100\n").unwrap();
        assert_eq!(cfg.scenario.rows, 100);
        assert_eq!(cfg.scenario.workers, 3);
        let cfg = parse_config(
            "preset = \"desk\"\n[straggler]\nenabled = true\n[train]\npenalty_boundary = \"inclusive\"\n",
        )
        .unwrap();
        assert!(cfg.scenario.straggler.enabled);
        assert_eq!(cfg.train.reward.boundary, PenaltyBoundary::Inclusive);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = parse_config("preset = \"desk\"\n[scenario]\nwrokers = 3\n").unwrap_err();
        assert!(err.to_string().contains("wrokers"), "{err}");
        assert!(parse_config("colour = 1").is_err());
    }

    #[test]
    fn invalid_values_name_their_key() {
        let err = parse_config("preset = \"desk\"\n[train]\ntau = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("train.tau"), "{err}");
        let err = parse_config("preset = \"desk\"\n[scenario]\nalpha = \"fast\"\n").unwrap_err();
        assert!(err.to_string().contains("scenario.alpha"), "{err}");
        assert!(matches!(
            parse_config("preset = \"huge\"").unwrap_err(),
            ConfigError::UnknownPreset(_)
        ));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::preset("desk").unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.scenario.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
