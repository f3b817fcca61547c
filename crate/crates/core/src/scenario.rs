//! Scenario and training parameters, with the built-in presets.

use serde::{Deserialize, Serialize};

use crate::envmodels::CommConfig;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaRule {
    /// `alpha_i = 1 / beta_i`.
    InverseBeta,
    Fixed(f64),
}

impl AlphaRule {
    pub fn alpha_for(&self, beta: f64) -> f64 {
        match *self {
            AlphaRule::InverseBeta => 1.0 / beta,
            AlphaRule::Fixed(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StragglerSettings {
    pub enabled: bool,
    pub slowdown_factor: f64,
}

impl Default for StragglerSettings {
    fn default() -> Self {
        StragglerSettings {
            enabled: false,
            slowdown_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub workers: usize,
    /// Rows of the task matrix (`p`).
    pub rows: usize,
    /// Columns of the task matrix (`m`).
    pub cols: usize,
    /// Tasks per episode (`K`).
    pub tasks: usize,
    pub position_range: [f64; 2],
    pub velocity_range: [f64; 2],
    pub beta_range: [f64; 2],
    pub alpha_rule: AlphaRule,
    pub master_moves: bool,
    /// Rows per batch for batch-processing schemes.
    pub batch_size: usize,
    /// Rows per batch for the baseline schemes. `None` means each baseline
    /// worker returns its whole load in one batch.
    pub baseline_batch_size: Option<usize>,
    /// Materialize the encoded products and decode every task.
    pub verify: bool,
    pub seed: u64,
    pub comm: CommConfig,
    pub straggler: StragglerSettings,
}

impl ScenarioConfig {
    pub fn preset(name: &str) -> Option<ScenarioConfig> {
        let (workers, rows, cols, tasks) = match name {
            "scenario1" => (3, 6000, 10_000, 30),
            "scenario2" => (4, 8000, 10_000, 30),
            "scenario3" => (5, 10_000, 10_000, 30),
            "desk" => (2, 200, 200, 5),
            _ => return None,
        };
        Some(ScenarioConfig::with_shape(name, workers, rows, cols, tasks))
    }

    pub fn preset_names() -> &'static [&'static str] {
        &["scenario1", "scenario2", "scenario3", "desk"]
    }

    /// Scenario with the standard environment around a given problem shape.
    pub fn with_shape(name: &str, workers: usize, rows: usize, cols: usize, tasks: usize) -> Self {
        ScenarioConfig {
            name: name.to_string(),
            workers,
            rows,
            cols,
            tasks,
            position_range: [-100.0, 100.0],
            velocity_range: [-10.0, 10.0],
            beta_range: [1e4, 1e5],
            alpha_rule: AlphaRule::InverseBeta,
            master_moves: true,
            batch_size: 1,
            baseline_batch_size: None,
            verify: false,
            seed: 0,
            comm: CommConfig::default(),
            straggler: StragglerSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("workers", self.workers),
            ("rows", self.rows),
            ("cols", self.cols),
            ("tasks", self.tasks),
            ("batch_size", self.batch_size),
        ] {
            if v == 0 {
                return Err(invalid(format!("scenario.{key} must be at least 1")));
            }
        }
        for (key, [lo, hi]) in [
            ("position_range", self.position_range),
            ("velocity_range", self.velocity_range),
            ("beta_range", self.beta_range),
        ] {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(invalid(format!(
                    "scenario.{key} [{lo}, {hi}] is not a valid range"
                )));
            }
        }
        if !(self.beta_range[0] > 0.0) {
            return Err(invalid("scenario.beta_range must be positive"));
        }
        if self.baseline_batch_size == Some(0) {
            return Err(invalid("scenario.baseline_batch_size must be at least 1"));
        }
        if let AlphaRule::Fixed(a) = self.alpha_rule {
            if !(a > 0.0) {
                return Err(invalid(format!(
                    "scenario.alpha_rule fixed alpha {a} must be positive"
                )));
            }
        }
        if !(self.straggler.slowdown_factor >= 0.0) {
            return Err(invalid("straggler.slowdown_factor must be non-negative"));
        }
        self.comm.validate()
    }
}

/// When the infeasibility penalty applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyBoundary {
    /// Penalize `sum(l) < p`.
    Strict,
    /// Penalize `sum(l) <= p`.
    Inclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub penalty: f64,
    pub boundary: PenaltyBoundary,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            penalty: 200.0,
            boundary: PenaltyBoundary::Strict,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub tau: f64,
    pub reward: RewardConfig,
    /// Factor applied to rewards before they reach the critic. Reported
    /// rewards stay unscaled.
    pub reward_scale: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub episodes_per_iteration: usize,
    pub max_iterations: usize,
    pub updates_per_iteration: usize,
    pub noise_start: f64,
    pub noise_end: f64,
    pub optimizer: OptimizerKind,
    pub hidden_width: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.95,
            actor_lr: 0.01,
            critic_lr: 0.01,
            tau: 0.99,
            reward: RewardConfig::default(),
            reward_scale: 0.005,
            batch_size: 256,
            replay_capacity: 100_000,
            episodes_per_iteration: 10,
            max_iterations: 1000,
            updates_per_iteration: 1,
            noise_start: 0.3,
            noise_end: 0.02,
            optimizer: OptimizerKind::Adam,
            hidden_width: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid(format!(
                "train.gamma {} must lie in (0, 1)",
                self.gamma
            )));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(invalid(format!(
                "train.tau {} must lie in (0, 1)",
                self.tau
            )));
        }
        if !(self.reward.penalty >= 0.0) {
            return Err(invalid("train.penalty must be non-negative"));
        }
        if !(self.reward_scale > 0.0) || !self.reward_scale.is_finite() {
            return Err(invalid("train.reward_scale must be positive"));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(invalid("train learning rates must be positive"));
        }
        for (key, v) in [
            ("batch_size", self.batch_size),
            ("replay_capacity", self.replay_capacity),
            ("episodes_per_iteration", self.episodes_per_iteration),
            ("hidden_width", self.hidden_width),
        ] {
            if v == 0 {
                return Err(invalid(format!("train.{key} must be at least 1")));
            }
        }
        if !(self.noise_start >= 0.0 && self.noise_end >= 0.0) {
            return Err(invalid("train exploration noise must be non-negative"));
        }
        Ok(())
    }

    /// Exploration std for an iteration, decaying linearly over training.
    pub fn noise_at(&self, iteration: usize) -> f64 {
        if self.max_iterations <= 1 {
            return self.noise_start;
        }
        let frac = iteration as f64 / (self.max_iterations - 1) as f64;
        self.noise_start + (self.noise_end - self.noise_start) * frac.min(1.0)
    }
}
