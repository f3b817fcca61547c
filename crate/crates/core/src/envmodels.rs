//! Physical models: the wireless link, worker compute delays, node mobility
//! and injected stragglers.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::{sample_gaussian, RngStream};

/// Log-distance link with Shannon-rate transmissions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommConfig {
    /// Bandwidth in Hz.
    pub bandwidth_hz: f64,
    /// Noise power in watts.
    pub noise_power_w: f64,
    /// Received power at 1 m in dBm, before fading.
    pub sd_offset_dbm: f64,
    /// Path loss in dB per decade of distance.
    pub path_loss_slope_db: f64,
    /// Standard deviation of the per-transmission fading term, in dB.
    pub noise_std_db: f64,
    /// Bits per transmitted matrix element.
    pub bits_per_element: f64,
    /// Distances below this are clamped, in meters.
    pub min_distance_m: f64,
}

impl Default for CommConfig {
    fn default() -> Self {
        CommConfig {
            bandwidth_hz: 1e4,
            noise_power_w: 1.1e-12,
            sd_offset_dbm: 6.0,
            path_loss_slope_db: 20.0,
            noise_std_db: 1.0,
            bits_per_element: 64.0,
            min_distance_m: 1.0,
        }
    }
}

impl CommConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_power_w", self.noise_power_w),
            ("bits_per_element", self.bits_per_element),
            ("min_distance_m", self.min_distance_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("comm.{name} must be positive, got {v}")));
            }
        }
        if !(self.noise_std_db >= 0.0) {
            return Err(invalid(format!(
                "comm.noise_std_db must be non-negative, got {}",
                self.noise_std_db
            )));
        }
        if !self.sd_offset_dbm.is_finite() || !self.path_loss_slope_db.is_finite() {
            return Err(invalid("comm offsets must be finite"));
        }
        Ok(())
    }

    /// Folds transmit power, wavelength, and antenna gains into the 1 m offset.
    pub fn sd_offset_from_link_budget(tx_power_dbm: f64, wavelength_m: f64, gains_dbi: f64) -> f64 {
        tx_power_dbm + 20.0 * wavelength_m.log10() - 20.0 * (4.0 * std::f64::consts::PI).log10()
            + gains_dbi
    }
}

/// Received signal power in watts at distance `d` with fading `omega_db`.
pub fn signal_power(d: f64, omega_db: f64, cfg: &CommConfig) -> f64 {
    let d = d.max(cfg.min_distance_m);
    let sd_dbm = cfg.sd_offset_dbm - cfg.path_loss_slope_db * d.log10() + omega_db;
    10f64.powf((sd_dbm - 30.0) / 10.0)
}

/// Shannon rate in bits per second.
pub fn channel_capacity(d: f64, omega_db: f64, cfg: &CommConfig) -> f64 {
    cfg.bandwidth_hz * (1.0 + signal_power(d, omega_db, cfg) / cfg.noise_power_w).log2()
}

/// Transmission time of a `rows x cols` payload at a fixed fading value.
pub fn comm_time_with_fading(
    rows: usize,
    cols: usize,
    d: f64,
    omega_db: f64,
    cfg: &CommConfig,
) -> f64 {
    (rows * cols) as f64 * cfg.bits_per_element / channel_capacity(d, omega_db, cfg)
}

/// Transmission time with a fresh fading draw for this transmission.
pub fn comm_time(rows: usize, cols: usize, d: f64, rng: &mut RngStream, cfg: &CommConfig) -> f64 {
    let omega = sample_gaussian(0.0, cfg.noise_std_db, rng).unwrap_or(0.0);
    comm_time_with_fading(rows, cols, d, omega, cfg)
}

/// Shifted-exponential compute model: `P[T <= t] = 1 - exp(-(beta/l)(t - alpha l))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputeProfile {
    /// Straggling parameter.
    pub beta: f64,
    /// Shift, seconds per row.
    pub alpha: f64,
}

impl ComputeProfile {
    pub fn new(beta: f64, alpha: f64) -> Result<Self> {
        if !(beta > 0.0 && alpha > 0.0 && beta.is_finite() && alpha.is_finite()) {
            return Err(invalid(format!(
                "compute profile needs positive beta and alpha (got beta={beta}, alpha={alpha})"
            )));
        }
        Ok(ComputeProfile { beta, alpha })
    }

    pub fn mean_time(&self, rows: usize) -> f64 {
        rows as f64 * (self.alpha + 1.0 / self.beta)
    }

    /// Inverse CDF at `u` in `[0, 1)`.
    pub fn quantile(&self, rows: usize, u: f64) -> f64 {
        let l = rows as f64;
        self.alpha * l - (l / self.beta) * (-u).ln_1p()
    }
}

pub fn comp_time_sample(rows: usize, profile: &ComputeProfile, rng: &mut RngStream) -> f64 {
    profile.quantile(rows, rng.next_f64())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicState {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
}

impl KinematicState {
    pub fn distance_to(&self, other: &KinematicState) -> f64 {
        let dx = self.position[0] - other.position[0];
        let dy = self.position[1] - other.position[1];
        dx.hypot(dy)
    }

    /// Position after `dt` seconds without validating `dt`.
    pub(crate) fn position_after(&self, dt: f64) -> [f64; 2] {
        [
            self.position[0] + self.velocity[0] * dt,
            self.position[1] + self.velocity[1] * dt,
        ]
    }
}

/// Constant-velocity motion.
pub fn advance(k: &KinematicState, dt: f64) -> Result<KinematicState> {
    if !(dt >= 0.0) {
        return Err(invalid(format!("cannot advance by negative time {dt}")));
    }
    Ok(KinematicState {
        position: k.position_after(dt),
        velocity: k.velocity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StragglerPlan {
    pub enabled: bool,
    pub victim: Option<usize>,
    /// Extra sleep as a multiple of the sampled compute time.
    pub slowdown_factor: f64,
}

impl StragglerPlan {
    pub fn none() -> Self {
        StragglerPlan {
            enabled: false,
            victim: None,
            slowdown_factor: 10.0,
        }
    }

    pub fn targeting(victim: usize, slowdown_factor: f64) -> Self {
        StragglerPlan {
            enabled: true,
            victim: Some(victim),
            slowdown_factor,
        }
    }
}

/// A victim computes, then sleeps `slowdown_factor` times as long.
pub fn apply_straggler(t_comp: f64, worker_id: usize, plan: &StragglerPlan) -> f64 {
    if plan.enabled && plan.victim == Some(worker_id) {
        t_comp * (1.0 + plan.slowdown_factor)
    } else {
        t_comp
    }
}
