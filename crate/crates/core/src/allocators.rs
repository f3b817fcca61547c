//! Load allocation schemes: the uncoded baselines, HCMM, and trained actors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::envmodels::ComputeProfile;
use crate::error::{invalid, Error, Result};
use crate::marl::TrainedPolicy;
use crate::numerics::RngStream;
use crate::simcore::{Allocator, CodeKind, Decision, LoadAllocation, Observation};

/// Equal split; the first `p mod N` workers take one extra row.
pub fn uniform_alloc(p: usize, n_workers: usize) -> Result<LoadAllocation> {
    if n_workers == 0 {
        return Err(invalid("uniform allocation needs at least one worker"));
    }
    let base = p / n_workers;
    let extra = p % n_workers;
    Ok(LoadAllocation::new(
        (0..n_workers)
            .map(|i| base + usize::from(i < extra))
            .collect(),
    ))
}

/// Loads proportional to `beta / (alpha * beta + 1)`, rounded by largest
/// remainder so they sum to exactly `p`.
pub fn load_balanced_alloc(p: usize, profiles: &[ComputeProfile]) -> Result<LoadAllocation> {
    if profiles.is_empty() {
        return Err(invalid(
            "load-balanced allocation needs at least one worker",
        ));
    }
    let weights: Vec<f64> = profiles
        .iter()
        .map(|c| c.beta / (c.alpha * c.beta + 1.0))
        .collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(invalid(format!("load-balanced weights sum to {total}")));
    }
    let real: Vec<f64> = weights.iter().map(|w| p as f64 * w / total).collect();
    let mut loads: Vec<usize> = real.iter().map(|r| r.floor() as usize).collect();
    let assigned: usize = loads.iter().sum();
    let mut order: Vec<usize> = (0..loads.len()).collect();
    // stable sort keeps the lower index first among equal remainders
    order.sort_by(|&a, &b| {
        let ra = real[a] - real[a].floor();
        let rb = real[b] - real[b].floor();
        rb.total_cmp(&ra)
    });
    for &i in order.iter().take(p.saturating_sub(assigned)) {
        loads[i] += 1;
    }
    Ok(LoadAllocation::new(loads))
}

fn hcmm_residual(z: f64, ab: f64) -> f64 {
    z - ab - z.ln_1p()
}

/// Positive root `z` of `z - alpha*beta - ln(1 + z) = 0`, by bisection.
pub fn solve_hcmm_z(alpha_beta: f64) -> Result<f64> {
    if !(alpha_beta > 0.0) || !alpha_beta.is_finite() {
        return Err(Error::Solver(format!(
            "alpha*beta = {alpha_beta} must be positive"
        )));
    }
    let mut lo = 0.0;
    let mut hi = alpha_beta.max(1.0);
    let mut grown = 0;
    while hcmm_residual(hi, alpha_beta) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        grown += 1;
        if grown > 1100 || !hi.is_finite() {
            return Err(Error::Solver(format!(
                "no bracket for alpha*beta = {alpha_beta}"
            )));
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        let g = hcmm_residual(mid, alpha_beta);
        if g.abs() <= 1e-12 && hi - lo <= 1e-12 * mid.max(1e-300) {
            return Ok(mid);
        }
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if g > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// HCMM `lambda` for one worker, solved in `z = beta * lambda`.
pub fn solve_hcmm_lambda(profile: &ComputeProfile) -> Result<f64> {
    Ok(solve_hcmm_z(profile.alpha * profile.beta)? / profile.beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HcmmSolution {
    pub lambda: Vec<f64>,
    pub h: f64,
    /// `p / (h * lambda_i)` before rounding.
    pub real_loads: Vec<f64>,
    pub loads: Vec<usize>,
}

pub fn hcmm_solution(p: usize, profiles: &[ComputeProfile]) -> Result<HcmmSolution> {
    if profiles.is_empty() {
        return Err(invalid("HCMM allocation needs at least one worker"));
    }
    let lambda = profiles
        .iter()
        .map(solve_hcmm_lambda)
        .collect::<Result<Vec<_>>>()?;
    let h: f64 = profiles
        .iter()
        .zip(&lambda)
        .map(|(c, l)| c.beta / (1.0 + c.beta * l))
        .sum();
    let real_loads: Vec<f64> = lambda.iter().map(|l| p as f64 / (h * l)).collect();
    let mut loads: Vec<usize> = real_loads
        .iter()
        .map(|r| (r.ceil() as usize).min(p))
        .collect();
    let mut total: usize = loads.iter().sum();
    while total < p {
        let (i, _) = loads
            .iter()
            .enumerate()
            .filter(|(_, &l)| l < p)
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("some load is below p while the total is");
        let add = (p - total).min(p - loads[i]);
        loads[i] += add;
        total += add;
    }
    Ok(HcmmSolution {
        lambda,
        h,
        real_loads,
        loads,
    })
}

pub fn hcmm_alloc(p: usize, profiles: &[ComputeProfile]) -> Result<LoadAllocation> {
    Ok(LoadAllocation::new(hcmm_solution(p, profiles)?.loads))
}

/// `round(p * a)` clamped to `[0, p]`.
pub fn action_to_load(action: f64, p: usize) -> usize {
    let l = (p as f64 * action).round();
    if l.is_nan() || l <= 0.0 {
        0
    } else {
        (l as usize).min(p)
    }
}

/// Actor outputs for raw per-agent states.
pub fn policy_actions(policy: &TrainedPolicy, states: &[Vec<f64>]) -> Result<Vec<f64>> {
    if states.len() != policy.actors.len() {
        return Err(Error::DimensionMismatch {
            what: "states vs actors",
            expected: policy.actors.len(),
            got: states.len(),
        });
    }
    let normalized = policy.scaler.normalize_joint(states);
    policy
        .actors
        .iter()
        .zip(&normalized)
        .map(|(actor, s)| Ok(actor.forward(s)?[0]))
        .collect()
}

pub fn policy_alloc(
    policy: &TrainedPolicy,
    states: &[Vec<f64>],
    p: usize,
) -> Result<LoadAllocation> {
    Ok(LoadAllocation::new(
        policy_actions(policy, states)?
            .into_iter()
            .map(|a| action_to_load(a, p))
            .collect(),
    ))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UniformAllocator;

impl Allocator for UniformAllocator {
    fn name(&self) -> &str {
        "uniform"
    }

    fn code(&self) -> CodeKind {
        CodeKind::Uncoded
    }

    fn allocate(&self, obs: &Observation<'_>, _rng: &mut RngStream) -> Result<Decision> {
        let a = uniform_alloc(obs.p, obs.world.n_workers())?;
        Ok(Decision::from_loads(&a.loads, obs.p))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadBalancedAllocator;

impl Allocator for LoadBalancedAllocator {
    fn name(&self) -> &str {
        "load-balanced"
    }

    fn code(&self) -> CodeKind {
        CodeKind::Uncoded
    }

    fn allocate(&self, obs: &Observation<'_>, _rng: &mut RngStream) -> Result<Decision> {
        let a = load_balanced_alloc(obs.p, &obs.world.profiles())?;
        Ok(Decision::from_loads(&a.loads, obs.p))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HcmmAllocator;

impl Allocator for HcmmAllocator {
    fn name(&self) -> &str {
        "hcmm"
    }

    fn code(&self) -> CodeKind {
        CodeKind::Coded
    }

    fn allocate(&self, obs: &Observation<'_>, _rng: &mut RngStream) -> Result<Decision> {
        let a = hcmm_alloc(obs.p, &obs.world.profiles())?;
        Ok(Decision::from_loads(&a.loads, obs.p))
    }
}

/// Trained actors acting as an allocator, optionally with Gaussian
/// exploration noise added to each action before it is clipped to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct PolicyAllocator {
    policy: TrainedPolicy,
    noise_std: f64,
}

impl PolicyAllocator {
    pub fn greedy(policy: TrainedPolicy) -> Self {
        PolicyAllocator {
            policy,
            noise_std: 0.0,
        }
    }

    pub fn exploring(policy: TrainedPolicy, noise_std: f64) -> Self {
        PolicyAllocator { policy, noise_std }
    }

    pub fn policy(&self) -> &TrainedPolicy {
        &self.policy
    }
}

impl Allocator for PolicyAllocator {
    fn name(&self) -> &str {
        "marl"
    }

    fn code(&self) -> CodeKind {
        CodeKind::Coded
    }

    fn batch_processing(&self) -> bool {
        true
    }

    fn allocate(&self, obs: &Observation<'_>, rng: &mut RngStream) -> Result<Decision> {
        let mut actions = policy_actions(&self.policy, obs.states)?;
        if self.noise_std > 0.0 {
            for a in &mut actions {
                *a = (*a + self.noise_std * rng.standard_normal()).clamp(0.0, 1.0);
            }
        }
        Ok(Decision {
            loads: actions
                .iter()
                .map(|&a| action_to_load(a, obs.p) as i64)
                .collect(),
            actions,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Uniform,
    LoadBalanced,
    Hcmm,
    Marl,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::Uniform,
        Scheme::LoadBalanced,
        Scheme::Hcmm,
        Scheme::Marl,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Uniform => "uniform",
            Scheme::LoadBalanced => "load-balanced",
            Scheme::Hcmm => "hcmm",
            Scheme::Marl => "marl",
        }
    }

    /// Allocator for a baseline scheme; `None` for `marl`, which needs a policy.
    pub fn baseline(&self) -> Option<Box<dyn Allocator>> {
        match self {
            Scheme::Uniform => Some(Box::new(UniformAllocator)),
            Scheme::LoadBalanced => Some(Box::new(LoadBalancedAllocator)),
            Scheme::Hcmm => Some(Box::new(HcmmAllocator)),
            Scheme::Marl => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                invalid(format!(
                    "unknown scheme `{s}` (expected uniform, load-balanced, hcmm or marl)"
                ))
            })
    }
}
