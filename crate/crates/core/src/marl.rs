//! Multi-agent formulation of load allocation and a MADDPG trainer.
//!
//! Every worker is an agent. Its observation is
//! `[d_i, d_-i, v_i, v_-i, v_master]` (dimension `3N + 2`) and its action is
//! the fraction of `p` rows it takes on. All agents receive the same reward,
//! the negative task completion time minus a penalty when the joint
//! allocation cannot be decoded. Each agent owns a deterministic actor over
//! its own observation and a centralized critic over the joint observation
//! and joint action, plus slowly tracking target copies of both.
//!
//! Networks are small fully connected stacks with hand-written
//! backpropagation; parameters live in one flat buffer per network so the
//! optimizers, target tracking and gradient checks can treat them uniformly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocators::PolicyAllocator;
use crate::error::{invalid, Error, Result};
use crate::numerics::RngStream;
use crate::scenario::{OptimizerKind, PenaltyBoundary, RewardConfig, ScenarioConfig, TrainConfig};
use crate::simcore::{run_episode, LoadAllocation, WorldState};

const TAG_INIT: u64 = 100;
const TAG_COLLECT: u64 = 101;
const TAG_SAMPLE: u64 = 102;

pub fn state_dim(n_workers: usize) -> usize {
    3 * n_workers + 2
}

/// Observation of agent `i`: its distance to the master, the other agents'
/// distances, its velocity, the other agents' velocities, the master's velocity.
pub fn build_state(world: &WorldState, i: usize) -> Vec<f64> {
    let n = world.n_workers();
    let mut s = Vec::with_capacity(state_dim(n));
    s.push(world.distance(i));
    s.extend((0..n).filter(|&k| k != i).map(|k| world.distance(k)));
    s.extend_from_slice(&world.workers[i].kinematics.velocity);
    for k in (0..n).filter(|&k| k != i) {
        s.extend_from_slice(&world.workers[k].kinematics.velocity);
    }
    s.extend_from_slice(&world.master.velocity);
    s
}

/// Shared reward: `-T - c * [allocation infeasible]`.
pub fn reward(completion_time: f64, loads: &LoadAllocation, p: usize, cfg: &RewardConfig) -> f64 {
    let total = loads.total();
    let penalized = match cfg.boundary {
        PenaltyBoundary::Strict => total < p,
        PenaltyBoundary::Inclusive => total <= p,
    };
    -completion_time - if penalized { cfg.penalty } else { 0.0 }
}

/// Fixed affine rescaling of raw observations before they reach a network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateScaler {
    pub distance_scale: f64,
    pub velocity_scale: f64,
}

impl StateScaler {
    /// Distances over the half-width of the deployment square times √2,
    /// velocities over the largest speed component.
    pub fn for_scenario(s: &ScenarioConfig) -> Self {
        let half = (s.position_range[1] - s.position_range[0]) / 2.0;
        let vmax = s.velocity_range[0].abs().max(s.velocity_range[1].abs());
        StateScaler {
            distance_scale: if half > 0.0 {
                half * std::f64::consts::SQRT_2
            } else {
                1.0
            },
            velocity_scale: if vmax > 0.0 { vmax } else { 1.0 },
        }
    }

    pub fn normalize(&self, state: &[f64], n_workers: usize) -> Vec<f64> {
        state
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                if k < n_workers {
                    v / self.distance_scale
                } else {
                    v / self.velocity_scale
                }
            })
            .collect()
    }

    pub fn normalize_joint(&self, states: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = states.len();
        states.iter().map(|s| self.normalize(s, n)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Linear => 1.0,
        }
    }
}

/// Fully connected network with one flat parameter buffer.
///
/// Layer `l` stores its `out x in` weights row-major, followed by `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    dims: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<f64>,
}

/// Per-layer values kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `outputs[0]` is the input; `outputs[l + 1]` is the output of layer `l`.
    outputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().expect("trace has an input")
    }
}

impl Mlp {
    pub fn zeros(dims: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 || dims.contains(&0) {
            return Err(invalid(format!(
                "bad network shape: dims {dims:?}, {} activations",
                activations.len()
            )));
        }
        let count = dims.windows(2).map(|w| w[1] * w[0] + w[1]).sum();
        Ok(Mlp {
            dims,
            activations,
            params: vec![0.0; count],
        })
    }

    /// Weights and biases uniform in `±1/sqrt(fan_in)`.
    pub fn new(
        dims: Vec<usize>,
        activations: Vec<Activation>,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let mut net = Mlp::zeros(dims, activations)?;
        let mut offset = 0;
        for l in 0..net.layers() {
            let (fan_in, fan_out) = (net.dims[l], net.dims[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_out * fan_in + fan_out] {
                *p = bound * (2.0 * rng.next_f64() - 1.0);
            }
            offset += fan_out * fan_in + fan_out;
        }
        Ok(net)
    }

    /// Three ReLU hidden layers and a sigmoid output.
    pub fn actor(input: usize, hidden: usize, rng: &mut RngStream) -> Result<Self> {
        Mlp::new(
            vec![input, hidden, hidden, hidden, 1],
            vec![
                Activation::Relu,
                Activation::Relu,
                Activation::Relu,
                Activation::Sigmoid,
            ],
            rng,
        )
    }

    /// Three ReLU hidden layers and a linear output.
    pub fn critic(input: usize, hidden: usize, rng: &mut RngStream) -> Result<Self> {
        Mlp::new(
            vec![input, hidden, hidden, hidden, 1],
            vec![
                Activation::Relu,
                Activation::Relu,
                Activation::Relu,
                Activation::Linear,
            ],
            rng,
        )
    }

    pub fn layers(&self) -> usize {
        self.activations.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Mutable view of the bias vector of layer `l`.
    pub fn biases_mut(&mut self, l: usize) -> &mut [f64] {
        let offset: usize = self
            .dims
            .windows(2)
            .take(l)
            .map(|w| w[1] * w[0] + w[1])
            .sum();
        let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
        &mut self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out]
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "network input",
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        let mut offset = 0;
        for l in 0..self.layers() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let w = &self.params[offset..offset + fan_in * fan_out];
            let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            let act = self.activations[l];
            a = (0..fan_out)
                .map(|o| {
                    let z: f64 = w[o * fan_in..(o + 1) * fan_in]
                        .iter()
                        .zip(&a)
                        .map(|(wi, ai)| wi * ai)
                        .sum::<f64>()
                        + b[o];
                    act.apply(z)
                })
                .collect();
            offset += fan_in * fan_out + fan_out;
        }
        Ok(a)
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let mut outputs = Vec::with_capacity(self.layers() + 1);
        let mut pre = Vec::with_capacity(self.layers());
        outputs.push(x.to_vec());
        let mut offset = 0;
        for l in 0..self.layers() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let w = &self.params[offset..offset + fan_in * fan_out];
            let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            let input = &outputs[l];
            let z: Vec<f64> = (0..fan_out)
                .map(|o| {
                    w[o * fan_in..(o + 1) * fan_in]
                        .iter()
                        .zip(input)
                        .map(|(wi, ai)| wi * ai)
                        .sum::<f64>()
                        + b[o]
                })
                .collect();
            let act = self.activations[l];
            outputs.push(z.iter().map(|&v| act.apply(v)).collect());
            pre.push(z);
            offset += fan_in * fan_out + fan_out;
        }
        Ok(Trace { outputs, pre })
    }

    /// Backpropagates `grad_out` (dL/d output) through a recorded pass.
    ///
    /// Parameter gradients are accumulated into `grad_params` when given;
    /// the gradient with respect to the input is returned.
    pub fn backward(
        &self,
        trace: &Trace,
        grad_out: &[f64],
        mut grad_params: Option<&mut [f64]>,
    ) -> Vec<f64> {
        let offsets: Vec<usize> = self
            .dims
            .windows(2)
            .scan(0, |acc, w| {
                let o = *acc;
                *acc += w[1] * w[0] + w[1];
                Some(o)
            })
            .collect();
        let last = self.layers() - 1;
        let mut delta: Vec<f64> = grad_out
            .iter()
            .zip(&trace.pre[last])
            .zip(&trace.outputs[last + 1])
            .map(|((g, &z), &a)| g * self.activations[last].derivative(z, a))
            .collect();

        for l in (0..self.layers()).rev() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let offset = offsets[l];
            let input = &trace.outputs[l];
            if let Some(g) = grad_params.as_deref_mut() {
                for o in 0..fan_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &mut g[offset + o * fan_in..offset + (o + 1) * fan_in];
                    for (gw, &x) in row.iter_mut().zip(input) {
                        *gw += d * x;
                    }
                    g[offset + fan_in * fan_out + o] += d;
                }
            }
            let w = &self.params[offset..offset + fan_in * fan_out];
            let mut grad_in = vec![0.0; fan_in];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (gi, &wi) in grad_in.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                    *gi += wi * d;
                }
            }
            if l == 0 {
                return grad_in;
            }
            let act = self.activations[l - 1];
            delta = grad_in
                .iter()
                .zip(&trace.pre[l - 1])
                .zip(&trace.outputs[l])
                .map(|((g, &z), &a)| g * act.derivative(z, a))
                .collect();
        }
        unreachable!("network has at least one layer")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        step: u64,
        m: Vec<f64>,
        v: Vec<f64>,
    },
    Sgd {
        lr: f64,
    },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, n_params: usize) -> Self {
        match kind {
            OptimizerKind::Adam => Optimizer::Adam {
                lr,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                step: 0,
                m: vec![0.0; n_params],
                v: vec![0.0; n_params],
            },
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
        }
    }

    /// One descent step along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        match self {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= *lr * g;
                }
            }
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                eps,
                step,
                m,
                v,
            } => {
                *step += 1;
                let bc1 = 1.0 - beta1.powi(*step as i32);
                let bc2 = 1.0 - beta2.powi(*step as i32);
                for k in 0..params.len() {
                    let g = grad[k];
                    m[k] = *beta1 * m[k] + (1.0 - *beta1) * g;
                    v[k] = *beta2 * v[k] + (1.0 - *beta2) * g * g;
                    let m_hat = m[k] / bc1;
                    let v_hat = v[k] / bc2;
                    params[k] -= *lr * m_hat / (v_hat.sqrt() + *eps);
                }
            }
        }
    }
}

/// Actor, critic, their targets and optimizer state for one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentNets {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    pub actor_opt: Optimizer,
    pub critic_opt: Optimizer,
}

impl AgentNets {
    pub fn new(n_workers: usize, cfg: &TrainConfig, rng: &mut RngStream) -> Result<Self> {
        let sd = state_dim(n_workers);
        let actor = Mlp::actor(sd, cfg.hidden_width, rng)?;
        let critic = Mlp::critic(n_workers * sd + n_workers, cfg.hidden_width, rng)?;
        Ok(AgentNets::from_networks(
            actor,
            critic,
            cfg.optimizer,
            cfg.actor_lr,
            cfg.critic_lr,
        ))
    }

    pub fn from_networks(
        actor: Mlp,
        critic: Mlp,
        kind: OptimizerKind,
        actor_lr: f64,
        critic_lr: f64,
    ) -> Self {
        AgentNets {
            actor_opt: Optimizer::new(kind, actor_lr, actor.params().len()),
            critic_opt: Optimizer::new(kind, critic_lr, critic.params().len()),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
        }
    }
}

/// Deterministic action in `(0, 1)` for a normalized observation.
pub fn actor_forward(nets: &AgentNets, state: &[f64]) -> Result<f64> {
    Ok(nets.actor.forward(state)?[0])
}

/// Critic input: every agent's normalized observation, then the joint action.
pub fn critic_input(states: &[Vec<f64>], actions: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = states.iter().flatten().copied().collect();
    x.extend_from_slice(actions);
    x
}

pub fn critic_forward(nets: &AgentNets, states: &[Vec<f64>], actions: &[f64]) -> Result<f64> {
    Ok(nets.critic.forward(&critic_input(states, actions))?[0])
}

/// Stored experience. States are already normalized; actions are in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<Vec<f64>>,
    /// Last task of an episode; its target does not bootstrap.
    pub terminal: bool,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Appends, overwriting the oldest entry once full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// `n` entries drawn uniformly with replacement.
    pub fn sample(&self, n: usize, rng: &mut RngStream) -> Result<Vec<Transition>> {
        if self.items.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        Ok((0..n)
            .map(|_| self.items[rng.below(self.items.len())].clone())
            .collect())
    }
}

/// `r_i + γ Q'_i(s', π'(s'))`, with no bootstrap on terminal transitions.
pub fn td_targets(
    agents: &[AgentNets],
    agent: usize,
    batch: &[Transition],
    gamma: f64,
) -> Result<Vec<f64>> {
    batch
        .iter()
        .map(|t| {
            if t.terminal || gamma == 0.0 {
                return Ok(t.rewards[agent]);
            }
            let next_actions = agents
                .iter()
                .zip(&t.next_states)
                .map(|(a, s)| Ok(a.target_actor.forward(s)?[0]))
                .collect::<Result<Vec<_>>>()?;
            let q = agents[agent]
                .target_critic
                .forward(&critic_input(&t.next_states, &next_actions))?[0];
            Ok(t.rewards[agent] + gamma * q)
        })
        .collect()
}

/// Mean squared TD error and its gradient with respect to the critic parameters.
pub fn critic_loss_and_grad(
    critic: &Mlp,
    inputs: &[Vec<f64>],
    targets: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(invalid(
            "critic batch must be non-empty and match its targets",
        ));
    }
    let scale = 1.0 / inputs.len() as f64;
    let mut grad = vec![0.0; critic.params().len()];
    let mut loss = 0.0;
    for (x, &y) in inputs.iter().zip(targets) {
        let trace = critic.forward_trace(x)?;
        let err = trace.output()[0] - y;
        loss += err * err * scale;
        critic.backward(&trace, &[2.0 * err * scale], Some(&mut grad));
    }
    Ok((loss, grad))
}

/// One TD step on agent `agent`'s critic. Returns the loss before the step.
pub fn critic_update(
    agents: &mut [AgentNets],
    agent: usize,
    batch: &[Transition],
    gamma: f64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(invalid("critic update needs a non-empty batch"));
    }
    let targets = td_targets(agents, agent, batch, gamma)?;
    let inputs: Vec<Vec<f64>> = batch
        .iter()
        .map(|t| critic_input(&t.states, &t.actions))
        .collect();
    let nets = &mut agents[agent];
    let (loss, grad) = critic_loss_and_grad(&nets.critic, &inputs, &targets)?;
    nets.critic_opt.step(nets.critic.params_mut(), &grad);
    Ok(loss)
}

/// Batch mean of `Q_i(s, a)` with `a_i = π_i(s_i)`, and its gradient with
/// respect to the actor parameters (chain rule `∇θ π · ∇a_i Q`).
pub fn actor_objective_and_grad(
    actor: &Mlp,
    critic: &Mlp,
    batch: &[Transition],
    agent: usize,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(invalid("actor update needs a non-empty batch"));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grad = vec![0.0; actor.params().len()];
    let mut objective = 0.0;
    let n = batch[0].actions.len();
    let action_slot = critic.input_dim() - n + agent;
    for t in batch {
        let a_trace = actor.forward_trace(&t.states[agent])?;
        let mut actions = t.actions.clone();
        actions[agent] = a_trace.output()[0];
        let c_trace = critic.forward_trace(&critic_input(&t.states, &actions))?;
        objective += c_trace.output()[0] * scale;
        let dq_dx = critic.backward(&c_trace, &[scale], None);
        actor.backward(&a_trace, &[dq_dx[action_slot]], Some(&mut grad));
    }
    Ok((objective, grad))
}

/// One ascent step on agent `agent`'s policy. Returns the objective before the step.
pub fn actor_update(agents: &mut [AgentNets], agent: usize, batch: &[Transition]) -> Result<f64> {
    let nets = &mut agents[agent];
    let (objective, grad) = actor_objective_and_grad(&nets.actor, &nets.critic, batch, agent)?;
    let descent: Vec<f64> = grad.iter().map(|g| -g).collect();
    nets.actor_opt.step(nets.actor.params_mut(), &descent);
    Ok(objective)
}

/// `θ' ← τ θ' + (1 − τ) θ` for both targets.
pub fn polyak_update(nets: &mut AgentNets, tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(invalid(format!("polyak factor {tau} must lie in (0, 1)")));
    }
    let blend = |target: &mut Mlp, online: &Mlp| {
        for (t, &o) in target.params_mut().iter_mut().zip(online.params()) {
            *t = tau * *t + (1.0 - tau) * o;
        }
    };
    blend(&mut nets.target_actor, &nets.actor);
    blend(&mut nets.target_critic, &nets.critic);
    Ok(())
}

/// Transitions of an episode in network space, rewards multiplied by `reward_scale`.
pub fn episode_transitions(
    rec: &crate::simcore::EpisodeRecord,
    scaler: &StateScaler,
    reward_scale: f64,
) -> Vec<Transition> {
    let k = rec.steps.len();
    rec.steps
        .iter()
        .enumerate()
        .map(|(j, step)| Transition {
            states: scaler.normalize_joint(&step.states),
            actions: step.actions.clone(),
            rewards: step.rewards.iter().map(|r| r * reward_scale).collect(),
            next_states: scaler.normalize_joint(&step.next_states),
            terminal: j + 1 == k,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agents: Vec<AgentNets>,
    pub scaler: StateScaler,
    /// Mean total episode reward per iteration.
    pub curve: Vec<f64>,
}

impl TrainOutcome {
    pub fn policy(&self) -> TrainedPolicy {
        TrainedPolicy {
            actors: self.agents.iter().map(|a| a.actor.clone()).collect(),
            scaler: self.scaler,
        }
    }
}

/// Frozen actors ready for allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPolicy {
    pub actors: Vec<Mlp>,
    pub scaler: StateScaler,
}

/// Runs MADDPG on `scenario`. `on_iteration` sees each iteration's mean total reward.
pub fn train(
    scenario: &ScenarioConfig,
    cfg: &TrainConfig,
    rng: &RngStream,
    mut on_iteration: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    scenario.validate()?;
    cfg.validate()?;
    let n = scenario.workers;
    let scaler = StateScaler::for_scenario(scenario);
    let mut agents = (0..n)
        .map(|i| AgentNets::new(n, cfg, &mut rng.substream(&[TAG_INIT, i as u64])))
        .collect::<Result<Vec<_>>>()?;
    let mut buffer = ReplayBuffer::new(cfg.replay_capacity);
    let mut curve = Vec::with_capacity(cfg.max_iterations);
    let warmup = cfg.batch_size.min(cfg.replay_capacity);

    for it in 0..cfg.max_iterations {
        let policy = PolicyAllocator::exploring(
            TrainedPolicy {
                actors: agents.iter().map(|a| a.actor.clone()).collect(),
                scaler,
            },
            cfg.noise_at(it),
        );
        let episodes = (0..cfg.episodes_per_iteration)
            .into_par_iter()
            .map(|e| {
                let stream = rng.substream(&[TAG_COLLECT, it as u64, e as u64]);
                run_episode(
                    scenario,
                    &policy,
                    &cfg.reward,
                    it * cfg.episodes_per_iteration + e,
                    &stream,
                )
            })
            .collect::<Result<Vec<_>>>()?;

        let mean_reward =
            episodes.iter().map(|e| e.total_reward()).sum::<f64>() / episodes.len() as f64;
        for ep in &episodes {
            for t in episode_transitions(ep, &scaler, cfg.reward_scale) {
                buffer.push(t);
            }
        }
        curve.push(mean_reward);
        on_iteration(it, mean_reward);

        if buffer.len() < warmup {
            continue;
        }
        for u in 0..cfg.updates_per_iteration {
            for i in 0..n {
                let batch = buffer.sample(
                    cfg.batch_size,
                    &mut rng.substream(&[TAG_SAMPLE, it as u64, u as u64, i as u64]),
                )?;
                critic_update(&mut agents, i, &batch, cfg.gamma)?;
                actor_update(&mut agents, i, &batch)?;
                polyak_update(&mut agents[i], cfg.tau)?;
            }
        }
    }

    Ok(TrainOutcome {
        agents,
        scaler,
        curve,
    })
}

pub const CHECKPOINT_FORMAT: &str = "mahc-maddpg-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub actor: Mlp,
    pub critic: Mlp,
}

/// JSON checkpoint holding every agent's actor and critic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub scenario: String,
    pub workers: usize,
    pub rows: usize,
    pub scaler: StateScaler,
    pub agents: Vec<AgentCheckpoint>,
}

impl Checkpoint {
    pub fn from_outcome(outcome: &TrainOutcome, scenario: &ScenarioConfig) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            scenario: scenario.name.clone(),
            workers: scenario.workers,
            rows: scenario.rows,
            scaler: outcome.scaler,
            agents: outcome
                .agents
                .iter()
                .map(|a| AgentCheckpoint {
                    actor: a.actor.clone(),
                    critic: a.critic.clone(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        if ck.agents.len() != ck.workers {
            return Err(Error::Checkpoint(format!(
                "{} agents stored for {} workers",
                ck.agents.len(),
                ck.workers
            )));
        }
        let sd = state_dim(ck.workers);
        for a in &ck.agents {
            if a.actor.input_dim() != sd || a.actor.output_dim() != 1 {
                return Err(Error::Checkpoint(
                    "actor shape does not match the worker count".into(),
                ));
            }
            let expected_params: usize =
                a.actor.dims().windows(2).map(|w| w[1] * w[0] + w[1]).sum();
            if a.actor.params().len() != expected_params {
                return Err(Error::Checkpoint(
                    "actor parameter count does not match its shape".into(),
                ));
            }
        }
        Ok(ck)
    }

    pub fn policy(&self) -> TrainedPolicy {
        TrainedPolicy {
            actors: self.agents.iter().map(|a| a.actor.clone()).collect(),
            scaler: self.scaler,
        }
    }
}
