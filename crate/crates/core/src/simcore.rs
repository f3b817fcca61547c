//! Discrete-event execution of the master/worker batch protocol.
//!
//! For one task the master broadcasts `x` over a dedicated link to every
//! worker with a non-zero load. A worker computes its batches back to back
//! and queues each partial result on its uplink as soon as the batch is
//! done, so computation of batch `k+1` overlaps transmission of batch `k`.
//! The master stops listening once `p` rows have arrived; anything still in
//! flight at that point is dropped.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::coding::{decode, plan_batches, uncoded_rows, worker_rows, BatchPlan, EncodingMatrix};
use crate::envmodels::{
    advance, apply_straggler, comm_time, comp_time_sample, CommConfig, ComputeProfile,
    KinematicState, StragglerPlan,
};
use crate::error::{invalid, Error, Result};
use crate::marl::{build_state, reward};
use crate::numerics::{mat_vec, sample_uniform, Matrix, RngStream, Vector};
use crate::scenario::{RewardConfig, ScenarioConfig};

// substream tags
const TAG_BROADCAST: u64 = 1;
const TAG_COMPUTE: u64 = 2;
const TAG_RESULT: u64 = 3;
const TAG_EPISODE: u64 = 10;
const TAG_ENV: u64 = 11;
const TAG_TASK: u64 = 12;
const TAG_ALLOC: u64 = 13;
const TAG_MATRIX: u64 = 14;
const TAG_CODE: u64 = 15;
const TAG_VECTOR: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkerNode {
    pub kinematics: KinematicState,
    pub profile: ComputeProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub master: KinematicState,
    pub workers: Vec<WorkerNode>,
    pub clock: f64,
}

impl WorldState {
    pub fn n_workers(&self) -> usize {
        self.workers.len()
    }

    pub fn distance(&self, worker: usize) -> f64 {
        self.workers[worker].kinematics.distance_to(&self.master)
    }

    /// Distance between master and `worker`, `dt` seconds from now.
    fn distance_after(&self, worker: usize, dt: f64) -> f64 {
        let m = self.master.position_after(dt);
        let w = self.workers[worker].kinematics.position_after(dt);
        (w[0] - m[0]).hypot(w[1] - m[1])
    }

    pub fn advanced(&self, dt: f64) -> Result<WorldState> {
        let workers = self
            .workers
            .iter()
            .map(|w| {
                Ok(WorkerNode {
                    kinematics: advance(&w.kinematics, dt)?,
                    profile: w.profile,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(WorldState {
            master: advance(&self.master, dt)?,
            workers,
            clock: self.clock + dt,
        })
    }

    pub fn profiles(&self) -> Vec<ComputeProfile> {
        self.workers.iter().map(|w| w.profile).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadAllocation {
    pub loads: Vec<usize>,
}

impl LoadAllocation {
    pub fn new(loads: Vec<usize>) -> Self {
        LoadAllocation { loads }
    }

    pub fn total(&self) -> usize {
        self.loads.iter().sum()
    }

    pub fn is_feasible(&self, p: usize) -> bool {
        self.total() >= p
    }
}

/// One partial result as seen by the master.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Receipt {
    pub worker: usize,
    pub batch: usize,
    pub rows: usize,
    /// Seconds since dispatch.
    pub arrival: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task: usize,
    /// Episode clock at dispatch.
    pub dispatch_time: f64,
    /// Seconds from dispatch until the master could decode (or, for an
    /// infeasible task, until the last row arrived).
    pub completion_time: f64,
    pub receipts: Vec<Receipt>,
    pub rows_received_at_completion: usize,
    pub feasible: bool,
    /// Relative error of the decoded product, in verification mode.
    pub decode_error: Option<f64>,
}

/// Step function `R(t)`: `(time, cumulative rows)` at each arrival, starting at `(0, 0)`.
pub fn rows_received_curve(rec: &TaskRecord) -> Vec<(f64, usize)> {
    let mut out = Vec::with_capacity(rec.receipts.len() + 1);
    out.push((0.0, 0));
    let mut total = 0;
    for r in &rec.receipts {
        total += r.rows;
        out.push((r.arrival, total));
    }
    out
}

/// Rows received by elapsed time `t`.
pub fn rows_received_at(rec: &TaskRecord, t: f64) -> usize {
    rec.receipts
        .iter()
        .filter(|r| r.arrival <= t)
        .map(|r| r.rows)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodeKind {
    Uncoded,
    Coded,
}

/// How worker rows map onto the task matrix when numbers are materialized.
#[derive(Debug, Clone, Copy)]
pub enum RowCode<'a> {
    Uncoded,
    Coded {
        enc: &'a EncodingMatrix,
        a_hat: &'a Matrix,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct Verification<'a> {
    pub a: &'a Matrix,
    pub x: &'a Vector,
    pub code: RowCode<'a>,
}

#[derive(Debug, Clone, Copy)]
pub struct TaskParams<'a> {
    pub task: usize,
    pub p: usize,
    pub m: usize,
    pub batch_size: usize,
    pub straggler: &'a StragglerPlan,
    pub comm: &'a CommConfig,
    pub verify: Option<Verification<'a>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    BroadcastArrived,
    BatchComputed,
    ResultArrived,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    worker: usize,
    batch: usize,
    kind: EventKind,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.worker.cmp(&other.worker))
            .then(self.batch.cmp(&other.batch))
            .then(self.kind.cmp(&other.kind))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

struct WorkerProcess {
    plan: BatchPlan,
    link_free: f64,
}

/// Runs one task and returns its record together with the world after it.
pub fn run_task(
    world: &WorldState,
    alloc: &LoadAllocation,
    params: &TaskParams<'_>,
    rng: &RngStream,
) -> Result<(TaskRecord, WorldState)> {
    let n = world.n_workers();
    if alloc.loads.len() != n {
        return Err(Error::DimensionMismatch {
            what: "allocation length vs worker count",
            expected: n,
            got: alloc.loads.len(),
        });
    }
    if params.batch_size == 0 {
        return Err(invalid("batch size must be at least 1"));
    }
    if let Some(&l) = alloc.loads.iter().find(|&&l| l > params.p) {
        return Err(invalid(format!("load {l} exceeds p = {}", params.p)));
    }
    if alloc.total() == 0 {
        return Err(Error::DegenerateTask);
    }

    let mut queue = BinaryHeap::new();
    let mut procs: Vec<Option<WorkerProcess>> = Vec::with_capacity(n);
    for (w, &load) in alloc.loads.iter().enumerate() {
        if load == 0 {
            procs.push(None);
            continue;
        }
        let d = world.distance(w);
        let t = comm_time(
            params.m,
            1,
            d,
            &mut rng.substream(&[TAG_BROADCAST, w as u64]),
            params.comm,
        );
        queue.push(Reverse(Event {
            time: t,
            worker: w,
            batch: 0,
            kind: EventKind::BroadcastArrived,
        }));
        procs.push(Some(WorkerProcess {
            plan: plan_batches(load, params.batch_size)?,
            link_free: 0.0,
        }));
    }

    let compute = |w: usize, k: usize, rows: usize| -> f64 {
        let t = comp_time_sample(
            rows,
            &world.workers[w].profile,
            &mut rng.substream(&[TAG_COMPUTE, w as u64, k as u64]),
        );
        apply_straggler(t, w, params.straggler)
    };

    let mut receipts = Vec::new();
    let mut received = 0usize;
    let mut completion = None;
    while let Some(Reverse(ev)) = queue.pop() {
        let proc = procs[ev.worker].as_mut().expect("event for idle worker");
        match ev.kind {
            EventKind::BroadcastArrived => {
                queue.push(Reverse(Event {
                    time: ev.time + compute(ev.worker, 0, proc.plan.sizes[0]),
                    worker: ev.worker,
                    batch: 0,
                    kind: EventKind::BatchComputed,
                }));
            }
            EventKind::BatchComputed => {
                let rows = proc.plan.sizes[ev.batch];
                let start = ev.time.max(proc.link_free);
                let d = world.distance_after(ev.worker, start);
                let dur = comm_time(
                    rows,
                    1,
                    d,
                    &mut rng.substream(&[TAG_RESULT, ev.worker as u64, ev.batch as u64]),
                    params.comm,
                );
                proc.link_free = start + dur;
                queue.push(Reverse(Event {
                    time: proc.link_free,
                    worker: ev.worker,
                    batch: ev.batch,
                    kind: EventKind::ResultArrived,
                }));
                let next = ev.batch + 1;
                if next < proc.plan.batch_count() {
                    let rows = proc.plan.sizes[next];
                    queue.push(Reverse(Event {
                        time: ev.time + compute(ev.worker, next, rows),
                        worker: ev.worker,
                        batch: next,
                        kind: EventKind::BatchComputed,
                    }));
                }
            }
            EventKind::ResultArrived => {
                let rows = proc.plan.sizes[ev.batch];
                received += rows;
                receipts.push(Receipt {
                    worker: ev.worker,
                    batch: ev.batch,
                    rows,
                    arrival: ev.time,
                });
                if received >= params.p {
                    completion = Some(ev.time);
                    break;
                }
            }
        }
    }

    let feasible = completion.is_some();
    let completion_time = match completion {
        Some(t) => t,
        None => receipts.last().map(|r| r.arrival).unwrap_or(0.0),
    };

    let decode_error = match (&params.verify, feasible) {
        (Some(v), true) => Some(verify_decode(v, alloc, &receipts, &procs, params.p)?),
        _ => None,
    };

    let record = TaskRecord {
        task: params.task,
        dispatch_time: world.clock,
        completion_time,
        receipts,
        rows_received_at_completion: received,
        feasible,
        decode_error,
    };
    let next = world.advanced(completion_time)?;
    Ok((record, next))
}

fn verify_decode(
    v: &Verification<'_>,
    alloc: &LoadAllocation,
    receipts: &[Receipt],
    procs: &[Option<WorkerProcess>],
    p: usize,
) -> Result<f64> {
    let mut idx = Vec::new();
    for r in receipts {
        let plan = &procs[r.worker]
            .as_ref()
            .expect("receipt from idle worker")
            .plan;
        let offset: usize = plan.sizes[..r.batch].iter().sum();
        let base = match v.code {
            RowCode::Uncoded => uncoded_rows(&alloc.loads, r.worker).start,
            RowCode::Coded { enc, .. } => worker_rows(enc, r.worker, alloc.loads[r.worker])?.start,
        };
        idx.extend(base + offset..base + offset + r.rows);
    }
    let (g, y) = match v.code {
        RowCode::Uncoded => {
            if let Some(&bad) = idx.iter().find(|&&i| i >= p) {
                return Err(invalid(format!(
                    "uncoded row {bad} is outside the {p}-row task matrix"
                )));
            }
            let g = Matrix::from_fn(idx.len(), p, |r, c| if idx[r] == c { 1.0 } else { 0.0 });
            (g, mat_vec(&v.a.select_rows(&idx)?, v.x)?)
        }
        RowCode::Coded { enc, a_hat } => (
            enc.matrix().select_rows(&idx)?,
            mat_vec(&a_hat.select_rows(&idx)?, v.x)?,
        ),
    };
    let recovered = decode(&g, &y)?;
    Ok(recovered.relative_error(&mat_vec(v.a, v.x)?))
}

/// What an allocation policy sees at the start of a task.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub task: usize,
    pub p: usize,
    pub world: &'a WorldState,
    /// Raw per-agent state vectors.
    pub states: &'a [Vec<f64>],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    /// Requested loads; values outside `[0, p]` get clamped by the episode runner.
    pub loads: Vec<i64>,
    /// Per-agent actions in `[0, 1]`, as stored for learning.
    pub actions: Vec<f64>,
}

impl Decision {
    pub fn from_loads(loads: &[usize], p: usize) -> Self {
        Decision {
            loads: loads.iter().map(|&l| l as i64).collect(),
            actions: loads.iter().map(|&l| l as f64 / p as f64).collect(),
        }
    }
}

pub trait Allocator: Sync {
    fn name(&self) -> &str;

    fn code(&self) -> CodeKind;

    /// Whether workers use the scenario batch size rather than one batch each.
    fn batch_processing(&self) -> bool {
        false
    }

    fn allocate(&self, obs: &Observation<'_>, rng: &mut RngStream) -> Result<Decision>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<f64>,
    pub loads: Vec<usize>,
    /// The allocator asked for loads outside `[0, p]`.
    pub clamped: bool,
    pub rewards: Vec<f64>,
    pub next_states: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub scenario: String,
    pub scheme: String,
    pub seed: u64,
    pub episode: usize,
    pub batch_size: usize,
    pub initial_world: WorldState,
    pub straggler: Option<usize>,
    pub tasks: Vec<TaskRecord>,
    pub steps: Vec<StepRecord>,
    pub total_time: f64,
}

impl EpisodeRecord {
    pub fn infeasible_count(&self) -> usize {
        self.tasks.iter().filter(|t| !t.feasible).count()
    }

    pub fn mean_task_time(&self) -> f64 {
        self.total_time / self.tasks.len() as f64
    }

    /// Sum of rewards over the episode, averaged over agents.
    pub fn total_reward(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.rewards.iter().sum::<f64>() / s.rewards.len() as f64)
            .sum()
    }
}

/// Root stream of episode `episode` under `seed`. Shared by every scheme so
/// that environment draws are paired across schemes.
pub fn episode_stream(seed: u64, episode: usize) -> RngStream {
    RngStream::new(seed, 0).substream(&[TAG_EPISODE, episode as u64])
}

fn sample_kinematics(
    s: &ScenarioConfig,
    moving: bool,
    rng: &mut RngStream,
) -> Result<KinematicState> {
    let [plo, phi] = s.position_range;
    let [vlo, vhi] = s.velocity_range;
    let position = [
        sample_uniform(plo, phi, rng)?,
        sample_uniform(plo, phi, rng)?,
    ];
    let velocity = [
        sample_uniform(vlo, vhi, rng)?,
        sample_uniform(vlo, vhi, rng)?,
    ];
    Ok(KinematicState {
        position,
        velocity: if moving { velocity } else { [0.0, 0.0] },
    })
}

/// Initial world and straggler victim for one episode.
pub fn sample_world(s: &ScenarioConfig, rng: &RngStream) -> Result<(WorldState, Option<usize>)> {
    let mut env = rng.substream(&[TAG_ENV]);
    let master = sample_kinematics(s, s.master_moves, &mut env)?;
    let mut workers = Vec::with_capacity(s.workers);
    for _ in 0..s.workers {
        let kinematics = sample_kinematics(s, true, &mut env)?;
        let beta = sample_uniform(s.beta_range[0], s.beta_range[1], &mut env)?;
        let profile = ComputeProfile::new(beta, s.alpha_rule.alpha_for(beta))?;
        workers.push(WorkerNode {
            kinematics,
            profile,
        });
    }
    // drawn unconditionally so straggler on/off runs see the same world
    let victim = env.below(s.workers);
    let world = WorldState {
        master,
        workers,
        clock: 0.0,
    };
    Ok((world, s.straggler.enabled.then_some(victim)))
}

pub fn joint_state(world: &WorldState) -> Vec<Vec<f64>> {
    (0..world.n_workers())
        .map(|i| build_state(world, i))
        .collect()
}

fn idle_task(task: usize, clock: f64) -> TaskRecord {
    TaskRecord {
        task,
        dispatch_time: clock,
        completion_time: 0.0,
        receipts: Vec::new(),
        rows_received_at_completion: 0,
        feasible: false,
        decode_error: None,
    }
}

/// Runs the `K` tasks of one episode under `allocator`. An all-zero
/// allocation is recorded as an infeasible task that takes no time.
pub fn run_episode(
    scenario: &ScenarioConfig,
    allocator: &dyn Allocator,
    reward_cfg: &RewardConfig,
    episode: usize,
    rng: &RngStream,
) -> Result<EpisodeRecord> {
    scenario.validate()?;
    let p = scenario.rows;
    let (mut world, victim) = sample_world(scenario, rng)?;
    let initial_world = world.clone();
    let straggler = match victim {
        Some(v) => StragglerPlan::targeting(v, scenario.straggler.slowdown_factor),
        None => StragglerPlan::none(),
    };
    let batch_size = if allocator.batch_processing() {
        scenario.batch_size
    } else {
        scenario.baseline_batch_size.unwrap_or(p)
    };

    let numerics = if scenario.verify {
        let a = Matrix::gaussian(p, scenario.cols, &mut rng.substream(&[TAG_MATRIX]));
        let coded = match allocator.code() {
            CodeKind::Uncoded => None,
            CodeKind::Coded => {
                let enc = crate::coding::generate_encoding_matrix(
                    p,
                    scenario.workers,
                    &mut rng.substream(&[TAG_CODE]),
                )?;
                let a_hat = crate::coding::encode(&enc, &a)?.a_hat;
                Some((enc, a_hat))
            }
        };
        Some((a, coded))
    } else {
        None
    };

    let mut tasks = Vec::with_capacity(scenario.tasks);
    let mut steps = Vec::with_capacity(scenario.tasks);
    for j in 0..scenario.tasks {
        let states = joint_state(&world);
        let decision = allocator.allocate(
            &Observation {
                task: j,
                p,
                world: &world,
                states: &states,
            },
            &mut rng.substream(&[TAG_ALLOC, j as u64]),
        )?;
        if decision.loads.len() != scenario.workers {
            return Err(Error::DimensionMismatch {
                what: "allocator output vs worker count",
                expected: scenario.workers,
                got: decision.loads.len(),
            });
        }
        let clamped = decision.loads.iter().any(|&l| l < 0 || l > p as i64);
        let alloc = LoadAllocation::new(
            decision
                .loads
                .iter()
                .map(|&l| l.clamp(0, p as i64) as usize)
                .collect(),
        );

        let x = numerics
            .as_ref()
            .map(|_| Vector::gaussian(scenario.cols, &mut rng.substream(&[TAG_VECTOR, j as u64])));
        let verify = match (&numerics, &x) {
            (Some((a, coded)), Some(x)) => Some(Verification {
                a,
                x,
                code: match coded {
                    Some((enc, a_hat)) => RowCode::Coded { enc, a_hat },
                    None => RowCode::Uncoded,
                },
            }),
            _ => None,
        };
        let params = TaskParams {
            task: j,
            p,
            m: scenario.cols,
            batch_size,
            straggler: &straggler,
            comm: &scenario.comm,
            verify,
        };
        let (record, next_world) = if alloc.total() == 0 {
            // nothing dispatched: the task fails immediately and the world stands still
            (idle_task(j, world.clock), world.clone())
        } else {
            run_task(
                &world,
                &alloc,
                &params,
                &rng.substream(&[TAG_TASK, j as u64]),
            )?
        };
        let r = reward(record.completion_time, &alloc, p, reward_cfg);
        let next_states = joint_state(&next_world);
        steps.push(StepRecord {
            states,
            actions: decision.actions,
            loads: alloc.loads,
            clamped,
            rewards: vec![r; scenario.workers],
            next_states,
        });
        tasks.push(record);
        world = next_world;
    }

    let total_time = tasks.iter().map(|t| t.completion_time).sum();
    Ok(EpisodeRecord {
        scenario: scenario.name.clone(),
        scheme: allocator.name().to_string(),
        seed: scenario.seed,
        episode,
        batch_size,
        initial_world,
        straggler: victim,
        tasks,
        steps,
        total_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envmodels::comm_time_with_fading;

    fn still(x: f64, y: f64) -> KinematicState {
        KinematicState {
            position: [x, y],
            velocity: [0.0, 0.0],
        }
    }

    fn deterministic_comm() -> CommConfig {
        CommConfig {
            noise_std_db: 0.0,
            ..CommConfig::default()
        }
    }

    fn world(workers: &[(f64, f64, f64)]) -> WorldState {
        WorldState {
            master: still(0.0, 0.0),
            workers: workers
                .iter()
                .map(|&(x, y, beta)| WorkerNode {
                    kinematics: still(x, y),
                    profile: ComputeProfile::new(beta, 1e-3).unwrap(),
                })
                .collect(),
            clock: 0.0,
        }
    }

    fn params<'a>(
        p: usize,
        m: usize,
        b: usize,
        s: &'a StragglerPlan,
        c: &'a CommConfig,
    ) -> TaskParams<'a> {
        TaskParams {
            task: 0,
            p,
            m,
            batch_size: b,
            straggler: s,
            comm: c,
            verify: None,
        }
    }

    #[test]
    fn single_worker_closed_form() {
        let comm = deterministic_comm();
        let none = StragglerPlan::none();
        let w = world(&[(3.0, 4.0, 1e300)]);
        let (p, m) = (10, 8);
        let (rec, next) = run_task(
            &w,
            &LoadAllocation::new(vec![p]),
            &params(p, m, p, &none, &comm),
            &RngStream::new(1, 0),
        )
        .unwrap();
        let expected = comm_time_with_fading(m, 1, 5.0, 0.0, &comm)
            + 1e-3 * p as f64
            + comm_time_with_fading(p, 1, 5.0, 0.0, &comm);
        assert!(
            (rec.completion_time - expected).abs() < 1e-9,
            "{} vs {expected}",
            rec.completion_time
        );
        assert!(rec.feasible);
        assert_eq!(rec.rows_received_at_completion, p);
        assert!((next.clock - rec.completion_time).abs() < 1e-15);
    }

    #[test]
    fn tie_goes_to_lower_worker_index() {
        let comm = deterministic_comm();
        let none = StragglerPlan::none();
        // mirror-image positions give equal distances
        let w = WorldState {
            master: still(0.0, 0.0),
            workers: vec![
                WorkerNode {
                    kinematics: still(6.0, 8.0),
                    profile: ComputeProfile::new(1e300, 1e-3).unwrap(),
                },
                WorkerNode {
                    kinematics: still(-6.0, -8.0),
                    profile: ComputeProfile::new(1e300, 1e-3).unwrap(),
                },
            ],
            clock: 0.0,
        };
        let p = 6;
        let (rec, _) = run_task(
            &w,
            &LoadAllocation::new(vec![p, p]),
            &params(p, 4, p, &none, &comm),
            &RngStream::new(2, 0),
        )
        .unwrap();
        let single = comm_time_with_fading(4, 1, 10.0, 0.0, &comm)
            + 1e-3 * p as f64
            + comm_time_with_fading(p, 1, 10.0, 0.0, &comm);
        assert_eq!(rec.receipts.len(), 1);
        assert_eq!(rec.receipts[0].worker, 0);
        assert!((rec.completion_time - single).abs() < 1e-7);
    }

    #[test]
    fn short_allocation_is_infeasible() {
        let comm = CommConfig::default();
        let none = StragglerPlan::none();
        let w = world(&[(10.0, 0.0, 1e4), (0.0, 20.0, 2e4)]);
        let (rec, _) = run_task(
            &w,
            &LoadAllocation::new(vec![5, 4]),
            &params(10, 5, 2, &none, &comm),
            &RngStream::new(3, 0),
        )
        .unwrap();
        assert!(!rec.feasible);
        assert_eq!(rec.rows_received_at_completion, 9);
        assert_eq!(rec.completion_time, rec.receipts.last().unwrap().arrival);
    }

    #[test]
    fn degenerate_and_oversized_allocations() {
        let comm = CommConfig::default();
        let none = StragglerPlan::none();
        let w = world(&[(10.0, 0.0, 1e4)]);
        let rng = RngStream::new(0, 0);
        assert_eq!(
            run_task(
                &w,
                &LoadAllocation::new(vec![0]),
                &params(4, 2, 1, &none, &comm),
                &rng
            )
            .unwrap_err(),
            Error::DegenerateTask
        );
        assert!(run_task(
            &w,
            &LoadAllocation::new(vec![5]),
            &params(4, 2, 1, &none, &comm),
            &rng
        )
        .is_err());
    }

    #[test]
    fn curve_steps_follow_batches() {
        let rec = TaskRecord {
            task: 0,
            dispatch_time: 0.0,
            completion_time: 3.0,
            receipts: vec![
                Receipt {
                    worker: 0,
                    batch: 0,
                    rows: 3,
                    arrival: 1.0,
                },
                Receipt {
                    worker: 0,
                    batch: 1,
                    rows: 3,
                    arrival: 2.0,
                },
                Receipt {
                    worker: 0,
                    batch: 2,
                    rows: 1,
                    arrival: 3.0,
                },
            ],
            rows_received_at_completion: 7,
            feasible: true,
            decode_error: None,
        };
        let curve = rows_received_curve(&rec);
        assert_eq!(
            curve.iter().map(|c| c.1).collect::<Vec<_>>(),
            vec![0, 3, 6, 7]
        );
        assert_eq!(rows_received_at(&rec, 0.5), 0);
        assert_eq!(rows_received_at(&rec, rec.completion_time), 7);
    }

    #[test]
    fn receipts_are_time_ordered_and_stop_at_p() {
        let comm = CommConfig::default();
        let none = StragglerPlan::none();
        let w = world(&[(10.0, 0.0, 1e4), (0.0, 50.0, 5e4), (-30.0, 5.0, 2e4)]);
        let (rec, _) = run_task(
            &w,
            &LoadAllocation::new(vec![30, 30, 30]),
            &params(40, 20, 3, &none, &comm),
            &RngStream::new(5, 0),
        )
        .unwrap();
        assert!(rec
            .receipts
            .windows(2)
            .all(|w| w[0].arrival <= w[1].arrival));
        let before_last: usize = rec.receipts[..rec.receipts.len() - 1]
            .iter()
            .map(|r| r.rows)
            .sum();
        assert!(before_last < 40 && rec.rows_received_at_completion >= 40);
    }
}
