use mahc_core::allocators::{HcmmAllocator, Scheme, UniformAllocator};
use mahc_core::envmodels::{
    comm_time_with_fading, CommConfig, ComputeProfile, KinematicState, StragglerPlan,
};
use mahc_core::numerics::RngStream;
use mahc_core::scenario::{RewardConfig, ScenarioConfig};
use mahc_core::simcore::{
    episode_stream, rows_received_at, run_episode, run_task, LoadAllocation, TaskParams,
    WorkerNode, WorldState,
};
use proptest::prelude::*;

fn world(positions: &[[f64; 2]], betas: &[f64], alpha: Option<f64>, moving: bool) -> WorldState {
    let workers = positions
        .iter()
        .zip(betas)
        .enumerate()
        .map(|(i, (&position, &beta))| WorkerNode {
            kinematics: KinematicState {
                position,
                velocity: if moving {
                    [1.0 + i as f64, -2.0]
                } else {
                    [0.0, 0.0]
                },
            },
            profile: ComputeProfile::new(beta, alpha.unwrap_or(1.0 / beta)).unwrap(),
        })
        .collect();
    WorldState {
        master: KinematicState {
            position: [0.0, 0.0],
            velocity: if moving { [0.5, 0.5] } else { [0.0, 0.0] },
        },
        workers,
        clock: 0.0,
    }
}

fn params<'a>(
    p: usize,
    m: usize,
    b: usize,
    straggler: &'a StragglerPlan,
    comm: &'a CommConfig,
) -> TaskParams<'a> {
    TaskParams {
        task: 0,
        p,
        m,
        batch_size: b,
        straggler,
        comm,
        verify: None,
    }
}

fn loads_strategy() -> impl Strategy<Value = (usize, Vec<usize>)> {
    (1usize..60, 1usize..5).prop_flat_map(|(p, n)| (Just(p), prop::collection::vec(0..=p, n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn receipts_are_time_ordered_and_ack_stops_at_p(
        seed in any::<u64>(),
        (p, mut loads) in loads_strategy(),
        b in 1usize..10,
        straggle in any::<bool>(),
    ) {
        if loads.iter().sum::<usize>() == 0 {
            loads[0] = p;
        }
        let n = loads.len();
        let positions: Vec<[f64; 2]> = (0..n).map(|i| [10.0 + 7.0 * i as f64, -5.0]).collect();
        let w = world(&positions, &vec![3e4; n], None, true);
        let comm = CommConfig::default();
        let plan = if straggle { StragglerPlan::targeting(0, 10.0) } else { StragglerPlan::none() };
        let (rec, next) = run_task(&w, &LoadAllocation::new(loads.clone()), &params(p, 8, b, &plan, &comm), &RngStream::new(seed, 0)).unwrap();
        prop_assert!(rec.receipts.windows(2).all(|r| r[0].arrival <= r[1].arrival));
        let total: usize = loads.iter().sum();
        prop_assert_eq!(rec.feasible, total >= p);
        if rec.feasible {
            let t = rec.completion_time;
            prop_assert!(rows_received_at(&rec, t) >= p);
            let before = rec.receipts.iter().filter(|r| r.arrival < t).map(|r| r.rows).sum::<usize>();
            prop_assert!(before < p);
        }
        prop_assert!((next.clock - rec.completion_time).abs() < 1e-12);
    }

    #[test]
    fn extra_rows_never_slow_a_streamed_task(
        seed in any::<u64>(),
        (p, loads) in loads_strategy(),
        who in 0usize..4,
    ) {
        let n = loads.len();
        let who = who % n;
        prop_assume!(loads.iter().sum::<usize>() >= p && loads[who] < p);
        let positions: Vec<[f64; 2]> = (0..n).map(|i| [20.0, 9.0 * i as f64]).collect();
        let w = world(&positions, &vec![5e4; n], None, true);
        let comm = CommConfig::default();
        let plan = StragglerPlan::none();
        let rng = RngStream::new(seed, 0);
        let base = run_task(&w, &LoadAllocation::new(loads.clone()), &params(p, 8, 1, &plan, &comm), &rng).unwrap().0;
        let mut more = loads.clone();
        more[who] += 1;
        let grown = run_task(&w, &LoadAllocation::new(more), &params(p, 8, 1, &plan, &comm), &rng).unwrap().0;
        prop_assert!(grown.completion_time <= base.completion_time);
    }

    #[test]
    fn deterministic_fork_join_matches_closed_form(
        xs in prop::collection::vec((5.0f64..150.0, -150.0f64..150.0, 1usize..40), 1..5),
        alpha in 1e-4f64..1e-2,
    ) {
        let positions: Vec<[f64; 2]> = xs.iter().map(|&(x, y, _)| [x, y]).collect();
        let loads: Vec<usize> = xs.iter().map(|&(_, _, l)| l).collect();
        let p: usize = loads.iter().sum();
        let m = 16;
        let w = world(&positions, &vec![1e300; loads.len()], Some(alpha), false);
        let comm = CommConfig { noise_std_db: 0.0, ..CommConfig::default() };
        let plan = StragglerPlan::none();
        let rec = run_task(&w, &LoadAllocation::new(loads.clone()), &params(p, m, p, &plan, &comm), &RngStream::new(1, 1)).unwrap().0;
        let oracle = positions
            .iter()
            .zip(&loads)
            .map(|(pos, &l)| {
                let d = pos[0].hypot(pos[1]);
                comm_time_with_fading(m, 1, d, 0.0, &comm) + alpha * l as f64 + comm_time_with_fading(l, 1, d, 0.0, &comm)
            })
            .fold(0.0, f64::max);
        prop_assert!((rec.completion_time - oracle).abs() <= 1e-9 * oracle);
    }
}

fn small_scenario(verify: bool) -> ScenarioConfig {
    let mut s = ScenarioConfig::with_shape("small", 3, 30, 12, 3);
    s.verify = verify;
    s.seed = 5;
    s.batch_size = 4;
    s.baseline_batch_size = Some(7);
    s.straggler.enabled = true;
    s
}

#[test]
fn episodes_are_reproducible_and_paired_across_schemes() {
    let s = small_scenario(false);
    let reward = RewardConfig::default();
    for e in 0..4 {
        let rng = episode_stream(s.seed, e);
        let a = run_episode(&s, &UniformAllocator, &reward, e, &rng).unwrap();
        let again = run_episode(&s, &UniformAllocator, &reward, e, &rng).unwrap();
        assert_eq!(a, again);
        let h = run_episode(&s, &HcmmAllocator, &reward, e, &rng).unwrap();
        assert_eq!(a.initial_world, h.initial_world);
        assert_eq!(a.straggler, h.straggler);
    }
    let e0 = run_episode(
        &s,
        &UniformAllocator,
        &reward,
        0,
        &episode_stream(s.seed, 0),
    )
    .unwrap();
    let e1 = run_episode(
        &s,
        &UniformAllocator,
        &reward,
        1,
        &episode_stream(s.seed, 1),
    )
    .unwrap();
    assert_ne!(e0.initial_world, e1.initial_world);
}

#[test]
fn straggler_switch_keeps_the_world() {
    let mut on = small_scenario(false);
    let mut off = on.clone();
    off.straggler.enabled = false;
    on.straggler.enabled = true;
    let reward = RewardConfig::default();
    let rng = episode_stream(3, 2);
    let a = run_episode(&on, &UniformAllocator, &reward, 2, &rng).unwrap();
    let b = run_episode(&off, &UniformAllocator, &reward, 2, &rng).unwrap();
    assert_eq!(a.initial_world, b.initial_world);
    assert!(a.straggler.is_some() && b.straggler.is_none());
}

#[test]
fn verified_tasks_decode_to_the_true_product() {
    let s = small_scenario(true);
    let reward = RewardConfig::default();
    for scheme in [Scheme::Uniform, Scheme::LoadBalanced, Scheme::Hcmm] {
        let alloc = scheme.baseline().unwrap();
        for e in 0..3 {
            let rec =
                run_episode(&s, alloc.as_ref(), &reward, e, &episode_stream(s.seed, e)).unwrap();
            for t in &rec.tasks {
                assert!(t.feasible);
                let err = t.decode_error.unwrap();
                assert!(err <= 1e-8, "{scheme} episode {e}: {err}");
            }
        }
    }
}
