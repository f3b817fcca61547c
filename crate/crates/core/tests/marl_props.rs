use mahc_core::marl::{
    actor_objective_and_grad, critic_input, critic_loss_and_grad, polyak_update, reward, state_dim,
    train, Activation, AgentNets, Mlp, Transition,
};
use mahc_core::numerics::RngStream;
use mahc_core::scenario::{
    OptimizerKind, PenaltyBoundary, RewardConfig, ScenarioConfig, TrainConfig,
};
use mahc_core::simcore::LoadAllocation;
use proptest::prelude::*;

fn random_transitions(n: usize, count: usize, rng: &mut RngStream) -> Vec<Transition> {
    let d = state_dim(n);
    let vecs = |len: usize, rng: &mut RngStream| {
        (0..len).map(|_| rng.standard_normal()).collect::<Vec<_>>()
    };
    (0..count)
        .map(|_| Transition {
            states: (0..n).map(|_| vecs(d, rng)).collect(),
            actions: (0..n).map(|_| rng.next_f64()).collect(),
            rewards: vec![-rng.next_f64(); n],
            next_states: (0..n).map(|_| vecs(d, rng)).collect(),
            terminal: false,
        })
        .collect()
}

fn small_mlp(input: usize, widths: &[usize], out_act: Activation, rng: &mut RngStream) -> Mlp {
    let mut dims = vec![input];
    dims.extend_from_slice(widths);
    dims.push(1);
    let mut acts = vec![Activation::Relu; widths.len()];
    acts.push(out_act);
    Mlp::new(dims, acts, rng).unwrap()
}

fn check_grad(
    analytic: &[f64],
    params: &[f64],
    mut f: impl FnMut(&[f64]) -> f64,
) -> Result<(), TestCaseError> {
    let h = 1e-6;
    for k in 0..params.len() {
        let mut plus = params.to_vec();
        let mut minus = params.to_vec();
        plus[k] += h;
        minus[k] -= h;
        let numeric = (f(&plus) - f(&minus)) / (2.0 * h);
        let tol = 1e-5 * numeric.abs().max(analytic[k].abs()).max(1.0);
        prop_assert!(
            (numeric - analytic[k]).abs() <= tol,
            "param {}: {} vs {}",
            k,
            analytic[k],
            numeric
        );
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn critic_gradient_matches_finite_differences(seed in any::<u64>(), n in 1usize..4, w1 in 2usize..8, w2 in 2usize..8) {
        let mut rng = RngStream::new(seed, 0);
        let batch = random_transitions(n, 6, &mut rng);
        let critic = small_mlp(n * state_dim(n) + n, &[w1, w2], Activation::Linear, &mut rng);
        let inputs: Vec<Vec<f64>> = batch.iter().map(|t| critic_input(&t.states, &t.actions)).collect();
        let targets: Vec<f64> = (0..batch.len()).map(|_| rng.standard_normal()).collect();
        let (_, grad) = critic_loss_and_grad(&critic, &inputs, &targets).unwrap();
        let params = critic.params().to_vec();
        check_grad(&grad, &params, |theta| {
            let mut c = critic.clone();
            c.params_mut().copy_from_slice(theta);
            critic_loss_and_grad(&c, &inputs, &targets).unwrap().0
        })?;
    }

    #[test]
    fn actor_gradient_matches_finite_differences(seed in any::<u64>(), n in 1usize..4, agent in 0usize..3, w in 2usize..8) {
        let agent = agent % n;
        let mut rng = RngStream::new(seed, 1);
        let batch = random_transitions(n, 5, &mut rng);
        let actor = small_mlp(state_dim(n), &[w, w], Activation::Sigmoid, &mut rng);
        let critic = small_mlp(n * state_dim(n) + n, &[w], Activation::Linear, &mut rng);
        let (_, grad) = actor_objective_and_grad(&actor, &critic, &batch, agent).unwrap();
        let params = actor.params().to_vec();
        check_grad(&grad, &params, |theta| {
            let mut a = actor.clone();
            a.params_mut().copy_from_slice(theta);
            actor_objective_and_grad(&a, &critic, &batch, agent).unwrap().0
        })?;
    }

    #[test]
    fn reward_is_nonpositive_and_penalty_is_exact(
        t in 0.0f64..1e3,
        loads in prop::collection::vec(0usize..100, 1..5),
        p in 1usize..200,
    ) {
        let cfg = RewardConfig::default();
        let alloc = LoadAllocation::new(loads.clone());
        let r = reward(t, &alloc, p, &cfg);
        prop_assert!(r <= 0.0);
        let expected = if alloc.total() < p { -t - 200.0 } else { -t };
        prop_assert_eq!(r, expected);
        let inclusive = RewardConfig { boundary: PenaltyBoundary::Inclusive, ..cfg };
        prop_assert_eq!(reward(0.0, &alloc, p, &inclusive), if alloc.total() <= p { -200.0 } else { 0.0 });
    }

    #[test]
    fn polyak_contracts_target_toward_online(seed in any::<u64>(), tau in 0.01f64..0.999) {
        let mut rng = RngStream::new(seed, 2);
        let cfg = TrainConfig { hidden_width: 4, ..TrainConfig::default() };
        let mut nets = AgentNets::new(2, &cfg, &mut rng).unwrap();
        for v in nets.actor.params_mut() {
            *v += 0.5;
        }
        let gap = |n: &AgentNets| {
            n.actor.params().iter().zip(n.target_actor.params()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        };
        let before = gap(&nets);
        polyak_update(&mut nets, tau).unwrap();
        let after = gap(&nets);
        prop_assert!((after - tau * before).abs() <= 1e-9 * before.max(1.0));
    }
}

#[test]
fn state_dimension_follows_worker_count() {
    for n in 1..6 {
        assert_eq!(state_dim(n), 3 * n + 2);
        let mut rng = RngStream::new(0, 0);
        let actor = Mlp::actor(state_dim(n), 64, &mut rng).unwrap();
        assert_eq!(actor.dims(), &[3 * n + 2, 64, 64, 64, 1]);
    }
}

#[test]
fn training_is_reproducible() {
    let mut s = ScenarioConfig::preset("desk").unwrap();
    s.tasks = 2;
    let cfg = TrainConfig {
        max_iterations: 6,
        episodes_per_iteration: 3,
        batch_size: 8,
        hidden_width: 8,
        optimizer: OptimizerKind::Adam,
        ..TrainConfig::default()
    };
    let rng = RngStream::new(9, 0);
    let a = train(&s, &cfg, &rng, |_, _| {}).unwrap();
    let b = train(&s, &cfg, &rng, |_, _| {}).unwrap();
    assert_eq!(a.curve, b.curve);
    assert_eq!(a.policy(), b.policy());
    assert_eq!(a.curve.len(), 6);
}
