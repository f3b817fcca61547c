use mahc_core::envmodels::{
    advance, channel_capacity, comm_time_with_fading, comp_time_sample, CommConfig, ComputeProfile,
    KinematicState,
};
use mahc_core::numerics::RngStream;
use proptest::prelude::*;

#[test]
fn shifted_exponential_mean_and_cdf() {
    let profile = ComputeProfile::new(1e4, 1e-4).unwrap();
    let mut rng = RngStream::new(42, 0);
    let n = 100_000;
    let draws: Vec<f64> = (0..n)
        .map(|_| comp_time_sample(100, &profile, &mut rng))
        .collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let sd = (draws.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let expected = 0.02;
    assert!(
        (mean - expected).abs() <= 3.0 * sd / (n as f64).sqrt(),
        "mean {mean}"
    );
    let cdf = draws.iter().filter(|&&t| t <= expected).count() as f64 / n as f64;
    assert!((cdf - (1.0 - (-1f64).exp())).abs() <= 0.01, "cdf {cdf}");
    assert!(draws.iter().all(|&t| t >= 0.01));
}

#[test]
fn capacity_reference_point() {
    let cfg = CommConfig::default();
    // 10^((6 - 30)/10) W received at 1 m
    let oracle = 1e4 * (1.0 + 10f64.powf(-2.4) / 1.1e-12).log2();
    let c = channel_capacity(1.0, 0.0, &cfg);
    assert!((c - oracle).abs() <= 1e-9 * oracle);
    assert!((c - 3.18e5).abs() <= 0.005e5);
}

proptest! {
    #[test]
    fn capacity_decreases_and_comm_time_increases_with_distance(
        d in 1.0f64..500.0,
        step in 0.01f64..100.0,
        omega in -3.0f64..3.0,
        rows in 1usize..1000,
    ) {
        let cfg = CommConfig::default();
        prop_assert!(channel_capacity(d + step, omega, &cfg) < channel_capacity(d, omega, &cfg));
        prop_assert!(
            comm_time_with_fading(rows, 1, d + step, omega, &cfg)
                > comm_time_with_fading(rows, 1, d, omega, &cfg)
        );
    }

    #[test]
    fn trajectories_are_linear(
        x in -100.0f64..100.0, y in -100.0f64..100.0,
        vx in -10.0f64..10.0, vy in -10.0f64..10.0,
        t1 in 0.0f64..50.0, t2 in 0.0f64..50.0,
    ) {
        let k = KinematicState { position: [x, y], velocity: [vx, vy] };
        let copy = k;
        let a = advance(&advance(&k, t1).unwrap(), t2).unwrap();
        let b = advance(&k, t1 + t2).unwrap();
        prop_assert_eq!(k, copy);
        prop_assert!((a.position[0] - b.position[0]).abs() < 1e-9);
        prop_assert!((a.position[1] - b.position[1]).abs() < 1e-9);
        prop_assert_eq!(b.velocity, [vx, vy]);
        prop_assert!((b.position[0] - (x + vx * (t1 + t2))).abs() < 1e-9);
    }

    #[test]
    fn compute_time_never_below_shift(seed in any::<u64>(), rows in 1usize..500, beta in 1e3f64..1e6) {
        let profile = ComputeProfile::new(beta, 1.0 / beta).unwrap();
        let mut rng = RngStream::new(seed, 0);
        for _ in 0..16 {
            prop_assert!(comp_time_sample(rows, &profile, &mut rng) >= rows as f64 / beta);
        }
    }
}
