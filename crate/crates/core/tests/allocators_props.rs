use mahc_core::allocators::{
    hcmm_alloc, hcmm_solution, load_balanced_alloc, solve_hcmm_lambda, solve_hcmm_z, uniform_alloc,
};
use mahc_core::envmodels::ComputeProfile;
use proptest::prelude::*;

fn profiles(betas: &[f64], ab: &[f64]) -> Vec<ComputeProfile> {
    betas
        .iter()
        .zip(ab)
        .map(|(&b, &k)| ComputeProfile::new(b, k / b).unwrap())
        .collect()
}

// plain bisection on e^z - e^{ab}(1 + z), written independently of the library
fn oracle_z(ab: f64) -> f64 {
    let f = |z: f64| z - ab - (1.0 + z).ln();
    let (mut lo, mut hi) = (0.0, 1.0 + 2.0 * ab + 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

proptest! {
    #[test]
    fn baseline_allocations_cover_p(p in 1usize..20_000, betas in prop::collection::vec(1e4f64..1e5, 1..8)) {
        let n = betas.len();
        let u = uniform_alloc(p, n).unwrap();
        prop_assert_eq!(u.total(), p);
        prop_assert!(u.loads.iter().max().unwrap() - u.loads.iter().min().unwrap() <= 1);
        let ab = vec![1.0; n];
        let lb = load_balanced_alloc(p, &profiles(&betas, &ab)).unwrap();
        prop_assert_eq!(lb.total(), p);
    }

    #[test]
    fn hcmm_root_satisfies_defining_equation(beta in 1e4f64..1e5, ab in 1e-3f64..20.0) {
        let profile = ComputeProfile::new(beta, ab / beta).unwrap();
        let lambda = solve_hcmm_lambda(&profile).unwrap();
        let z = beta * lambda;
        let lhs = z.exp();
        let rhs = (profile.alpha * beta).exp() * (z + 1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs);
        prop_assert!((z - oracle_z(ab)).abs() <= 1e-9 * z.max(1.0));
        prop_assert_eq!(solve_hcmm_lambda(&profile).unwrap().to_bits(), lambda.to_bits());
    }

    #[test]
    fn hcmm_loads_positive_feasible_and_scale_consistent(
        p in 1usize..5000,
        betas in prop::collection::vec(1e4f64..1e5, 1..6),
    ) {
        let ps = profiles(&betas, &vec![1.0; betas.len()]);
        let a = hcmm_solution(p, &ps).unwrap();
        let b = hcmm_solution(2 * p, &ps).unwrap();
        prop_assert!(a.loads.iter().all(|&l| l > 0 && l <= p));
        prop_assert!(a.loads.iter().sum::<usize>() >= p);
        for (x, y) in a.real_loads.iter().zip(&b.real_loads) {
            prop_assert!((2.0 * x - y).abs() <= 1e-9 * y);
        }
    }

    #[test]
    fn faster_workers_never_get_less(p in 100usize..5000, betas in prop::collection::vec(1e4f64..1e5, 2..6)) {
        let ps = profiles(&betas, &vec![1.0; betas.len()]);
        let loads = hcmm_alloc(p, &ps).unwrap().loads;
        for i in 0..betas.len() {
            for j in 0..betas.len() {
                if betas[i] > betas[j] {
                    prop_assert!(loads[i] >= loads[j]);
                }
            }
        }
    }
}

#[test]
fn unit_alpha_beta_family_root() {
    let z = solve_hcmm_z(1.0).unwrap();
    assert!((z - 2.1462).abs() < 1e-3);
    assert!((z - oracle_z(1.0)).abs() < 1e-12);
}
