use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ratechannel::feasible::{project_to_feasible, LinearFeasibility};

/// Random system with a known feasible simplex point `x*`; `zeros` entries of
/// `x*` are forced to 0 so the feasible set touches the boundary.
fn random_instance(rng: &mut ChaCha8Rng, beta: usize, alpha: usize, zeros: usize) -> (LinearFeasibility, Vec<f64>) {
    let mut x: Vec<f64> = (0..beta).map(|_| rng.gen_range(0.05..1.0)).collect();
    for i in 0..zeros.min(beta - 1) {
        x[i] = 0.0;
    }
    let s: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= s);
    let rows: Vec<Vec<f64>> = (0..alpha).map(|_| (0..beta).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let rhs = rows.iter().map(|r| r.iter().zip(&x).map(|(a, b)| a * b).sum()).collect();
    (LinearFeasibility::new(rows, rhs).unwrap(), x)
}

fn perturb(rng: &mut ChaCha8Rng, x: &[f64], scale: f64) -> Vec<f64> {
    let mut y: Vec<f64> = x.iter().map(|v| (v + scale * rng.gen_range(-1.0..1.0)).max(0.0)).collect();
    let s: f64 = y.iter().sum();
    y.iter_mut().for_each(|v| *v /= s);
    y
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn output_is_feasible_and_within_bound(
        seed in any::<u64>(),
        beta in 2usize..=12,
        alpha_frac in 0.0f64..1.0,
        zeros in 0usize..=3,
        scale in 1e-4f64..0.2,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let alpha = 1 + ((beta - 2) as f64 * alpha_frac) as usize;
        let (sys, x_star) = random_instance(&mut rng, beta, alpha, zeros);
        let x0 = perturb(&mut rng, &x_star, scale);
        let res = project_to_feasible(&sys, &x0).unwrap();
        prop_assert!(sys.residual_inf(&res.x) <= 1e-9);
        prop_assert!(res.x.iter().all(|&v| v >= -1e-12));
        prop_assert!((res.x.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(
            res.l1_distance <= res.bound + 1e-9,
            "l1 {} bound {} active {:?}", res.l1_distance, res.bound, res.active_set
        );
    }

    #[test]
    fn bound_shrinks_toward_interior_feasible_set(seed in any::<u64>(), beta in 2usize..=8, t in 0.05f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (sys, x_star) = random_instance(&mut rng, beta, beta / 2, 0);
        let far = perturb(&mut rng, &x_star, 0.01);
        let near: Vec<f64> = far.iter().zip(&x_star).map(|(a, b)| b + t * (a - b)).collect();
        let r_far = project_to_feasible(&sys, &far).unwrap();
        let r_near = project_to_feasible(&sys, &near).unwrap();
        prop_assume!(r_far.active_set.is_empty() && r_near.active_set.is_empty());
        prop_assert!(r_near.delta <= r_far.delta + 1e-15);
        prop_assert!(r_near.bound <= r_far.bound + 1e-12);
    }
}

/// Optimality oracle: for the Euclidean projection `x` of `x0`, every feasible
/// `z` satisfies `(x0 - x)·(z - x) <= 0`; checked at the known feasible `x*`.
#[test]
fn output_satisfies_projection_inequality() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut exact_runs = 0;
    for _ in 0..2000 {
        let beta = rng.gen_range(2..=12);
        let alpha = rng.gen_range(1..beta);
        let zeros = rng.gen_range(0..=3);
        let (sys, x_star) = random_instance(&mut rng, beta, alpha, zeros);
        let scale = rng.gen_range(1e-3..0.3);
        let x0 = perturb(&mut rng, &x_star, scale);
        let res = project_to_feasible(&sys, &x0).unwrap();
        exact_runs += res.exact_qp as usize;
        assert!(sys.residual_inf(&res.x) <= 1e-9);
        assert!(res.l1_distance <= res.bound + 1e-9, "{} > {}", res.l1_distance, res.bound);
        let ip: f64 = (0..beta).map(|j| (x0[j] - res.x[j]) * (x_star[j] - res.x[j])).sum();
        assert!(ip <= 1e-9, "projection inequality violated: {ip}");
    }
    assert!(exact_runs > 0);
}
