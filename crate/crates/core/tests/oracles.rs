mod common;

use bbaudio::attack::estimate_gradient;
use bbaudio::bayes::{flipout_forward, kl_gaussian, VariationalDense};
use bbaudio::seed;
use common::oracles::*;
use rand::Rng;

fn ok(check: Check) {
    match check {
        Ok(msg) => println!("{msg}"),
        Err(msg) => panic!("{msg}"),
    }
}

#[test]
fn wasserstein_equals_brute_force_assignment() {
    ok(w1_matches_assignment(200));
}

#[test]
fn brute_force_assignment_known_values() {
    assert_eq!(brute_force_w1(&[0.0, 1.0], &[1.0, 2.0]), 1.0);
    assert_eq!(brute_force_w1(&[3.0], &[0.0]), 3.0);
    assert_eq!(brute_force_w1(&[0.0, 10.0], &[10.0, 0.0]), 0.0);
}

#[test]
fn auc_equals_pair_counting() {
    ok(auc_matches_pair_counting(300));
}

#[test]
fn pair_counting_known_value() {
    assert_eq!(pair_count_auc(&[0.9, 0.4], &[0.6, 0.1]), 0.75);
}

#[test]
fn kl_equals_monte_carlo() {
    ok(kl_matches_monte_carlo(1_000_000));
}

#[test]
fn kl_single_weight_unit_prior() {
    let layer = VariationalDense::new(1, 1, &[1.0], &[0.0], 1.0, 1.0).unwrap();
    // bias term has μ = 0, σ = σ_p, so only the weight's μ²/2 remains
    assert!((kl_gaussian(&layer) - 0.5).abs() < 1e-12);
}

#[test]
fn zeroth_order_d_scaled_estimate_matches_quadratic() {
    ok(zo_matches_quadratic_gradient(10, 10_000));
}

#[test]
fn zeroth_order_single_draw_is_exact_for_linear() {
    let mut rng = seed::rng(41);
    let a: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let f = |z: &[f64]| -> bbaudio::Result<f64> { Ok(z.iter().zip(&a).map(|(x, y)| x * y).sum()) };
    let z0 = vec![0.3; 12];
    let f0 = f(&z0).unwrap();
    for beta in [1e-3, 0.5, 7.0] {
        let mut r1 = seed::rng(77);
        let g = estimate_gradient(f, &z0, f0, 1, beta, 1.0, &mut r1).unwrap();
        let norm: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let u: Vec<f64> = g.iter().map(|v| v / norm).collect();
        let au: f64 = a.iter().zip(&u).map(|(x, y)| x * y).sum();
        for (gi, ui) in g.iter().zip(&u) {
            assert!((gi - au * ui).abs() < 1e-9 * (1.0 + au.abs()), "beta {beta}");
        }
    }
}

#[test]
fn zeroth_order_linear_average_recovers_slope() {
    let d = 6;
    let draws = 100_000;
    let mut rng = seed::rng(43);
    let a: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let f = |z: &[f64]| -> bbaudio::Result<f64> { Ok(z.iter().zip(&a).map(|(x, y)| x * y).sum()) };
    let z0 = vec![0.0; d];
    // per-draw samples for standard errors
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    for _ in 0..draws {
        let g = estimate_gradient(f, &z0, 0.0, 1, 1e-3, d as f64, &mut rng).unwrap();
        for i in 0..d {
            sum[i] += g[i];
            sum_sq[i] += g[i] * g[i];
        }
    }
    let n = draws as f64;
    for i in 0..d {
        let mean = sum[i] / n;
        let se = ((sum_sq[i] / n - mean * mean) / n).sqrt();
        assert!(
            (mean - a[i]).abs() <= 3.0 * se,
            "coord {i}: {mean} vs {} (SE {se})",
            a[i]
        );
    }
}

#[test]
fn zeroth_order_constant_function_gives_zero() {
    let mut rng = seed::rng(44);
    let g = estimate_gradient(|_| Ok(2.5), &[0.1, 0.2, 0.3], 2.5, 50, 1e-3, 3.0, &mut rng).unwrap();
    assert!(g.iter().all(|v| *v == 0.0));
}

#[test]
fn classifier_gradient_equals_finite_differences() {
    ok(classifier_gradient_matches_fd(20));
}

#[test]
fn elbo_gradient_equals_finite_differences() {
    ok(elbo_gradient_matches_fd(20));
}

#[test]
fn flipout_is_unbiased() {
    ok(flipout_unbiased(10_000));
}

#[test]
fn flipout_decorrelates_examples() {
    ok(flipout_decorrelated(10_000));
}

#[test]
fn flipout_is_seed_deterministic() {
    ok(flipout_seed_deterministic());
}

#[test]
fn flipout_zero_sigma_matches_mean_dense() {
    let layer = VariationalDense::new(2, 2, &[1.0, -2.0, 0.5, 3.0], &[0.1, -0.1], 0.3, 1.0)
        .unwrap()
        .with_sigma_scale(0.0);
    let x = [0.7, -0.4];
    let out = flipout_forward(&layer, &[&x], 9).unwrap();
    assert_eq!(out.outputs[0], layer.mean_forward(&x));
}
