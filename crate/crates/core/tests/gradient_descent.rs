mod common;

use common::*;
use conecs_core::distributions::{presets, SupportDistribution};
use conecs_core::estimators::estimate_delta_difference;
use conecs_core::gradient::{descend, estimate_gradient, gradient_sample, Termination, WEIGHT_FLOOR};
use conecs_core::{ConeSpec, DescentConfig, RngSeed, WeightVector};
use proptest::prelude::*;
use rand::Rng;

fn sq_norm(w: &[f64], support: &[usize], z: &[f64]) -> (f64, usize) {
    let w = WeightVector::new(w.to_vec()).unwrap();
    let cone = ConeSpec::new(&w, support).unwrap();
    let wit = cone.project(&cone.to_cone_coordinates(z).unwrap()).unwrap();
    (wit.sq_norm, wit.m)
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut r = rng(41);
    let h = 1e-5;
    let mut checked = 0;
    let mut nontrivial = 0;
    while checked < 100 {
        let d = r.random_range(2..=8);
        let w = random_weights(&mut r, d, 0.3, 3.0);
        let support = random_proper_support(&mut r, d);
        let z: Vec<f64> = gaussian_vec(&mut r, d);
        let sample = gradient_sample(&support, &WeightVector::new(w.clone()).unwrap(), &z).unwrap();
        if !sample.valid {
            continue;
        }
        let (_, m) = sq_norm(&w, &support, &z);
        let mut fd = vec![0.0; d];
        let mut smooth = true;
        for s in 0..d {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[s] += h;
            wm[s] -= h;
            let (fp, mp) = sq_norm(&wp, &support, &z);
            let (fm, mm) = sq_norm(&wm, &support, &z);
            smooth &= mp == m && mm == m;
            fd[s] = (fp - fm) / (2.0 * h);
        }
        if !smooth {
            continue;
        }
        let err = dist2(&sample.grad, &fd);
        let scale = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err <= 1e-5 * scale + 1e-9, "d={d} I={support:?} err={err:e} scale={scale}");
        checked += 1;
        if scale > 0.0 {
            nontrivial += 1;
        }
    }
    assert!(nontrivial >= 50);
}

#[test]
fn wedge_gradient_matches_exact_derivative() {
    // δ = 1/2 + (2/π) atan(w₀/w₁), so ∇δ(1, 1) = (1/π, −1/π).
    let dist = SupportDistribution::point_mass(2, vec![0]).unwrap();
    let g = estimate_gradient(&dist, &WeightVector::ones(2), 200_000, RngSeed::new(42)).unwrap();
    let exact = std::f64::consts::FRAC_1_PI;
    assert!((g.mean[0] - exact).abs() <= 3.0 * g.stderr[0], "{g:?}");
    assert!((g.mean[1] + exact).abs() <= 3.0 * g.stderr[1], "{g:?}");
    assert_eq!(g.n, 200_000);
}

#[test]
fn gradient_is_unbiased_along_directions() {
    let mut r = rng(43);
    for trial in 0..4 {
        let d = 5;
        let dist = SupportDistribution::bernoulli(
            conecs_core::BetaVector::new((0..d).map(|_| r.random_range(0.2..0.8)).collect()).unwrap(),
        );
        let w = random_weights(&mut r, d, 0.5, 2.0);
        let v: Vec<f64> = gaussian_vec(&mut r, d);
        let h = 1e-3;
        let shift = |s: f64| WeightVector::new(w.iter().zip(&v).map(|(a, b)| a + s * h * b).collect()).unwrap();
        let n = 200_000;
        let diff = estimate_delta_difference(&dist, &shift(-1.0), &shift(1.0), n, RngSeed::new(trial)).unwrap();
        let fd = diff.mean / (2.0 * h);
        let fd_se = diff.stderr / (2.0 * h);

        let g = estimate_gradient(&dist, &WeightVector::new(w.clone()).unwrap(), n, RngSeed::new(100 + trial)).unwrap();
        let dir: f64 = g.mean.iter().zip(&v).map(|(a, b)| a * b).sum();
        // Coordinates are correlated; bound the directional stderr by Cauchy–Schwarz.
        let dir_se: f64 = g.stderr.iter().zip(&v).map(|(s, b)| s * b.abs()).sum();
        assert!((fd - dir).abs() <= 3.0 * (fd_se * fd_se + dir_se * dir_se).sqrt(), "fd {fd}±{fd_se} vs {dir}±{dir_se}");
    }
}

#[test]
fn empty_support_has_no_gradient() {
    let dist = SupportDistribution::point_mass(4, vec![]).unwrap();
    let g = estimate_gradient(&dist, &WeightVector::ones(4), 1000, RngSeed::new(1)).unwrap();
    assert!(g.mean.iter().all(|&x| x == 0.0));
    let res = descend(&dist, &WeightVector::ones(4), &DescentConfig::default()).unwrap();
    assert_eq!(res.termination, Termination::ZeroGradient);
    assert_eq!(res.accepted(), 0);
}

#[test]
fn gradient_estimates_are_reproducible() {
    let dist = presets::bernoulli_halving_blocks(16).unwrap();
    let w = WeightVector::ones(16);
    let a = estimate_gradient(&dist, &w, 3000, RngSeed::new(5)).unwrap();
    let b = estimate_gradient(&dist, &w, 3000, RngSeed::new(5)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn descent_from_unit_weights_improves() {
    let dist = presets::bernoulli_halving_blocks(64).unwrap();
    let cfg = DescentConfig {
        n_grad_samples: 20_000,
        n_eval_samples: 20_000,
        max_iters: 4,
        seed: RngSeed::new(7),
        ..DescentConfig::default()
    };
    let res = descend(&dist, &WeightVector::ones(64), &cfg).unwrap();
    assert!(res.accepted() >= 1);
    let first = res.trajectory[0].delta;
    let last = res.trajectory.last().unwrap().delta;
    assert!(first.mean - last.mean > 3.0 * (first.stderr + last.stderr), "{first:?} -> {last:?}");
    for pair in res.trajectory.windows(2) {
        assert!(pair[1].delta.mean < pair[0].delta.mean);
    }
    for step in &res.trajectory {
        assert!(step.weights.as_slice().iter().all(|&x| x >= WEIGHT_FLOOR));
    }
}

#[test]
fn descent_stops_cleanly_at_minimum_step() {
    let dist = presets::bernoulli_halving_blocks(16).unwrap();
    let cfg = DescentConfig {
        n_grad_samples: 2000,
        n_eval_samples: 2000,
        initial_step: 1e-3,
        min_step: 5e-4,
        max_iters: 50,
        seed: RngSeed::new(8),
        ..DescentConfig::default()
    };
    let res = descend(&dist, &WeightVector::ones(16), &cfg).unwrap();
    assert!(matches!(res.termination, Termination::StepBelowMinimum | Termination::MaxIterations));
    assert!(DescentConfig { min_step: 2.0, ..cfg }.validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gradient_is_orthogonal_to_weights(
        (w, support, z) in (2usize..=8).prop_flat_map(|d| (
            prop::collection::vec(0.1f64..10.0, d),
            prop::sample::subsequence((0..d).collect::<Vec<_>>(), 1..d),
            prop::collection::vec(-4.0f64..4.0, d),
        ))
    ) {
        // The cone is invariant under w ↦ c w, so d/dc ‖π‖² = ⟨∇, w⟩ = 0.
        let wv = WeightVector::new(w.clone()).unwrap();
        let g = gradient_sample(&support, &wv, &z).unwrap();
        prop_assume!(g.valid);
        let dot: f64 = g.grad.iter().zip(&w).map(|(a, b)| a * b).sum();
        let scale = g.grad.iter().map(|v| v.abs()).sum::<f64>() * w.iter().cloned().fold(0.0, f64::max);
        prop_assert!(dot.abs() <= 1e-10 * scale.max(1.0));
    }
}
